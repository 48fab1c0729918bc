"""Count bundled reference cells by printed precision, per species."""

from collections import Counter

from perimetric.refdata import Flag, ingest_reference, precision_counts


def main():
    ref = ingest_reference()
    print("cells with >= 12 printed decimals:", precision_counts(ref))
    print("stated in the source: {'h2+': 57, 'd2+': 79, 'hd+': 65}")
    print("flags:", dict(Counter(e.flag.value for e in ref)))
    by = Counter((e.species, e.decimals) for e in ref if e.flag is not Flag.NOBOUND)
    for (sp, d), n in sorted(by.items()):
        print(f"  {sp} {d:2d} decimals: {n}")


if __name__ == "__main__":
    main()
