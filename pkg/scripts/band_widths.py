"""Problem dimension and half-bandwidth of the assembled matrices per (species, J).

usage: python scripts/band_widths.py [--N 20] [--Nx 5]
"""

import argparse

from perimetric.algebra.derive import load_or_derive, sector_for
from perimetric.assembly import assemble, offset_counts
from perimetric.sturmian import ScaleParams


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--N", type=int, default=20)
    ap.add_argument("--Nx", type=int, default=5)
    args = ap.parse_args()
    print("J,sector,dimension,width,offsets_envelope,offsets_per_block_pair")
    for J in (0, 1, 2):
        for sector in ("none", sector_for(J, True)):
            ham = load_or_derive(J, sector)
            pair = assemble(ham, args.N, args.Nx, ScaleParams(1.8, 12.0))
            c = offset_counts(ham)
            print(f"{J},{sector},{pair.n},{pair.width},{c['envelope']},{c['per_block_pair']}")


if __name__ == "__main__":
    main()
