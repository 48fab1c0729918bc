"""Solve every (species, J) cell at its desk configuration and compare with the bundled tables.

usage: python scripts/reproduce_tables.py [--levels 12] [--species h2+ ...] [--J 0 1 2] [--refine]
"""

import argparse
import time

from perimetric.cli import run
from perimetric.config import RunConfig
from perimetric.refdata import ComputedLevel, compare, ingest_reference
from perimetric.systems import Species


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--levels", type=int, default=12)
    ap.add_argument("--species", nargs="+", default=["h2+", "d2+", "hd+"])
    ap.add_argument("--J", nargs="+", type=int, default=[0, 1, 2])
    ap.add_argument("--refine", action="store_true")
    args = ap.parse_args()
    ref = ingest_reference()
    print("species,J,v,energy_au,reference,delta,residual,status,N,Nx,alpha,beta,seconds")
    for sp in args.species:
        for J in args.J:
            t0 = time.perf_counter()
            cfg = RunConfig(Species.parse(sp), J, levels=args.levels, refine=args.refine)
            out = run(cfg)
            dt = time.perf_counter() - t0
            comp = [ComputedLevel(sp, J, lv.v, lv.energy) for lv in out.levels]
            for lv, d in zip(out.levels, compare(comp, ref, tol=1e-8)):
                print(f"{sp},{J},{lv.v},{lv.energy:.14f},{d.reference},{d.delta:.2e},{lv.residual:.1e},"
                      f"{d.status},{cfg.N},{cfg.Nx},{cfg.alpha},{cfg.beta},{dt:.0f}", flush=True)


if __name__ == "__main__":
    main()
