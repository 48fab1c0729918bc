"""Ground-level mass-ratio sensitivities by Hellmann-Feynman and central differences.

usage: python scripts/sensitivity_table.py [--N 36] [--Nx 9]
"""

import argparse

from perimetric.algebra.derive import load_or_derive, sector_for
from perimetric.assembly import assemble
from perimetric.eigensolver import SolveRequest, solve
from perimetric.refdata import ingest_reference, reference_map
from perimetric.sensitivity import Parameter, both_methods, parameters_for
from perimetric.sturmian import ScaleParams
from perimetric.systems import SystemSpec, reduced_masses

BETA = {"h2+": 12.0, "d2+": 16.0, "hd+": 14.0}


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--N", type=int, default=36)
    ap.add_argument("--Nx", type=int, default=9)
    ap.add_argument("--levels", type=int, default=1)
    args = ap.parse_args()
    ref = reference_map(ingest_reference())
    print("species,v,parameter,hellmann_feynman,fd_gap,reference")
    for sp in ("h2+", "d2+", "hd+"):
        spec = SystemSpec.for_species(sp)
        pair = assemble(load_or_derive(0, sector_for(0, spec.homonuclear)), args.N, args.Nx,
                        ScaleParams(1.8, BETA[sp]), reduced_masses(spec))
        for lv in solve(pair, SolveRequest(count=args.levels), keep_vectors=True):
            e = ref[(sp, 0, lv.v)]
            for p in parameters_for(sp):
                r = both_methods(pair, lv, spec, p)
                expected = e.sens_mu if p is Parameter.MU_P_D else e.sens_lambda
                print(f"{sp},{lv.v},{p.value},{r.value:.7f},{r.gap:.1e},{expected}")


if __name__ == "__main__":
    main()
