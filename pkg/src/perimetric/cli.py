"""Command-line driver: ``compute``, ``compare`` and ``scan``."""

from __future__ import annotations

import argparse
import csv
import io
import logging
import math
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

from .algebra.derive import load_or_derive, sector_for
from .assembly import BandedPair, assemble
from .config import ConfigError, RunConfig, load_config
from .eigensolver import LevelResult, Mode, SolveRequest, convergence_scan, shift_refine, solve
from .refdata import compare, ingest_reference, read_results
from .sensitivity import Parameter, hellmann_feynman, parameters_for, _required_digits
from .sturmian import BasisTruncation, ScaleParams, basis_size
from .systems import MassRatios, Species, SystemSpec, constants_table, reduced_masses, species_limit

log = logging.getLogger(__name__)

RESULT_COLUMNS = ["species", "J", "sector", "v", "energy_au", "residual", "converged_digits"]
SENS_COLUMNS = ["sens_lambda", "sens_mu"]
SENS_DIGITS = 6


@dataclass
class RunOutput:
    config: RunConfig
    levels: list[LevelResult]
    sensitivities: dict[int, tuple[float | None, float | None]] = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)

    def header(self) -> list[str]:
        c = self.config
        m = self.metadata
        return [
            "# perimetric results",
            f"# config_hash={c.digest()} seed={c.seed}",
            f"# mp_over_me={c.mp_over_me!r} md_over_me={c.md_over_me!r}",
            f"# mu12={m['mu12']!r} inv_mu0={m['inv_mu0']!r}",
            f"# N={c.N} Nx={c.Nx} alpha={c.alpha!r} beta={c.beta!r} dimension={m['dimension']} "
            f"n_tot={m['n_tot']} width={m['width']} shift={c.shift!r} refine={c.refine}",
            f"# dissociation_limit={m['limit']!r} runtime_s={m['runtime_s']:.1f}",
        ]

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("\n".join(self.header()) + "\n")
        cols = RESULT_COLUMNS + (SENS_COLUMNS if self.config.sensitivities else [])
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(cols)
        for lv in self.levels:
            row = [self.config.species.value, lv.J, lv.sector, lv.v, f"{lv.energy:.14f}",
                   f"{lv.residual:.3e}", lv.converged_digits]
            if self.config.sensitivities:
                s = self.sensitivities.get(lv.v, (None, None))
                row += ["" if x is None else f"{x:.6f}" for x in s]
            w.writerow(row)
        return buf.getvalue()


def system_for(config: RunConfig) -> SystemSpec:
    return SystemSpec.for_species(config.species, MassRatios(config.mp_over_me, config.md_over_me, "config"))


def build_pair(config: RunConfig) -> tuple[SystemSpec, BandedPair]:
    spec = system_for(config)
    ham = load_or_derive(config.J, sector_for(config.J, spec.homonuclear))
    pair = assemble(ham, config.N, config.Nx, ScaleParams(config.alpha, config.beta), reduced_masses(spec))
    return spec, pair


def run(config: RunConfig) -> RunOutput:
    """Assemble, solve, optionally refine and differentiate; keep bound levels only."""
    t0 = time.perf_counter()
    spec, pair = build_pair(config)
    if not config.sensitivities:
        pair = pair.collapsed()
    limit = species_limit(spec)
    want_vectors = config.sensitivities
    if config.shift is None:
        req = SolveRequest(Mode.WINDOW, count=config.levels, tol=config.tol, seed=config.seed)
    else:
        req = SolveRequest(Mode.SHIFTED, shift=config.shift, count=config.levels, tol=config.tol, seed=config.seed)
    levels = solve(pair, req, keep_vectors=want_vectors and not config.refine)
    levels = [lv for lv in levels if lv.energy < limit]
    if config.refine:
        levels = [shift_refine(pair, lv, req, keep_vectors=want_vectors) for lv in levels]
    sens = {}
    if config.sensitivities:
        need = _required_digits(1e-2, SENS_DIGITS)
        params = parameters_for(spec.species)
        for lv in levels:
            vals = [None, None]
            if lv.converged_digits >= need:
                for p in params:
                    slot = 1 if p is Parameter.MU_P_D else 0
                    vals[slot] = hellmann_feynman(pair, lv, spec, p)
            sens[lv.v] = tuple(vals)
            lv.vector = None
    m = reduced_masses(spec)
    syms = [s for s in pair.layout.symmetries]
    n_tot = basis_size(BasisTruncation(config.N, config.Nx))
    meta = {
        "mu12": m.mu12,
        "inv_mu0": m.inv_mu0,
        "dimension": pair.n,
        "n_tot": n_tot,
        "width": pair.width,
        "blocks": [s.value for s in syms],
        "limit": limit,
        "runtime_s": time.perf_counter() - t0,
    }
    out = RunOutput(config, levels, sens, meta)
    if config.out:
        Path(config.out).write_text(out.to_csv())
    return out


# ---------------------------------------------------------------------------
# argument parsing


def _parse_grid(text: str) -> list[tuple[float, float]]:
    """``a1,a2:b1,b2`` (outer product) or ``a:b;a:b`` pairs."""
    if ";" in text or text.count(":") == 0:
        pairs = []
        for item in text.split(";"):
            a, b = item.split(":") if ":" in item else item.split(",")
            pairs.append((float(a), float(b)))
        return pairs
    left, right = text.split(":")
    return [(float(a), float(b)) for a in left.split(",") for b in right.split(",")]


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="perimetric", description=__doc__)
    p.add_argument("--print-constants", action="store_true", help="print mass ratios and derived constants")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command")

    c = sub.add_parser("compute", help="solve one (species, J) problem")
    c.add_argument("--config", help="key = value file; command-line options override it")
    c.add_argument("--system", dest="species")
    c.add_argument("--J", type=int)
    c.add_argument("--N", type=int)
    c.add_argument("--Nx", type=int)
    c.add_argument("--alpha", type=float)
    c.add_argument("--beta", type=float)
    c.add_argument("--shift", type=float, help="shifted mode: levels nearest this energy")
    c.add_argument("--levels", type=int)
    c.add_argument("--refine", action="store_true", default=None, help="shift-refine every level")
    c.add_argument("--sensitivities", action="store_true", default=None)
    c.add_argument("--seed", type=int)
    c.add_argument("--out")

    k = sub.add_parser("compare", help="compare a results CSV with reference levels")
    k.add_argument("--results", required=True)
    k.add_argument("--reference", help="reference CSV (default: bundled)")
    k.add_argument("--tol", type=float, default=1e-10)

    s = sub.add_parser("scan", help="convergence scan over N and (alpha, beta)")
    s.add_argument("--system", required=True)
    s.add_argument("--J", type=int, required=True)
    s.add_argument("--N-list", required=True, help="comma separated, e.g. 24,28,32")
    s.add_argument("--grid", required=True, help="alpha list:beta list, e.g. 1.5,1.8:10,12,14")
    s.add_argument("--nx-ratio", type=float, default=0.25)
    s.add_argument("--levels", type=int, default=5)
    s.add_argument("--out")
    return p


def _cmd_compute(args) -> int:
    overrides = {k: getattr(args, k) for k in
                 ("species", "J", "N", "Nx", "alpha", "beta", "shift", "levels", "refine",
                  "sensitivities", "seed", "out")}
    if overrides["species"] is not None:
        overrides["species"] = Species.parse(overrides["species"])
    cfg = load_config(args.config, overrides)
    out = run(cfg)
    if not cfg.out:
        sys.stdout.write(out.to_csv())
    else:
        print(f"{len(out.levels)} levels written to {cfg.out}", file=sys.stderr)
    return 0


def _cmd_compare(args) -> int:
    results = read_results(args.results)
    ref = ingest_reference(args.reference) if args.reference else ingest_reference()
    rows = compare(results, ref, args.tol)
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["species", "J", "v", "computed", "reference", "delta", "matched_digits", "tolerance", "status"])
    for d in rows:
        w.writerow([d.species, d.J, d.v, f"{d.computed:.14f}",
                    "" if d.reference is None else f"{d.reference:.14f}",
                    "" if math.isnan(d.delta) else f"{d.delta:.3e}", d.matched_digits, f"{d.tolerance:.0e}",
                    d.status])
    bad = [d for d in rows if d.status in ("fail", "nobound-violation")]
    return 1 if bad else 0


def _cmd_scan(args) -> int:
    spec = SystemSpec.for_species(args.system)
    Ns = [int(x) for x in args.N_list.split(",")]
    grid = _parse_grid(args.grid)

    def progress(N, a, b, levels):
        log.info("N=%d alpha=%g beta=%g E0=%.14f", N, a, b, levels[0].energy)

    res = convergence_scan(spec, args.J, Ns, grid, nx_ratio=args.nx_ratio, count=args.levels, progress=progress)
    buf = io.StringIO()
    buf.write(f"# best alpha={res.best[0]!r} beta={res.best[1]!r}\n")
    buf.write("# stable_digits " + " ".join(f"v{v}={d}" for v, d in res.stable_digits.items()) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["N", "Nx", "alpha", "beta", "v", "energy_au", "residual"])
    for r in res.rows:
        w.writerow([r.N, r.Nx, r.alpha, r.beta, r.v, f"{r.energy:.14f}", f"{r.residual:.3e}"])
    if args.out:
        Path(args.out).write_text(buf.getvalue())
    else:
        sys.stdout.write(buf.getvalue())
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    if args.print_constants:
        for k, v in constants_table().items():
            print(f"{k} = {v!r}")
        if args.command is None:
            return 0
    if args.command is None:
        parser.print_help()
        return 2
    try:
        return {"compute": _cmd_compute, "compare": _cmd_compare, "scan": _cmd_scan}[args.command](args)
    except ConfigError as exc:
        parser.exit(2, f"perimetric: config error: {exc}\n")
