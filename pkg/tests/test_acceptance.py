"""Acceptance criteria.  Every test prints one ``criterion k: PASS|FAIL`` line.

The desk-scale solves (criteria 4, 6 and 8) take about half an hour on one core.
"""

import numpy as np
import pytest

from oracles import assembled_oracle
from perimetric.algebra.derive import angular_reduce, centrifugal_terms, factorize, load_or_derive, sector_for
from perimetric.assembly import ELEC, NUC, OVL, SB, assemble, coupling_offsets, envelope_ok, make_layout, \
    offset_counts
from perimetric.cli import build_pair
from perimetric.config import RunConfig
from perimetric.eigensolver import SolveRequest, dense_eigenvalues, residual_norm, shift_refine, solve
from perimetric.refdata import ingest_reference, reference_map
from perimetric.sensitivity import Parameter, both_methods
from perimetric.sturmian import BasisTruncation, ScaleParams, YZSymmetry, basis_size
from perimetric.systems import Species, SystemSpec, reduced_masses, species_limit

CELLS = [(sp, J) for sp in ("h2+", "d2+", "hd+") for J in (0, 1, 2)]
BETA = {"h2+": 12.0, "d2+": 16.0, "hd+": 14.0}


@pytest.fixture
def verdict(capsys):
    def report(k, ok, detail=""):
        with capsys.disabled():
            print(f"\ncriterion {k}: {'PASS' if ok else 'FAIL'}  {detail}")
        return ok

    return report


@pytest.fixture(scope="module")
def ref():
    return reference_map(ingest_reference())


def _pair(species, J, N, Nx, alpha, beta):
    spec = SystemSpec.for_species(species)
    ham = load_or_derive(J, sector_for(J, spec.homonuclear))
    return spec, assemble(ham, N, Nx, ScaleParams(alpha, beta), reduced_masses(spec))


def test_criterion_1_basis_sizes(verdict):
    full = basis_size(BasisTruncation(60, 15))
    sym = basis_size(BasisTruncation(60, 15, YZSymmetry.SYMMETRIC))
    expected = {("h2+", 0): 11964, ("d2+", 0): 11964, ("hd+", 0): 23496, ("h2+", 1): 23496,
                ("hd+", 1): 46992, ("h2+", 2): 35460, ("hd+", 2): 70488}
    got = {}
    for (sp, J) in expected:
        spec = SystemSpec.for_species(sp)
        got[(sp, J)] = make_layout(load_or_derive(J, sector_for(J, spec.homonuclear)), 60, 15).size
    ok = got == expected and (full, sym) == (23496, 11964)
    detail = " ".join(f"{sp}/J{J}={n}" for (sp, J), n in got.items())
    assert verdict(1, ok, detail)


def test_criterion_2_coupling_envelope(verdict):
    ok = True
    parts = []
    for J in (0, 1, 2):
        for sector in sorted({"none", sector_for(J, True)}):
            ham = load_or_derive(J, sector)
            ok &= envelope_ok(coupling_offsets(ham), J)
            pair = assemble(ham, 8, 4, ScaleParams(1.3, 2.1))
            gs = pair.layout.global_states()
            r, l1 = {0: (2, 3), 1: (4, 5), 2: (6, 7)}[J]
            for m in [*pair.components, pair.B]:
                if m is None:
                    continue
                i, j = np.nonzero(m.to_dense())
                if sector == "none":
                    d = np.abs(gs[i, :3] - gs[j, :3])
                    ok &= bool(d.max() <= r and d.sum(1).max() <= l1)
        c = offset_counts(load_or_derive(J, "none"))
        target = {0: 57, 1: 450, 2: 1707}[J]
        ok &= c["envelope"] <= target
        parts.append(f"J{J}: {c['envelope']} offsets ({c['per_block_pair']} per block pair) vs {target}")
    assert verdict(2, ok, "; ".join(parts))


GROUND = [
    # species, J, (N, Nx, alpha, beta), reference, tolerance
    ("h2+", 0, (36, 9, 1.8, 12.0), -0.59713906307939, 1e-10),
    ("h2+", 1, (36, 9, 1.8, 12.0), -0.59687373878471, 1e-9),
    ("h2+", 2, (32, 6, 1.8, 12.0), -0.59634520548939, 1e-8),
    ("hd+", 2, (32, 6, 1.8, 14.0), -0.59729964335178, 1e-8),
    ("d2+", 0, (36, 9, 1.8, 16.0), -0.59878878430446, 1e-10),
]


def test_criterion_3_ground_levels(verdict):
    ok = True
    parts = []
    for sp, J, cfg, E_ref, tol in GROUND:
        _, pair = _pair(sp, J, *cfg)
        E = solve(pair, SolveRequest(count=1))[0].energy
        err = abs(E - E_ref)
        ok &= err <= tol
        parts.append(f"{sp}(0,{J}) N={cfg[0]} |dE|={err:.1e}")
    assert verdict(3, ok, "; ".join(parts))


@pytest.fixture(scope="module")
def desk():
    """Ten levels per cell at the desk configuration.

    Window-mode levels whose residual misses the tolerance are shift-refined
    one by one; v = 9 is always re-solved in shifted mode for comparison.
    """
    out = {}
    for sp, J in CELLS:
        cfg = RunConfig(Species.parse(sp), J)
        pair = build_pair(cfg)[1].collapsed()
        req = SolveRequest(count=10, seed=cfg.seed)
        window = solve(pair, req, keep_vectors=True)
        reported, refined = [], 0
        for lv in window:
            if lv.residual > req.tol:
                lv = shift_refine(pair, lv, req, keep_vectors=True)
                refined += 1
            reported.append(lv)
        target = window[9]
        shifted = reported[9] if reported[9] is not target else shift_refine(pair, target, req)
        out[(sp, J)] = {
            "config": (cfg.N, cfg.Nx, cfg.alpha, cfg.beta),
            "energies": [lv.energy for lv in reported],
            "residuals": [residual_norm(pair, lv.vector, lv.energy) for lv in reported],
            "refined": refined,
            "window": (target.energy, target.residual),
            "shifted": (shifted.energy, shifted.residual),
        }
        del pair, window, reported
    return out


@pytest.mark.slow
def test_criterion_4_spectrum_breadth(verdict, desk, ref):
    ok = True
    parts = []
    for (sp, J), r in desk.items():
        err = max(abs(E - ref[(sp, J, v)].energy) for v, E in enumerate(r["energies"][:10]))
        ok &= err <= 1e-8
        parts.append(f"{sp}/J{J} N={r['config'][0]} max|dE|(v0-9)={err:.1e}")
    assert verdict(4, ok, "; ".join(parts))


SENS = [("h2+", Parameter.LAMBDA_E_P, 0.284657), ("d2+", Parameter.LAMBDA_E_D, 0.197274),
        ("hd+", Parameter.LAMBDA_E_P, 0.244262), ("hd+", Parameter.MU_P_D, 0.081468)]


def test_criterion_5_sensitivities(verdict):
    ok = True
    parts = []
    cache = {}
    for sp, p, expected in SENS:
        if sp not in cache:
            spec, pair = _pair(sp, 0, 36, 9, 1.8, BETA[sp])
            cache = {sp: (spec, pair, solve(pair, SolveRequest(count=1), keep_vectors=True)[0])}
        spec, pair, lv = cache[sp]
        r = both_methods(pair, lv, spec, p)
        good = abs(r.value - expected) <= 2e-6 and r.gap <= 1e-4 * abs(r.value)
        ok &= good
        parts.append(f"{sp} {p.value}={r.value:.7f} (ref {expected}) hf-fd={r.gap / abs(r.value):.0e}")
    assert verdict(5, ok, "; ".join(parts))


NESTED = {0: (20, 28, 36, 44), 1: (16, 24, 32, 40), 2: (16, 24, 32)}


@pytest.mark.slow
def test_criterion_6_variational_monotonicity(verdict, desk):
    ok = True
    worst = -np.inf
    for sp, J in CELLS:
        lim = species_limit(SystemSpec.for_species(sp))
        prev = None
        for N in NESTED[J]:
            _, pair = _pair(sp, J, N, N // 4, 1.8, BETA[sp])
            E = np.array([lv.energy for lv in solve(pair, SolveRequest(count=6))])
            bound = E[E < lim]
            if prev is not None:
                k = min(len(prev), len(bound))
                step = (bound[:k] - prev[:k]).max()
                worst = max(worst, step)
                ok &= step <= 1e-13
            prev = bound
        ok &= all(E < lim for E in desk[(sp, J)]["energies"])
    assert verdict(6, ok, f"largest increase with N = {worst:.1e}; all desk levels below the limits")


@pytest.mark.slow
def test_criterion_7_oracles(verdict):
    ok = True
    worst_q = 0.0
    for J in (0, 1, 2):
        for sector in ("none", sector_for(J, True)):
            ham = load_or_derive(J, sector)
            pair = assemble(ham, 3, 2, ScaleParams(1.3, 2.1))
            oracle = assembled_oracle(ham, pair.layout, 1.3, 2.1)
            got = {ELEC: pair.components[0], NUC: pair.components[1], SB: pair.components[2], OVL: pair.B}
            for slot, m in got.items():
                dense = m.to_dense() if m is not None else np.zeros_like(oracle[slot])
                err = np.abs(dense - oracle[slot]).max() / max(np.abs(oracle[slot]).max(), 1.0)
                worst_q = max(worst_q, err)
    ok &= worst_q <= 1e-12
    dense = {}
    for sp in ("h2+", "hd+"):
        for J in (0, 1, 2):
            _, pair = _pair(sp, J, 20, 5, 1.8, BETA[sp])
            E = np.array([lv.energy for lv in solve(pair, SolveRequest(count=6))])
            dense[(sp, J)] = np.abs(E - dense_eigenvalues(pair, 6)).max()
    ok &= max(dense.values()) <= 1e-12
    detail = " ".join(f"{sp}/J{J}={e:.1e}" for (sp, J), e in dense.items())
    assert verdict(7, ok, f"quadrature N=3: {worst_q:.1e}; banded vs dense at N=20: {detail}")


@pytest.mark.slow
def test_criterion_8_shift_refinement(verdict, desk):
    ok = True
    parts = []
    for (sp, J), r in desk.items():
        (Ew, rw), (Es, rs) = r["window"], r["shifted"]
        agree = abs(Ew - Es) <= rw + rs + 1e-13
        worst = max(r["residuals"])
        ok &= agree and worst <= 1e-10
        parts.append(f"{sp}/J{J} |Ew-Es|={abs(Ew - Es):.1e} max res={worst:.1e} ({r['refined']} refined)")
    assert verdict(8, ok, "; ".join(parts))


def test_criterion_9_centrifugal_cancellation(verdict):
    before = {J: bool(centrifugal_terms(angular_reduce(J).form)) for J in (1, 2)}
    after = {J: centrifugal_terms(factorize(angular_reduce(J)).body) for J in (1, 2)}
    ok = all(before.values()) and not any(after.values())
    assert verdict(9, ok, f"1/R^2 terms present before factorization {before}, after: none={not any(after.values())}")
