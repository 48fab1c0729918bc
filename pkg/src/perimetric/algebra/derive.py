"""Exact derivation of the effective radial Hamiltonian for J = 0, 1, 2.

Pipeline::

    angular_reduce(J)            body-frame coupled operator over Phi^0..Phi^J
      -> factorize(op)           polynomial prefactors; centrifugal poles removed
      -> project_exchange(op, s) nuclear-exchange sector (homonuclear ions)
      -> regularize_and_transform(op)
                                 times r1 r2 R, perimetric coordinates,
                                 divergence form d_u . poly . d_v

Every step is rational arithmetic on :class:`~perimetric.algebra.poly.Poly`.
Angular functions carrying a factor sqrt(3) are stored rescaled (the sqrt(3)
moved into the radial function), which keeps the whole derivation rational.
"""

from __future__ import annotations

import math
import os
import random
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from pathlib import Path

from . import forms as F
from .forms import QuadForm
from .poly import Poly


class UnsupportedSymmetryError(ValueError):
    pass


class DerivationError(RuntimeError):
    """Raised when an algebraic identity the construction relies on fails."""


class InvalidSectorError(ValueError):
    pass


class Parity(str, Enum):
    EVEN = "even"
    ODD = "odd"


class ExchangeSector(str, Enum):
    NONE = "none"
    SINGLET = "singlet"
    TRIPLET = "triplet"


# exchange sector of the 1s-sigma_g levels for each J
_HOMONUCLEAR_SECTOR = {0: ExchangeSector.SINGLET, 1: ExchangeSector.TRIPLET, 2: ExchangeSector.SINGLET}


def natural_parity(J: int) -> Parity:
    return Parity.EVEN if J % 2 == 0 else Parity.ODD


def sector_for(J: int, homonuclear: bool) -> ExchangeSector:
    return _HOMONUCLEAR_SECTOR[J] if homonuclear else ExchangeSector.NONE


def _check_symmetry(J: int, parity: Parity | None) -> Parity:
    if J not in (0, 1, 2):
        raise UnsupportedSymmetryError(f"J={J} not supported (J <= 2 only)")
    p = natural_parity(J)
    if parity is not None and Parity(parity) != p:
        raise UnsupportedSymmetryError(f"J={J} with parity {parity} is not one of Se, Po, De")
    return p


# ---------------------------------------------------------------------------
# angular reduction


@dataclass
class CoupledRadialOperator:
    """Quadratic form over ``Phi^0..Phi^J`` in body coordinates ``(R, rho, zeta)``."""

    J: int
    parity: Parity
    angular: list[Poly]
    form: QuadForm


def angular_functions(J: int) -> list[Poly]:
    """M = 0 angular functions in terms of ``RZ = cos(theta)`` and ``pZ = -sin(theta) cos(phi)``.

    J=2 entries are divided by sqrt(3) relative to the conventional forms.
    """
    fr = F.body_frame()
    RZ, pZ = fr.v("RZ"), fr.v("pZ")
    if J == 0:
        return [fr.p(1)]
    if J == 1:
        return [RZ, pZ]
    return [(3 * RZ * RZ - 1) / 2, RZ * pZ, (2 * pZ * pZ - 1 + RZ * RZ) / 2]


def angular_reduce(J: int, parity: Parity | str | None = None) -> CoupledRadialOperator:
    """Insert the M = 0 angular ansatz into the kinetic energy and integrate over orientations."""
    p = _check_symmetry(J, parity)
    fr = F.body_frame()
    ang = angular_functions(J)
    form = F.build_form(fr, ang, F.kinetic_rR())
    return CoupledRadialOperator(J, p, ang, form)


def pole_orders(form: QuadForm, var: str, derivative_free: bool = True) -> dict:
    """Lowest power of ``var`` per derivative-free density entry (negative = pole)."""
    out = {}
    for ch, tab in form.entries.items():
        for (k, u, l, v), w in tab.items():
            if derivative_free and (u is not None or v is not None):
                continue
            out[(ch, k, u, l, v)] = w.min_degree(var)
    return out


def centrifugal_terms(form: QuadForm) -> dict:
    """Derivative-free entries with a ``1/R**2`` (or stronger) pole."""
    return {k: d for k, d in pole_orders(form, "R").items() if d <= -2}


# ---------------------------------------------------------------------------
# factorization


def factorization_matrix(J: int) -> list[list[Poly]]:
    """``Phi^i = sum_k c[i][k] F_k`` in body coordinates (rescaled J=2 rows)."""
    fr = F.body_frame()
    R, rho, zeta = fr.v("R"), fr.v("rho"), fr.v("zeta")
    zp, zm = zeta + R / 2, zeta - R / 2
    if J == 0:
        return [[fr.p(1)]]
    if J == 1:
        return [[zp, zm], [rho, rho]]
    half_rho2 = rho * rho / 2
    return [
        [zp * zp - half_rho2, zm * zm - half_rho2, zeta * zeta - R * R / 4 - half_rho2],
        [3 * rho * zp, 3 * rho * zm, 3 * rho * zeta],
        [3 * half_rho2, 3 * half_rho2, 3 * half_rho2],
    ]


def cartesian_prefactors(J: int) -> list[Poly]:
    """The factorized ansatz written with lab-Z components of ``a = r + R/2``, ``b = r - R/2``.

    J=1: ``a_Z F + b_Z G``; J=2: quadrupolar products ``Y(a,a) F + Y(b,b) G + Y(a,b) H``
    with ``Y(u, v) = 3/2 u_Z v_Z - u.v/2``.
    """
    fr = F.hylleraas_frame()
    r1, r2, R, aZ, bZ = (fr.v(n) for n in fr.vars)
    if J == 0:
        return [fr.p(1)]
    if J == 1:
        return [aZ, bZ]
    ab = (r1 * r1 + r2 * r2 - R * R) / 2
    Y = lambda uz, vz, dot: Fraction(3, 2) * uz * vz - dot / 2  # noqa: E731
    return [Y(aZ, aZ, r1 * r1), Y(bZ, bZ, r2 * r2), Y(aZ, bZ, ab)]


def coulomb_potential() -> Poly:
    fr = F.hylleraas_frame()
    return -fr.v("r1", -1) - fr.v("r2", -1) + fr.v("R", -1)


@dataclass
class FactorizedOperator:
    """Factorized radial operator over F (, G (, H)).

    ``body`` is the substituted body-frame form (used for the pole check);
    ``form`` is the same operator in Hylleraas coordinates ``(r1, r2, R)``,
    including the Coulomb and overlap channels.
    """

    J: int
    parity: Parity
    body: QuadForm
    form: QuadForm
    unknowns: list[str]


def _test_functions(n: int, rng: random.Random):
    """Smooth test functions of (r1, r2, R) with analytic first derivatives."""
    funcs = []
    for _ in range(n):
        c = [rng.uniform(0.3, 1.2) for _ in range(3)]
        p = [rng.uniform(-1.0, 1.0) for _ in range(4)]

        def f(r1, r2, R, c=c, p=p):
            poly = p[0] + p[1] * r1 + p[2] * r2 * R + p[3] * r1 * r2
            dpoly = (p[1] + p[3] * r2, p[2] * R + p[3] * r1, p[2] * r2)
            ex = math.exp(-c[0] * r1 - c[1] * r2 - c[2] * R)
            val = poly * ex
            grad = tuple((dpoly[i] - c[i] * poly) * ex for i in range(3))
            return val, grad

        funcs.append(f)
    return funcs


def check_route_equivalence(body: QuadForm, hyl: QuadForm, channels=(F.ELECTRON, F.MU12, F.MU0, F.OVERLAP),
                            npoints: int = 6, seed: int = 7, rtol: float = 1e-11) -> float:
    """Compare two routes pointwise with random test functions; returns the max relative gap."""
    rng = random.Random(seed)
    funcs = _test_functions(body.nfun, rng)
    worst = 0.0
    for _ in range(npoints):
        R = rng.uniform(0.5, 3.0)
        rho = rng.uniform(0.2, 2.0)
        zeta = rng.uniform(-1.5, 1.5)
        r1 = math.hypot(rho, zeta + R / 2)
        r2 = math.hypot(rho, zeta - R / 2)
        fb, fh = [], []
        for f in funcs:
            val, (d1, d2, dR) = f(r1, r2, R)
            fh.append({None: val, "r1": d1, "r2": d2, "R": dR})
            fb.append({
                None: val,
                "rho": rho / r1 * d1 + rho / r2 * d2,
                "zeta": (zeta + R / 2) / r1 * d1 + (zeta - R / 2) / r2 * d2,
                "R": (zeta + R / 2) / (2 * r1) * d1 - (zeta - R / 2) / (2 * r2) * d2 + dR,
            })
        pb = {"R": R, "rho": rho, "zeta": zeta, "RZ": 0.0, "pZ": 0.0, "nZ": 0.0}
        ph = {"r1": r1, "r2": r2, "R": R, "aZ": 0.0, "bZ": 0.0}
        for ch in channels:
            a = body.evaluate(ch, pb, fb)
            b = hyl.evaluate(ch, ph, fh)
            scale = max(abs(a), abs(b), 1e-300)
            worst = max(worst, abs(a - b) / scale)
    if worst > rtol:
        raise DerivationError(f"body-frame and Hylleraas routes disagree (relative gap {worst:.2e})")
    return worst


def factorize(op: CoupledRadialOperator) -> FactorizedOperator:
    """Substitute the polynomial factorization and verify the centrifugal poles cancel."""
    J = op.J
    body = F.substitute_functions(op.form, factorization_matrix(J))
    poles = {k: d for k, d in pole_orders(body, "R").items() if d < 0}
    poles.update({k: d for k, d in pole_orders(body, "rho").items() if d < 0})
    if poles:
        raise DerivationError(f"centrifugal singularity survives factorization for J={J}: {poles}")
    hyl = F.build_form(F.hylleraas_frame(), cartesian_prefactors(J), F.kinetic_ab(), coulomb_potential())
    check_route_equivalence(body, hyl)
    names = ["F", "G", "H"][: J + 1]
    return FactorizedOperator(J, op.parity, body, hyl, names)


# ---------------------------------------------------------------------------
# exchange symmetry


# Homonuclear substitution of the radial functions by y<->z symmetric (+) and
# antisymmetric (-) parts.  J=1: G = -F~ with F = F+ + F-;  J=2: G = F~, H = H~.
_EXCHANGE = {
    0: ([[1]], ["F+"], ["symmetric"]),
    1: ([[1, 1], [-1, 1]], ["F+", "F-"], ["symmetric", "antisymmetric"]),
    2: ([[1, 1, 0], [1, -1, 0], [0, 0, 1]], ["F+", "F-", "H+"], ["symmetric", "antisymmetric", "symmetric"]),
}


@dataclass
class ProjectedOperator:
    J: int
    parity: Parity
    sector: ExchangeSector
    form: QuadForm
    unknowns: list[str]
    yz_symmetry: list[str]


def project_exchange(op: FactorizedOperator, sector: ExchangeSector | str) -> ProjectedOperator:
    """Eliminate exchange-related radial functions.

    For ``NONE`` (HD+) the operator is returned unchanged over ``J+1`` unknowns
    on the full basis.  For homonuclear sectors the symmetry-breaking channel
    is dropped and the unknowns become y<->z symmetric/antisymmetric parts.
    """
    sector = ExchangeSector(sector)
    J = op.J
    if sector is ExchangeSector.NONE:
        return ProjectedOperator(J, op.parity, sector, op.form, list(op.unknowns), ["none"] * (J + 1))
    if sector is not _HOMONUCLEAR_SECTOR[J]:
        raise InvalidSectorError(f"sector {sector.value} is not the bound 1s-sigma_g sector for J={J}")
    mat, names, sym = _EXCHANGE[J]
    fr = op.form.frame
    coeffs = [[fr.p(c) for c in row] for row in mat]
    form = F.substitute_functions(F.drop_channel(op.form, F.MU0), coeffs)
    return ProjectedOperator(J, op.parity, sector, form, names, sym)


def homonuclear_prefactors(J: int) -> list[Poly]:
    """Direct prefactors of the homonuclear unknowns (independent of :func:`project_exchange`)."""
    P = cartesian_prefactors(J)
    if J == 0:
        return P
    if J == 1:
        return [P[0] - P[1], P[0] + P[1]]
    return [P[0] + P[1], P[0] - P[1], P[2]]


# ---------------------------------------------------------------------------
# perimetric coordinates

PERIMETRIC = ("x", "y", "z")
_DERIV_CHAIN = {
    None: {None: 1},
    "r1": {"x": 1, "y": 1, "z": -1},
    "r2": {"x": 1, "y": -1, "z": 1},
    "R": {"x": -1, "y": 1, "z": 1},
}


def perimetric_images() -> dict[str, Poly]:
    """``r1 = (x+y)/2``, ``r2 = (x+z)/2``, ``R = (y+z)/2``."""
    x, y, z = (Poly.var(PERIMETRIC, n) for n in PERIMETRIC)
    return {"r1": (x + y) / 2, "r2": (x + z) / 2, "R": (y + z) / 2}


@dataclass(frozen=True)
class OperatorTerm:
    """``coeff * d_du (bra) . poly . d_dv (ket)`` between unknowns ``block = (k, l)``."""

    block: tuple[int, int]
    channel: str
    derivs: tuple[str | None, str | None]
    coeff: Poly


@dataclass
class EffectiveHamiltonian:
    J: int
    parity: Parity
    sector: ExchangeSector
    unknowns: list[str]
    yz_symmetry: list[str]
    terms: list[OperatorTerm]
    jacobian_weight: Poly = field(default_factory=lambda: _weight())

    @property
    def nblocks(self) -> int:
        return len(self.unknowns)

    def channel_terms(self, channel: str) -> list[OperatorTerm]:
        return [t for t in self.terms if t.channel == channel]

    def envelope(self) -> tuple[int, int]:
        """(max per-coordinate degree, max total degree) over all terms."""
        per = max(t.coeff.degree(v) for t in self.terms for v in PERIMETRIC)
        tot = max(t.coeff.total_degree() for t in self.terms)
        return per, tot

    def is_transpose_closed(self) -> bool:
        tab = {(t.block, t.channel, t.derivs): t.coeff for t in self.terms}
        for (blk, ch, (du, dv)), c in tab.items():
            if tab.get(((blk[1], blk[0]), ch, (dv, du))) != c:
                return False
        return True


def _weight() -> Poly:
    im = perimetric_images()
    return im["r1"] * im["r2"] * im["R"]


def regularize_and_transform(op: ProjectedOperator) -> EffectiveHamiltonian:
    """Multiply by the measure ``r1 r2 R`` and change to perimetric coordinates.

    The constant Jacobian ``dr1 dr2 dR = dx dy dz / 4`` is dropped (it scales
    both sides of the eigenproblem).  Raises :class:`DerivationError` if a
    density is not polynomial after regularization or if a differentiated
    coordinate is missing from a coefficient (which would make its matrix
    non-banded).
    """
    form = op.form
    fr = form.frame
    images = perimetric_images()
    acc: dict[tuple, Poly] = {}
    for ch, tab in form.entries.items():
        for (k, u, l, v), w in tab.items():
            wm = w * fr.measure
            for name in fr.vars:
                if wm.min_degree(name) < 0:
                    raise DerivationError(f"pole in {name} survives regularization ({ch}, {k}{u}, {l}{v})")
            if any(wm.depends_on(z) for z in fr.zcomp):
                raise DerivationError("orientation dependence left in a radial density")
            wp = wm.subs(images, PERIMETRIC)
            for du, cu in _DERIV_CHAIN[u].items():
                for dv, cv in _DERIV_CHAIN[v].items():
                    key = ((k, l), ch, (du, dv))
                    t = wp * (cu * cv)
                    acc[key] = acc[key] + t if key in acc else t
    terms = []
    for (blk, ch, (du, dv)), c in sorted(acc.items(), key=lambda kv: _term_sort_key(kv[0])):
        if c.is_zero():
            continue
        for d in (du, dv):
            if d is not None and c.min_degree(d) < 1:
                raise DerivationError(f"term {blk} {ch} d{du}.d{dv} is not banded-representable: {c}")
        terms.append(OperatorTerm(blk, ch, (du, dv), c))
    return EffectiveHamiltonian(op.J, op.parity, op.sector, op.unknowns, op.yz_symmetry, terms)


def _term_sort_key(key):
    blk, ch, (du, dv) = key
    order = {None: 0, "x": 1, "y": 2, "z": 3}
    return (blk, F.CHANNELS.index(ch), order[du], order[dv])


def derive(J: int, sector: ExchangeSector | str = ExchangeSector.NONE) -> EffectiveHamiltonian:
    """Full pipeline for one (J, sector)."""
    op = angular_reduce(J)
    fac = factorize(op)
    return regularize_and_transform(project_exchange(fac, sector))


# ---------------------------------------------------------------------------
# plain-text exact serialization

FORMAT_HEADER = "perimetric-effective-hamiltonian"
FORMAT_VERSION = 1


def _dtok(d: str | None) -> str:
    return "-" if d is None else d


def _tokd(s: str) -> str | None:
    return None if s == "-" else s


def dumps(eh: EffectiveHamiltonian) -> str:
    """One term per line: ``term k l channel du dv ex ey ez num/den``."""
    lines = [
        f"{FORMAT_HEADER} {FORMAT_VERSION}",
        f"J {eh.J}",
        f"parity {eh.parity.value}",
        f"sector {eh.sector.value}",
        "unknowns " + " ".join(f"{n}:{s}" for n, s in zip(eh.unknowns, eh.yz_symmetry)),
    ]
    for e, c in eh.jacobian_weight.monomials():
        lines.append(f"weight {e[0]} {e[1]} {e[2]} {c.numerator}/{c.denominator}")
    for t in eh.terms:
        for e, c in t.coeff.monomials():
            lines.append(
                f"term {t.block[0]} {t.block[1]} {t.channel} {_dtok(t.derivs[0])} {_dtok(t.derivs[1])} "
                f"{e[0]} {e[1]} {e[2]} {c.numerator}/{c.denominator}"
            )
    return "\n".join(lines) + "\n"


def loads(text: str) -> EffectiveHamiltonian:
    rows = [ln.split() for ln in text.splitlines() if ln.strip()]
    if not rows or rows[0][0] != FORMAT_HEADER:
        raise ValueError("not an effective Hamiltonian file")
    if int(rows[0][1]) != FORMAT_VERSION:
        raise ValueError(f"unsupported format version {rows[0][1]}")
    head = {r[0]: r[1:] for r in rows[1:5]}
    unknowns, sym = zip(*(u.split(":") for u in head["unknowns"]))
    weight: dict = {}
    acc: dict = {}
    for lineno, r in enumerate(rows[5:], start=6):
        try:
            if r[0] == "weight":
                weight[tuple(map(int, r[1:4]))] = Fraction(r[4])
            elif r[0] == "term":
                key = ((int(r[1]), int(r[2])), r[3], (_tokd(r[4]), _tokd(r[5])))
                acc.setdefault(key, {})[tuple(map(int, r[6:9]))] = Fraction(r[9])
            else:
                raise ValueError(f"unknown record {r[0]!r}")
        except (IndexError, ValueError) as exc:
            raise ValueError(f"line {lineno}: {exc}") from exc
    terms = [OperatorTerm(blk, ch, d, Poly(PERIMETRIC, m)) for (blk, ch, d), m in acc.items()]
    return EffectiveHamiltonian(
        int(head["J"][0]), Parity(head["parity"][0]), ExchangeSector(head["sector"][0]),
        list(unknowns), list(sym), terms, Poly(PERIMETRIC, weight),
    )


def default_cache_dir() -> Path:
    return Path(os.environ.get("PERIMETRIC_CACHE", Path.home() / ".cache" / "perimetric"))


def load_or_derive(J: int, sector: ExchangeSector | str = ExchangeSector.NONE,
                   cache_dir: Path | str | None = None) -> EffectiveHamiltonian:
    """Derive once per (J, sector) and keep the exact result on disk."""
    sector = ExchangeSector(sector)
    key = (J, sector)
    if key in _MEMO:
        return _MEMO[key]
    d = Path(cache_dir) if cache_dir is not None else default_cache_dir()
    path = d / f"heff_J{J}_{sector.value}_v{FORMAT_VERSION}.txt"
    eh = None
    if path.exists():
        try:
            eh = loads(path.read_text())
        except ValueError:
            eh = None
    if eh is None:
        eh = derive(J, sector)
        try:
            d.mkdir(parents=True, exist_ok=True)
            tmp = path.with_suffix(".tmp")
            tmp.write_text(dumps(eh))
            tmp.replace(path)
        except OSError:
            pass
    _MEMO[key] = eh
    return eh


_MEMO: dict = {}
