"""Quadratic forms of rotationally reduced three-body wave functions.

A trial function is written ``Psi = sum_k P_k * f_k`` where each prefactor
``P_k`` is a polynomial in lab-frame Z components of a few body-fixed vectors
(and possibly internal coordinates), and each ``f_k`` is an unknown scalar
function of the three internal coordinates.  The kinetic energy is a sum of
``c * grad_D Psi . grad_D' Psi`` terms; gradients of every ring variable are
tabulated per frame, dot products come from the frame's Gram table, and the
orientation integral is done exactly with the isotropic tensor averages.

The result is a :class:`QuadForm`: a table of densities multiplying
``d_u f_k * d_v f_l`` (``u, v`` an internal coordinate or ``None``) per mass
channel, together with the volume measure of the internal coordinates.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product

from .poly import Poly

# channel names shared with assembly
ELECTRON = "electron"
MU12 = "mu12"
MU0 = "mu0"
COULOMB = "coulomb"
OVERLAP = "overlap"
CHANNELS = (ELECTRON, MU12, MU0, COULOMB, OVERLAP)

Vector = dict  # basis-vector name -> Poly


@dataclass
class Frame:
    """Coordinate description used for one derivation route.

    ``zcomp`` maps each lab-Z-component variable to the body vector it belongs
    to; ``gram`` holds dot products between non-lab basis vectors; ``grad``
    maps a gradient operator name to the gradient of every ring variable.
    """

    name: str
    vars: tuple[str, ...]
    internal: tuple[str, ...]
    zcomp: dict[str, str]
    gram: dict[tuple[str, str], Poly]
    grad: dict[str, dict[str, Vector]]
    measure: Poly
    lab: str = "e"

    def dot_basis(self, u: str, v: str) -> Poly:
        if u == self.lab and v == self.lab:
            return Poly.const(self.vars, 1)
        if u == self.lab or v == self.lab:
            w = v if u == self.lab else u
            zname = next(z for z, b in self.zcomp.items() if b == w)
            return Poly.var(self.vars, zname)
        if (u, v) in self.gram:
            return self.gram[(u, v)]
        return self.gram[(v, u)]

    def p(self, c) -> Poly:
        return Poly.const(self.vars, c)

    def v(self, name: str, power: int = 1) -> Poly:
        return Poly.var(self.vars, name, power)


def vadd(a: Vector, b: Vector) -> Vector:
    out = dict(a)
    for k, c in b.items():
        s = out[k] + c if k in out else c
        if s.is_zero():
            out.pop(k, None)
        else:
            out[k] = s
    return out


def vscale(a: Vector, s: Poly) -> Vector:
    out = {}
    for k, c in a.items():
        t = c * s
        if not t.is_zero():
            out[k] = t
    return out


def vdot(frame: Frame, a: Vector, b: Vector) -> Poly:
    out = Poly.zero(frame.vars)
    for ka, ca in a.items():
        for kb, cb in b.items():
            out = out + ca * cb * frame.dot_basis(ka, kb)
    return out


def grad_scalar(frame: Frame, op: str, p: Poly) -> Vector:
    """Gradient of a ring polynomial under the frame's operator ``op``."""
    rules = frame.grad[op]
    out: Vector = {}
    for name in frame.vars:
        if not p.depends_on(name):
            continue
        if name not in rules:
            raise KeyError(f"no gradient rule for {name!r} under {op!r} in frame {frame.name}")
        out = vadd(out, vscale(rules[name], p.diff(name)))
    return out


def _matchings(items: list[str]):
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for i in range(len(rest)):
        remaining = rest[:i] + rest[i + 1:]
        for m in _matchings(remaining):
            yield [(first, rest[i])] + m


def _double_factorial_odd(n: int) -> int:
    # (2n+1)!!
    out = 1
    for k in range(1, 2 * n + 2, 2):
        out *= k
    return out


def orientation_average(frame: Frame, s: Poly) -> Poly:
    """Average a polynomial over uniformly distributed lab-frame orientations.

    ``<prod_i (v_i . e)> = sum over pairings of prod (v_a . v_b) / (2n+1)!!``
    for ``2n`` factors; odd products vanish.
    """
    zidx = [frame.vars.index(z) for z in frame.zcomp]
    znames = list(frame.zcomp)
    cache: dict[tuple[int, ...], Poly] = {}
    out = Poly.zero(frame.vars)
    for e, c in s.terms.items():
        zexp = tuple(e[i] for i in zidx)
        deg = sum(zexp)
        if deg % 2:
            continue
        if zexp not in cache:
            items: list[str] = []
            for z, k in zip(znames, zexp):
                items += [frame.zcomp[z]] * k
            acc = Poly.zero(frame.vars)
            for m in _matchings(items):
                t = frame.p(1)
                for u, v in m:
                    t = t * frame.dot_basis(u, v)
                acc = acc + t
            cache[zexp] = acc / _double_factorial_odd(deg // 2)
        rest = list(e)
        for i in zidx:
            rest[i] = 0
        out = out + cache[zexp] * Poly(frame.vars, {tuple(rest): c})
    return out


Key = tuple  # (k, d, l, d')


@dataclass
class QuadForm:
    """Bilinear form ``sum W[ch][(k,u,l,v)] d_u f_k d_v g_l`` integrated with ``measure``.

    Densities are stored without the measure; ``None`` as a derivative label
    means the function itself.
    """

    frame: Frame
    nfun: int
    entries: dict[str, dict[Key, Poly]] = field(default_factory=dict)

    def add(self, channel: str, key: Key, w: Poly) -> None:
        if w.is_zero():
            return
        tab = self.entries.setdefault(channel, {})
        s = tab[key] + w if key in tab else w
        if s.is_zero():
            tab.pop(key, None)
        else:
            tab[key] = s

    def get(self, channel: str, key: Key) -> Poly:
        return self.entries.get(channel, {}).get(key, Poly.zero(self.frame.vars))

    def channels(self):
        return [c for c in CHANNELS if self.entries.get(c)]

    def is_symmetric(self) -> bool:
        for ch, tab in self.entries.items():
            for (k, u, l, v), w in tab.items():
                if tab.get((l, v, k, u), Poly.zero(self.frame.vars)) != w:
                    return False
        return True

    def evaluate(self, channel: str, point: dict[str, float], fvals) -> float:
        """Density (without measure) at ``point`` for function values/derivatives.

        ``fvals[k][d]`` is the value of ``d f_k`` (``d`` = ``None`` or coordinate name).
        """
        total = 0.0
        for (k, u, l, v), w in self.entries.get(channel, {}).items():
            total += w.evaluate(point) * fvals[k][u] * fvals[l][v]
        return total


def build_form(
    frame: Frame,
    prefactors: list[Poly],
    kinetic: dict[str, dict[tuple[str, str], Fraction]],
    potential: Poly | None = None,
) -> QuadForm:
    """Kinetic, potential and overlap forms of ``Psi = sum_k P_k f_k``."""
    n = len(prefactors)
    derivs = (None,) + frame.internal
    ops = sorted({op for tab in kinetic.values() for pair in tab for op in pair})

    # grad_op Psi  ->  {(k, d): Vector}
    grads: dict[str, dict[tuple[int, str | None], Vector]] = {}
    for op in ops:
        g: dict[tuple[int, str | None], Vector] = {}
        for k, pk in enumerate(prefactors):
            gp = grad_scalar(frame, op, pk)
            if gp:
                g[(k, None)] = gp
            for q in frame.internal:
                vq = frame.grad[op].get(q, {})
                if vq:
                    g[(k, q)] = vscale(vq, pk)
        grads[op] = g

    form = QuadForm(frame, n)
    dot_cache: dict[tuple, Poly] = {}
    for ch, tab in kinetic.items():
        for (op1, op2), coeff in tab.items():
            for (k, d1), v1 in grads[op1].items():
                for (l, d2), v2 in grads[op2].items():
                    key = (op1, k, d1, op2, l, d2)
                    if key not in dot_cache:
                        dot_cache[key] = orientation_average(frame, vdot(frame, v1, v2))
                    form.add(ch, (k, d1, l, d2), dot_cache[key] * Fraction(coeff))

    for k, pk in enumerate(prefactors):
        for l, pl in enumerate(prefactors):
            ov = orientation_average(frame, pk * pl)
            form.add(OVERLAP, (k, None, l, None), ov)
            if potential is not None:
                form.add(COULOMB, (k, None, l, None), ov * potential)
    assert all(d in derivs for tab in form.entries.values() for key in tab for d in (key[1], key[3]))
    return form


def substitute_functions(form: QuadForm, coeffs: list[list[Poly]]) -> QuadForm:
    """Re-express a form in new unknowns: ``f_i = sum_k coeffs[i][k] * g_k``.

    Coefficients may depend on the internal coordinates; the product rule is
    applied to every derivative.
    """
    frame = form.frame
    nnew = len(coeffs[0])
    # d_u f_i -> {(k, d): Poly}
    expand: dict[tuple[int, str | None], dict[tuple[int, str | None], Poly]] = {}
    for i, row in enumerate(coeffs):
        expand[(i, None)] = {(k, None): c for k, c in enumerate(row) if not c.is_zero()}
        for q in frame.internal:
            e: dict[tuple[int, str | None], Poly] = {}
            for k, c in enumerate(row):
                dc = c.diff(q)
                if not dc.is_zero():
                    e[(k, None)] = e[(k, None)] + dc if (k, None) in e else dc
                if not c.is_zero():
                    e[(k, q)] = c
            expand[(i, q)] = e
    out = QuadForm(frame, nnew)
    for ch, tab in form.entries.items():
        for (i, u, j, v), w in tab.items():
            for (k, du), a in expand[(i, u)].items():
                for (l, dv), b in expand[(j, v)].items():
                    out.add(ch, (k, du, l, dv), w * a * b)
    return out


def drop_channel(form: QuadForm, channel: str) -> QuadForm:
    out = QuadForm(form.frame, form.nfun)
    for ch, tab in form.entries.items():
        if ch == channel:
            continue
        for key, w in tab.items():
            out.add(ch, key, w)
    return out


def kinetic_ab() -> dict[str, dict[tuple[str, str], Fraction]]:
    """Kinetic coefficients in electron-nucleus gradients ``grad_a``, ``grad_b``.

    With nucleus 1 at ``-R/2`` and ``a = r + R/2``, ``b = r - R/2``:
    ``grad_r = grad_a + grad_b`` and ``grad_R = (grad_a - grad_b)/2``.
    """
    h, q = Fraction(1, 2), Fraction(1, 4)
    return {
        ELECTRON: {("a", "a"): h, ("b", "b"): h, ("a", "b"): h, ("b", "a"): h},
        MU12: {("a", "a"): q, ("b", "b"): q},
        MU0: {("a", "a"): q, ("b", "b"): -q},
    }


def kinetic_rR() -> dict[str, dict[tuple[str, str], Fraction]]:
    """Kinetic coefficients in centred Jacobi gradients ``grad_r``, ``grad_R``."""
    return {
        ELECTRON: {("r", "r"): Fraction(1, 2)},
        MU12: {("r", "r"): Fraction(1, 8), ("R", "R"): Fraction(1, 2)},
        MU0: {("r", "R"): Fraction(1, 4), ("R", "r"): Fraction(1, 4)},
    }


def hylleraas_frame() -> Frame:
    """Internal coordinates ``(r1, r2, R)`` with electron-nucleus vectors ``a``, ``b``."""
    vars = ("r1", "r2", "R", "aZ", "bZ")
    P = lambda c: Poly.const(vars, c)  # noqa: E731
    V = lambda n, k=1: Poly.var(vars, n, k)  # noqa: E731
    r1, r2, R = V("r1"), V("r2"), V("R")
    gram = {
        ("a", "a"): r1 * r1,
        ("b", "b"): r2 * r2,
        ("a", "b"): (r1 * r1 + r2 * r2 - R * R) / 2,
    }
    inv_R = V("R", -1)
    grad = {
        "a": {
            "aZ": {"e": P(1)},
            "r1": {"a": V("r1", -1)},
            "R": {"a": inv_R, "b": -inv_R},
        },
        "b": {
            "bZ": {"e": P(1)},
            "r2": {"b": V("r2", -1)},
            "R": {"b": inv_R, "a": -inv_R},
        },
    }
    # gradients that vanish still need an (empty) rule
    grad["a"].update({"bZ": {}, "r2": {}})
    grad["b"].update({"aZ": {}, "r1": {}})
    return Frame(
        name="hylleraas",
        vars=vars,
        internal=("r1", "r2", "R"),
        zcomp={"aZ": "a", "bZ": "b"},
        gram=gram,
        grad=grad,
        measure=r1 * r2 * R,
    )


def body_frame() -> Frame:
    """Internal coordinates ``(R, rho, zeta)``: ``zeta = r . Rhat``, ``rho = |r - zeta Rhat|``.

    Body axes are ``Rh`` (internuclear), ``ph`` (towards the electron,
    perpendicular to ``Rh``) and ``nh = Rh x ph``.
    """
    vars = ("R", "rho", "zeta", "RZ", "pZ", "nZ")
    P = lambda c: Poly.const(vars, c)  # noqa: E731
    V = lambda n, k=1: Poly.var(vars, n, k)  # noqa: E731
    one, zero = P(1), P(0)
    gram = {
        ("Rh", "Rh"): one, ("ph", "ph"): one, ("nh", "nh"): one,
        ("Rh", "ph"): zero, ("Rh", "nh"): zero, ("ph", "nh"): zero,
    }
    iR, irho = V("R", -1), V("rho", -1)
    grad = {
        "r": {
            "R": {},
            "zeta": {"Rh": one},
            "rho": {"ph": one},
            "RZ": {},
            "pZ": {"nh": V("nZ") * irho},
        },
        "R": {
            "R": {"Rh": one},
            "zeta": {"ph": V("rho") * iR},
            "rho": {"ph": -V("zeta") * iR},
            "RZ": {"e": iR, "Rh": -V("RZ") * iR},
            "pZ": {"ph": -V("RZ") * iR, "nh": -V("zeta") * V("nZ") * iR * irho},
        },
    }
    return Frame(
        name="body",
        vars=vars,
        internal=("R", "rho", "zeta"),
        zcomp={"RZ": "Rh", "pZ": "ph", "nZ": "nh"},
        gram=gram,
        grad=grad,
        measure=V("R", 2) * V("rho"),
    )
