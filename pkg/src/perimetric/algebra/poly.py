"""Sparse multivariate Laurent polynomials with exact rational coefficients.

A :class:`Poly` lives in a fixed, named set of variables (its *ring*).  Exponents
may be negative, which is how the derivation carries factors such as ``1/R``
before the measure is multiplied in.  Only what the operator derivation needs is
implemented: ring arithmetic, partial derivatives, substitution of polynomials
for variables, and evaluation.
"""

from __future__ import annotations

from fractions import Fraction
from numbers import Rational
from typing import Iterable, Mapping


def _frac(c) -> Fraction:
    if isinstance(c, Fraction):
        return c
    if isinstance(c, (int, Rational)):
        return Fraction(c)
    raise TypeError(f"exact rational coefficient required, got {type(c).__name__}")


class Poly:
    """Laurent polynomial ``sum c * prod(var**e)`` over ``Fraction``."""

    __slots__ = ("vars", "terms")

    def __init__(self, vars: tuple[str, ...], terms: Mapping[tuple[int, ...], object] | None = None):
        self.vars = tuple(vars)
        clean: dict[tuple[int, ...], Fraction] = {}
        if terms:
            n = len(self.vars)
            for e, c in terms.items():
                if len(e) != n:
                    raise ValueError(f"exponent {e} does not match ring {self.vars}")
                c = _frac(c)
                if c:
                    clean[tuple(e)] = clean.get(tuple(e), Fraction(0)) + c
                    if not clean[tuple(e)]:
                        del clean[tuple(e)]
        self.terms = clean

    # construction ---------------------------------------------------------

    @classmethod
    def const(cls, vars, c) -> "Poly":
        return cls(vars, {(0,) * len(vars): c})

    @classmethod
    def var(cls, vars, name: str, power: int = 1) -> "Poly":
        e = [0] * len(vars)
        e[vars.index(name)] = power
        return cls(vars, {tuple(e): 1})

    @classmethod
    def zero(cls, vars) -> "Poly":
        return cls(vars)

    def _coerce(self, other) -> "Poly":
        if isinstance(other, Poly):
            if other.vars != self.vars:
                raise ValueError(f"ring mismatch {self.vars} vs {other.vars}")
            return other
        return Poly.const(self.vars, other)

    # arithmetic -----------------------------------------------------------

    def __add__(self, other):
        other = self._coerce(other)
        out = dict(self.terms)
        for e, c in other.terms.items():
            s = out.get(e, Fraction(0)) + c
            if s:
                out[e] = s
            else:
                out.pop(e, None)
        p = Poly(self.vars)
        p.terms = out
        return p

    __radd__ = __add__

    def __neg__(self):
        p = Poly(self.vars)
        p.terms = {e: -c for e, c in self.terms.items()}
        return p

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        if not isinstance(other, Poly):
            c = _frac(other)
            p = Poly(self.vars)
            if c:
                p.terms = {e: v * c for e, v in self.terms.items()}
            return p
        other = self._coerce(other)
        out: dict[tuple[int, ...], Fraction] = {}
        for e1, c1 in self.terms.items():
            for e2, c2 in other.terms.items():
                e = tuple(a + b for a, b in zip(e1, e2))
                out[e] = out.get(e, Fraction(0)) + c1 * c2
        p = Poly(self.vars)
        p.terms = {e: c for e, c in out.items() if c}
        return p

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Poly):
            raise TypeError("division by a polynomial is not supported")
        return self * (Fraction(1) / _frac(other))

    def __pow__(self, n: int):
        if n < 0:
            raise ValueError("negative powers of a polynomial are not supported")
        out = Poly.const(self.vars, 1)
        base = self
        while n:
            if n & 1:
                out = out * base
            base = base * base
            n >>= 1
        return out

    def __eq__(self, other):
        if isinstance(other, Poly):
            return self.vars == other.vars and self.terms == other.terms
        if isinstance(other, (int, Fraction)):
            return self == Poly.const(self.vars, other)
        return NotImplemented

    def __hash__(self):
        return hash((self.vars, frozenset(self.terms.items())))

    def __bool__(self):
        return bool(self.terms)

    def is_zero(self) -> bool:
        return not self.terms

    # calculus / structure -------------------------------------------------

    def diff(self, name: str) -> "Poly":
        i = self.vars.index(name)
        out = {}
        for e, c in self.terms.items():
            if e[i]:
                e2 = list(e)
                e2[i] -= 1
                out[tuple(e2)] = c * e[i]
        return Poly(self.vars, out)

    def degree(self, name: str) -> int:
        i = self.vars.index(name)
        return max((e[i] for e in self.terms), default=0)

    def min_degree(self, name: str) -> int:
        i = self.vars.index(name)
        return min((e[i] for e in self.terms), default=0)

    def total_degree(self) -> int:
        return max((sum(e) for e in self.terms), default=0)

    def depends_on(self, name: str) -> bool:
        i = self.vars.index(name)
        return any(e[i] for e in self.terms)

    def coefficient(self, name: str, power: int) -> "Poly":
        """Coefficient of ``name**power`` (a polynomial in the remaining variables, same ring)."""
        i = self.vars.index(name)
        out = {}
        for e, c in self.terms.items():
            if e[i] == power:
                e2 = list(e)
                e2[i] = 0
                out[tuple(e2)] = c
        return Poly(self.vars, out)

    def shift(self, name: str, power: int) -> "Poly":
        """Multiply by ``name**power``."""
        return self * Poly.var(self.vars, name, power)

    def subs(self, mapping: Mapping[str, "Poly"], target_vars: tuple[str, ...] | None = None) -> "Poly":
        """Substitute polynomials for variables.

        Variables absent from ``mapping`` must also exist in ``target_vars`` and
        are carried across unchanged.  Negative exponents are only allowed on
        carried variables.
        """
        tv = tuple(target_vars) if target_vars is not None else self.vars
        images = []
        for v in self.vars:
            if not self.depends_on(v):
                images.append((None, True))
            elif v in mapping:
                img = mapping[v]
                if img.vars != tv:
                    raise ValueError(f"image of {v} not in target ring")
                images.append((img, False))
            else:
                images.append((Poly.var(tv, v), True))
        out = Poly.zero(tv)
        cache: dict[tuple[int, int], Poly] = {}
        for e, c in self.terms.items():
            term = Poly.const(tv, c)
            for i, k in enumerate(e):
                if k == 0:
                    continue
                img, carried = images[i]
                if k < 0:
                    if not carried:
                        raise ValueError(f"cannot substitute into negative power of {self.vars[i]}")
                    term = term.shift(self.vars[i], k)
                    continue
                key = (i, k)
                if key not in cache:
                    cache[key] = img ** k
                term = term * cache[key]
            out = out + term
        return out

    def evaluate(self, values: Mapping[str, float]) -> float:
        xs = [values[v] for v in self.vars]
        total = 0.0
        for e, c in self.terms.items():
            t = float(c)
            for x, k in zip(xs, e):
                if k:
                    t *= x ** k
            total += t
        return total

    def monomials(self) -> Iterable[tuple[tuple[int, ...], Fraction]]:
        return sorted(self.terms.items())

    def __repr__(self):
        if not self.terms:
            return "0"
        parts = []
        for e, c in sorted(self.terms.items(), reverse=True):
            mono = "*".join(f"{v}^{k}" if k != 1 else v for v, k in zip(self.vars, e) if k)
            parts.append(f"{c}" + (f"*{mono}" if mono else ""))
        return " + ".join(parts)
