"""Truncated 3D Sturmian product basis and exact banded 1D matrix elements.

One-dimensional functions are ``phi_n(u) = (-1)^n sqrt(a) L_n(a u) exp(-a u / 2)``,
orthonormal on ``[0, inf)``.  Matrix elements of ``u^k``, ``u^k d/du`` and
``d/du u^k d/du`` are banded with half-bandwidth ``k``; they are generated from
integer three-term recurrences in exact rational arithmetic and converted to
floating point once.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from functools import lru_cache

import numpy as np

MAX_DEGREE = 8


class YZSymmetry(str, Enum):
    NONE = "none"
    SYMMETRIC = "symmetric"
    ANTISYMMETRIC = "antisymmetric"


class InvalidTruncationError(ValueError):
    pass


class InvalidStateError(ValueError):
    pass


class NonBandedError(ValueError):
    """A bare derivative (no compensating power of u) has a full, non-banded matrix."""


@dataclass(frozen=True)
class BasisTruncation:
    """``nx + ny + nz <= N`` and ``nx <= Nx``; sectors further restrict ``ny <= nz`` or ``ny < nz``."""

    N: int
    Nx: int
    yz_symmetry: YZSymmetry = YZSymmetry.NONE

    def __post_init__(self):
        object.__setattr__(self, "yz_symmetry", YZSymmetry(self.yz_symmetry))
        if self.N < 0 or self.Nx < 0:
            raise InvalidTruncationError("N and Nx must be nonnegative")
        if self.Nx > self.N:
            raise InvalidTruncationError(f"Nx={self.Nx} exceeds N={self.N}")


@dataclass(frozen=True)
class ScaleParams:
    """``alpha`` scales x; ``beta`` scales y and z."""

    alpha: float
    beta: float

    def __post_init__(self):
        if not (self.alpha > 0 and self.beta > 0):
            raise ValueError("scale parameters must be positive")


def _sector_ok(ny: int, nz: int, sym: YZSymmetry) -> bool:
    if sym is YZSymmetry.SYMMETRIC:
        return ny <= nz
    if sym is YZSymmetry.ANTISYMMETRIC:
        return ny < nz
    return True


def enumerate_basis(trunc: BasisTruncation) -> np.ndarray:
    """All admissible ``(nx, ny, nz)`` in lexicographic order, shape ``(n, 3)``."""
    out = [
        (nx, ny, nz)
        for nx in range(trunc.Nx + 1)
        for ny in range(trunc.N - nx + 1)
        for nz in range(trunc.N - nx - ny + 1)
        if _sector_ok(ny, nz, trunc.yz_symmetry)
    ]
    return np.array(out, dtype=np.int64).reshape(-1, 3)


def basis_size(trunc: BasisTruncation) -> int:
    """Closed-form count, independent of :func:`enumerate_basis`."""
    total = 0
    for nx in range(trunc.Nx + 1):
        for s in range(trunc.N - nx + 1):  # s = ny + nz
            if trunc.yz_symmetry is YZSymmetry.NONE:
                total += s + 1
            elif trunc.yz_symmetry is YZSymmetry.SYMMETRIC:
                total += s // 2 + 1
            else:
                total += (s + 1) // 2
    return total


def symmetrize(state: tuple[int, int, int], sector: YZSymmetry | str) -> list[tuple[float, tuple[int, int, int]]]:
    """Expansion of a sector state on plain product states as ``[(weight, (nx, ny, nz)), ...]``."""
    sector = YZSymmetry(sector)
    nx, ny, nz = state
    if sector is YZSymmetry.NONE:
        raise InvalidStateError("symmetrize needs a symmetric or antisymmetric sector")
    if ny > nz:
        raise InvalidStateError(f"sector states are labelled with ny <= nz, got {state}")
    if ny == nz:
        if sector is YZSymmetry.ANTISYMMETRIC:
            raise InvalidStateError(f"{state} vanishes under antisymmetrization")
        return [(1.0, (nx, ny, nz))]
    c = 1.0 / math.sqrt(2.0)
    sign = 1.0 if sector is YZSymmetry.SYMMETRIC else -1.0
    return [(c, (nx, ny, nz)), (sign * c, (nx, nz, ny))]


# ---------------------------------------------------------------------------
# 1D stencils


class OpTag(str, Enum):
    U = "u^k"          # <m| u^k |n>
    U_D = "u^k d"      # <m| u^k d/du |n>
    D_U = "d u^k"      # int phi_m' u^k phi_n
    D_U_D = "d u^k d"  # int phi_m' u^k phi_n'


# sparse exact matrices: dict row -> dict col -> Fraction (alpha = 1, no sign)


def _x_matrix(n: int):
    """Multiplication by u on L_n exp(-u/2): u psi_n = -(n+1) psi_{n+1} + (2n+1) psi_n - n psi_{n-1}."""
    rows = {i: {} for i in range(n)}
    for i in range(n):
        rows[i][i] = Fraction(2 * i + 1)
        if i + 1 < n:
            rows[i][i + 1] = Fraction(-(i + 1))
            rows[i + 1][i] = Fraction(-(i + 1))
    return rows


def _d_matrix(n: int):
    """<psi_m| u d/du |psi_n>: -1/2 on the diagonal, -n/2 above, (n+1)/2 below."""
    rows = {i: {} for i in range(n)}
    for j in range(n):
        rows[j][j] = Fraction(-1, 2)
        if j >= 1:
            rows[j - 1][j] = Fraction(-j, 2)
        if j + 1 < n:
            rows[j + 1][j] = Fraction(j + 1, 2)
    return rows


def _identity(n: int):
    return {i: {i: Fraction(1)} for i in range(n)}


def _mul(a, b):
    out = {}
    for i, ra in a.items():
        acc: dict[int, Fraction] = {}
        for k, v in ra.items():
            for j, w in b.get(k, {}).items():
                acc[j] = acc.get(j, 0) + v * w
        out[i] = {j: v for j, v in acc.items() if v}
    return out


def _transpose(a):
    out = {i: {} for i in a}
    for i, r in a.items():
        for j, v in r.items():
            out.setdefault(j, {})[i] = v
    return out


def _power(x, k: int, n: int):
    out = _identity(n)
    for _ in range(k):
        out = _mul(out, x)
    return out


@lru_cache(maxsize=None)
def exact_table(tag: OpTag | str, k: int, nmax: int) -> tuple[tuple[Fraction, ...], ...]:
    """Exact ``(nmax+1) x (nmax+1)`` matrix for ``alpha = 1`` with the ``(-1)^n`` sign convention."""
    tag = OpTag(tag)
    if not 0 <= k <= MAX_DEGREE:
        raise ValueError(f"degree {k} outside 0..{MAX_DEGREE}")
    if tag is not OpTag.U and k == 0:
        raise NonBandedError(f"{tag.value} with k=0 is not banded")
    n = nmax + 1 + k + 2  # padding: products never see the truncation edge
    X, D = _x_matrix(n), _d_matrix(n)
    if tag is OpTag.U:
        M = _power(X, k, n)
    elif tag is OpTag.U_D:
        M = _mul(_power(X, k - 1, n), D)
    elif tag is OpTag.D_U:
        M = _transpose(_mul(_power(X, k - 1, n), D))
    elif k == 1:
        M = {i: {j: (Fraction(2 * i + 1, 2) if i == j else 0) - v / 4 for j, v in r.items()} for i, r in X.items()}
    else:
        M = _mul(_mul(_transpose(D), _power(X, k - 2, n)), D)
    return tuple(
        tuple(Fraction((-1) ** (i + j) * M.get(i, {}).get(j, 0)) for j in range(nmax + 1))
        for i in range(nmax + 1)
    )


def scale_power(tag: OpTag | str, k: int) -> int:
    """Power of the scale parameter multiplying the ``alpha = 1`` table."""
    nder = {OpTag.U: 0, OpTag.U_D: 1, OpTag.D_U: 1, OpTag.D_U_D: 2}[OpTag(tag)]
    return nder - k


@dataclass(frozen=True)
class Stencil1D:
    tag: OpTag
    k: int
    half_bandwidth: int
    scale: float
    matrix: np.ndarray  # (nmax+1, nmax+1), already scaled

    def coefficient(self, n: int, dn: int) -> float:
        """``<n + dn| op |n>``."""
        m = n + dn
        if abs(dn) > self.half_bandwidth or m < 0 or m >= self.matrix.shape[0]:
            return 0.0
        return float(self.matrix[m, n])


@lru_cache(maxsize=None)
def _float_table(tag: OpTag, k: int, nmax: int) -> np.ndarray:
    t = np.array([[float(v) for v in row] for row in exact_table(tag, k, nmax)])
    t.setflags(write=False)
    return t


def stencil(tag: OpTag | str, k: int, scale: float = 1.0, nmax: int = 64) -> Stencil1D:
    """Matrix of a canonical 1D factor for functions ``phi_n(scale * u)``, ``n <= nmax``."""
    tag = OpTag(tag)
    base = _float_table(tag, k, nmax)
    p = scale_power(tag, k)
    mat = base if p == 0 else base * (float(scale) ** p)
    return Stencil1D(tag, k, k, float(scale), mat)


# ---------------------------------------------------------------------------
# pointwise evaluation (oracles, plotting)


def sturmian_values(nmax: int, u: np.ndarray, alpha: float = 1.0) -> tuple[np.ndarray, np.ndarray]:
    """Values and u-derivatives of ``phi_0..phi_nmax`` at points ``u``; shape ``(nmax+1, len(u))``.

    Uses the Laguerre recurrence with the exponential folded in, which is
    stable well past the point where ``exp(-u/2)`` alone underflows.
    """
    t = alpha * np.asarray(u, dtype=float)
    psi = np.zeros((nmax + 1,) + t.shape)
    dpsi = np.zeros_like(psi)
    e = np.exp(-t / 2)
    psi[0] = e
    dpsi[0] = -0.5 * e
    if nmax >= 1:
        psi[1] = (1 - t) * e
        dpsi[1] = (-1 - 0.5 * (1 - t)) * e
    for n in range(1, nmax):
        psi[n + 1] = ((2 * n + 1 - t) * psi[n] - n * psi[n - 1]) / (n + 1)
        # d/dt psi_{n+1} from the same recurrence
        dpsi[n + 1] = ((2 * n + 1 - t) * dpsi[n] - psi[n] - n * dpsi[n - 1]) / (n + 1)
    sign = np.where(np.arange(nmax + 1) % 2 == 0, 1.0, -1.0).reshape((-1,) + (1,) * t.ndim)
    return sign * math.sqrt(alpha) * psi, sign * alpha * math.sqrt(alpha) * dpsi
