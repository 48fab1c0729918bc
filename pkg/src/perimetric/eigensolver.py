"""Shift-invert Lanczos for the banded symmetric-definite problem ``A x = E B x``.

The iteration runs on ``OP = (A - sigma B)^-1 B``, which is self-adjoint in the
B inner product; its eigenvalues ``theta = 1 / (E - sigma)`` separate the
levels nearest ``sigma``.  ``A - sigma B`` is factored once: banded Cholesky
when ``sigma`` lies below the spectrum, banded LU otherwise.  Lanczos vectors
are kept B-orthonormal by full reorthogonalization.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np
from scipy import linalg
from scipy.linalg import lapack

from .assembly import BandedMatrix, BandedPair
from .systems import ReducedMasses

log = logging.getLogger(__name__)

DEFAULT_WINDOW_SHIFT = -0.6
STALL_CHECKS = 3  # residual checks without halving before giving up


class Mode(str, Enum):
    WINDOW = "window"
    SHIFTED = "shifted"


class FactorizationError(RuntimeError):
    """``A - sigma B`` is (numerically) singular; retry with a perturbed shift."""

    def __init__(self, sigma: float, msg: str):
        super().__init__(f"{msg} at shift {sigma!r}; retry with a slightly perturbed shift")
        self.sigma = sigma


@dataclass(frozen=True)
class SolveRequest:
    """``window``: the ``count`` lowest levels above ``shift`` (a lower bound of the spectrum).

    ``shifted``: the ``count`` levels nearest ``shift``.
    """

    mode: Mode = Mode.WINDOW
    shift: float = DEFAULT_WINDOW_SHIFT
    count: int = 1
    max_iterations: int = 400
    tol: float = 1e-10
    reorth_passes: int = 2
    seed: int = 12345

    def __post_init__(self):
        object.__setattr__(self, "mode", Mode(self.mode))
        if not self.tol > 0:
            raise ValueError("tolerance must be positive")
        if self.count < 1:
            raise ValueError("count must be >= 1")


@dataclass
class LevelResult:
    v: int
    J: int
    sector: str
    energy: float
    residual: float
    iterations: int
    converged: bool
    converged_digits: int
    vector: np.ndarray | None = field(default=None, repr=False)
    shift: float = math.nan


class ShiftedOperator:
    """Factorization of ``K = A - sigma B`` (upper band data, consumed) with ``solve(b) = K^-1 b``."""

    def __init__(self, K: np.ndarray, sigma: float, definite: bool | None = None):
        self.sigma = sigma
        w = K.shape[0] - 1
        self.definite = False
        if definite is not False:
            try:
                self._chol = linalg.cholesky_banded(K, lower=False, overwrite_ab=definite is True,
                                                    check_finite=False)
                self.definite = True
                return
            except linalg.LinAlgError:
                if definite:
                    raise FactorizationError(sigma, "A - sigma B is not positive definite") from None
        full = np.zeros((3 * w + 1, K.shape[1]), order="F")
        full[w:2 * w + 1] = K
        del K
        self._factor_lu(full, w)

    def _factor_lu(self, full: np.ndarray, w: int) -> None:
        """Banded LU of the general band array whose rows ``w..2w`` hold the upper band."""
        n = full.shape[1]
        for k in range(1, w + 1):
            full[2 * w + k, : n - k] = full[2 * w - k, k:]
        lu, piv, info = lapack.dgbtrf(full, w, w, overwrite_ab=1)
        if info != 0:
            raise FactorizationError(self.sigma, f"banded LU breakdown (info={info})")
        self._lu, self._piv, self._w = lu, piv, w

    @classmethod
    def for_pair(cls, pair: BandedPair, sigma: float, masses: ReducedMasses | None = None,
                 definite: bool | None = None, scaling: np.ndarray | None = None) -> "ShiftedOperator":
        """Factor ``A - sigma B`` (or ``D (A - sigma B) D`` with ``D = diag(scaling)``)."""
        if definite is False:
            # assemble straight into the LU work array: no separate copy of K
            w = pair.width
            full = np.zeros((3 * w + 1, pair.n), order="F")  # LAPACK layout, avoids a copy
            band = full[w:2 * w + 1]
            pair.combined(masses, sigma, out=band)
            if scaling is not None:
                scale_band(band, scaling)
            op = cls.__new__(cls)
            op.sigma, op.definite = sigma, False
            op._factor_lu(full, w)
            return op
        K = pair.combined(masses, sigma)
        if scaling is not None:
            scale_band(K, scaling)
        return cls(K, sigma, definite)

    def solve(self, b: np.ndarray) -> np.ndarray:
        if self.definite:
            return linalg.cho_solve_banded((self._chol, False), b, check_finite=False)
        x, info = lapack.dgbtrs(self._lu, self._w, self._w, b, self._piv)
        if info != 0:
            raise FactorizationError(self.sigma, f"banded solve failed (info={info})")
        return x


def scale_band(data: np.ndarray, d: np.ndarray) -> np.ndarray:
    """In place ``M -> D M D`` on upper band data."""
    w = data.shape[0] - 1
    n = data.shape[1]
    for k in range(w + 1):
        data[w - k, k:] *= d[: n - k] * d[k:]
    return data


def equilibration(pair: BandedPair) -> np.ndarray:
    """``diag(B)^-1/2``: makes every basis function unit-B-norm.

    Overlap diagonals span many decades for J = 2 prefactors; factoring the
    equilibrated ``D (A - sigma B) D`` is markedly more accurate.
    """
    return 1.0 / np.sqrt(pair.B.diagonal())


class _ScaledOverlap:
    def __init__(self, B: BandedMatrix, d: np.ndarray):
        self._B, self._d = B, d
        self.n = B.n

    def matvec(self, x: np.ndarray) -> np.ndarray:
        return self._d * self._B.matvec(self._d * x)


def residual_norm(pair: BandedPair, x: np.ndarray, E: float, masses: ReducedMasses | None = None) -> float:
    """``||A x - E B x|| / ||x||_B``, computed from scratch."""
    Bx = pair.B.matvec(x)
    r = pair.A_matvec(x, masses) - E * Bx
    return float(np.linalg.norm(r) / math.sqrt(float(x @ Bx)))


def _lanczos(op: ShiftedOperator, B, req: SolveRequest, want: int, pick, resfn):
    """Return Ritz pairs (theta, vectors) for ``want`` values chosen by ``pick``.

    Stops once the Ritz estimates pass and ``resfn`` (true residuals of the
    candidate pairs) is below tolerance, or when those residuals stagnate.
    """
    n = B.n
    m_max = min(req.max_iterations, n)
    rng = np.random.default_rng(req.seed)
    v = rng.standard_normal(n)
    Bv = B.matvec(v)
    nv = math.sqrt(v @ Bv)
    V = np.zeros((n, m_max))
    BV = np.zeros((n, m_max))
    V[:, 0], BV[:, 0] = v / nv, Bv / nv
    alpha = np.zeros(m_max)
    beta = np.zeros(m_max)
    it = 0
    theta = S = None
    converged = False
    check_every = 5
    history: list[float] = []
    for j in range(m_max):
        it = j + 1
        w = op.solve(BV[:, j].copy())
        alpha[j] = w @ BV[:, j]
        w -= alpha[j] * V[:, j]
        if j:
            w -= beta[j - 1] * V[:, j - 1]
        for _ in range(req.reorth_passes):
            w -= V[:, : j + 1] @ (BV[:, : j + 1].T @ w)
        Bw = B.matvec(w)
        b = math.sqrt(max(float(w @ Bw), 0.0))
        beta[j] = b
        done = j + 1 == m_max or b < 1e-300
        if it >= want and (it % check_every == 0 or done):
            T = np.diag(alpha[: j + 1]) + np.diag(beta[:j], 1) + np.diag(beta[:j], -1)
            th, s = np.linalg.eigh(T)
            idx = pick(th)[:want]
            theta, S = th[idx], s[:, idx]
            # Ritz residual bound in E: |beta s_m| / theta^2
            est = np.abs(b * S[-1, :]) / np.maximum(theta ** 2, 1e-300)
            if np.all(est < 1e-3 * req.tol) or done:
                worst = float(np.max(resfn(_purify(op, B, V[:, : j + 1] @ S), theta)))
                history.append(worst)
                converged = worst <= req.tol
                stalled = len(history) > STALL_CHECKS and worst > 0.5 * min(history[:-STALL_CHECKS])
                if converged or done or stalled:
                    break
        if b < 1e-300:
            break
        V[:, j + 1], BV[:, j + 1] = w / b, Bw / b
    X = _purify(op, B, V[:, : S.shape[0]] @ S)
    return theta, X, it, converged


def _purify(op: ShiftedOperator, B, X: np.ndarray) -> np.ndarray:
    """One application of ``K^-1 B`` per Ritz vector.

    Lanczos in the B inner product cannot see components along near-null
    directions of B, yet A does; this step filters them out.
    """
    out = np.empty_like(X)
    for i in range(X.shape[1]):
        y = op.solve(B.matvec(X[:, i]))
        out[:, i] = y / math.sqrt(float(y @ B.matvec(y)))
    return out


def _digits(bound: float, E: float) -> int:
    if bound <= 0:
        return 16
    return max(0, min(16, int(math.floor(-math.log10(bound)))))


def solve(pair: BandedPair, req: SolveRequest, masses: ReducedMasses | None = None,
          keep_vectors: bool = False) -> list[LevelResult]:
    """Eigenpairs of the assembled problem with independently certified residuals.

    The iteration runs on the equilibrated problem; returned vectors and
    residuals refer to the assembled basis.
    """
    d = equilibration(pair)
    B = _ScaledOverlap(pair.B, d)
    want = min(req.count, pair.n)
    if req.mode is Mode.WINDOW:
        sigma = req.shift
        op = None
        for _ in range(8):
            try:
                op = ShiftedOperator.for_pair(pair, sigma, masses, definite=True, scaling=d)
                break
            except FactorizationError:
                sigma -= 0.1
        if op is None:
            raise FactorizationError(req.shift, "no positive-definite shift found below the spectrum")
        pick = lambda th: np.argsort(-th)  # noqa: E731  largest theta = lowest E
    else:
        sigma = req.shift
        op = ShiftedOperator.for_pair(pair, sigma, masses, definite=False, scaling=d)
        pick = lambda th: np.argsort(-np.abs(th))  # noqa: E731

    def resfn(X, theta):
        return [residual_norm(pair, d * X[:, i], sigma + 1.0 / theta[i], masses) for i in range(X.shape[1])]

    theta, X, iters, conv = _lanczos(op, B, req, want, pick, resfn)
    del op
    levels = []
    for i in range(len(theta)):
        x = d * X[:, i]
        x = x / math.sqrt(float(x @ pair.B.matvec(x)))
        E = sigma + 1.0 / theta[i]
        res = residual_norm(pair, x, E, masses)
        levels.append((E, res, x))
    levels.sort(key=lambda t: t[0])
    meta = pair.metadata
    out = []
    for v, (E, res, x) in enumerate(levels):
        out.append(LevelResult(
            v=v, J=meta.get("J", -1), sector=meta.get("sector", ""), energy=E, residual=res,
            iterations=iters, converged=conv and res <= req.tol, converged_digits=_digits(res, E),
            vector=x if keep_vectors else None, shift=sigma,
        ))
    return out


def shift_refine(pair: BandedPair, coarse: LevelResult, req: SolveRequest | None = None,
                 masses: ReducedMasses | None = None, offset: float = 0.0,
                 keep_vectors: bool = False) -> LevelResult:
    """Re-solve in shifted mode around ``coarse.energy + offset`` and keep the level nearest it."""
    base = req or SolveRequest()
    r = replace(base, mode=Mode.SHIFTED, shift=coarse.energy + offset, count=1)
    sigma = r.shift
    for attempt in range(3):
        try:
            lv = solve(pair, replace(r, shift=sigma), masses, keep_vectors=keep_vectors)[0]
            break
        except FactorizationError:
            sigma += 1e-9 * (attempt + 1)
    else:
        raise FactorizationError(r.shift, "refinement shift remained singular")
    return replace(lv, v=coarse.v)


def dense_eigenvalues(pair: BandedPair, count: int, masses: ReducedMasses | None = None) -> np.ndarray:
    """Lowest eigenvalues by dense generalized diagonalization (oracle for small problems)."""
    A = pair.A(masses).to_dense()
    B = pair.B.to_dense()
    return linalg.eigh(A, B, eigvals_only=True, subset_by_index=[0, min(count, pair.n) - 1])


# ---------------------------------------------------------------------------
# convergence study


@dataclass(frozen=True)
class ScanRow:
    N: int
    Nx: int
    alpha: float
    beta: float
    v: int
    energy: float
    residual: float


@dataclass
class ScanResult:
    rows: list[ScanRow]
    best: tuple[float, float]
    stable_digits: dict[int, int]  # v -> decimals unchanged between the two largest N at ``best``

    def energies(self, N: int, alpha: float, beta: float) -> list[float]:
        return [r.energy for r in self.rows if (r.N, r.alpha, r.beta) == (N, alpha, beta)]


def nx_for(N: int, ratio: float) -> int:
    return max(1, min(N, int(round(N * ratio))))


def convergence_scan(spec, J: int, N_list: list[int], grid: list[tuple[float, float]],
                     nx_ratio: float = 0.25, count: int = 5, tol: float = 1e-10,
                     progress=None) -> ScanResult:
    """Solve over ``N_list x grid``; pick ``(alpha, beta)`` minimizing the ground level at the largest N.

    ``stable_digits`` counts decimals that agree between the two largest N
    (at the selected scales), a practical convergence estimate per level.
    """
    from .algebra.derive import load_or_derive, sector_for
    from .assembly import assemble
    from .sturmian import ScaleParams
    from .systems import reduced_masses

    ham = load_or_derive(J, sector_for(J, spec.homonuclear))
    masses = reduced_masses(spec)
    rows = []
    for N in sorted(N_list):
        Nx = nx_for(N, nx_ratio)
        for a, b in grid:
            pair = assemble(ham, N, Nx, ScaleParams(a, b), masses)
            levels = solve(pair, SolveRequest(count=count, tol=tol))
            for lv in levels:
                rows.append(ScanRow(N, Nx, a, b, lv.v, lv.energy, lv.residual))
            if progress:
                progress(N, a, b, levels)
    Nmax = max(N_list)
    top = [r for r in rows if r.N == Nmax and r.v == 0]
    best_row = min(top, key=lambda r: r.energy)
    best = (best_row.alpha, best_row.beta)
    digits: dict[int, int] = {}
    Ns = sorted(N_list)
    if len(Ns) >= 2:
        last = {r.v: r.energy for r in rows if (r.N, r.alpha, r.beta) == (Ns[-1],) + best}
        prev = {r.v: r.energy for r in rows if (r.N, r.alpha, r.beta) == (Ns[-2],) + best}
        for v in sorted(set(last) & set(prev)):
            d = abs(last[v] - prev[v])
            digits[v] = 16 if d == 0 else max(0, min(16, int(math.floor(-math.log10(d)))))
    return ScanResult(rows, best, digits)
