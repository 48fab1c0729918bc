"""Banded matrices A (per mass channel) and B of the generalized eigenproblem ``A x = E B x``.

Storage is LAPACK upper band form: ``ab[w + i - j, j] = M[i, j]`` for
``max(0, j - w) <= i <= j``.  The hamiltonian is kept as three components
(electron kinetic + Coulomb, the ``1/mu12`` channel, the ``1/mu0`` channel)
combined with the reduced masses at solve time.
"""

from __future__ import annotations

import hashlib
import itertools
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numba
import numpy as np
from scipy.linalg import blas

from .algebra import forms as F
from .algebra.derive import PERIMETRIC, EffectiveHamiltonian
from .sturmian import BasisTruncation, OpTag, ScaleParams, YZSymmetry, enumerate_basis, stencil
from .systems import ReducedMasses

# component slots
ELEC, NUC, SB, OVL = range(4)
_SLOT = {F.ELECTRON: ELEC, F.COULOMB: ELEC, F.MU12: NUC, F.MU0: SB, F.OVERLAP: OVL}
COMPONENT_NAMES = ("electron", "nuclear", "symmetry_breaking", "overlap")


class AssemblyError(ValueError):
    pass


@dataclass
class BandedMatrix:
    """Symmetric matrix in upper band storage, ``data.shape == (width + 1, n)``."""

    data: np.ndarray

    @property
    def n(self) -> int:
        return self.data.shape[1]

    @property
    def width(self) -> int:
        return self.data.shape[0] - 1

    @classmethod
    def zeros(cls, n: int, width: int) -> "BandedMatrix":
        return cls(np.zeros((width + 1, n)))

    @classmethod
    def from_dense(cls, M: np.ndarray, width: int | None = None) -> "BandedMatrix":
        n = M.shape[0]
        if width is None:
            i, j = np.nonzero(M)
            width = int(np.abs(i - j).max()) if len(i) else 0
        ab = np.zeros((width + 1, n))
        for k in range(width + 1):
            ab[width - k, k:] = np.diagonal(M, k)
        return cls(ab)

    def to_dense(self) -> np.ndarray:
        n, w = self.n, self.width
        M = np.zeros((n, n))
        for k in range(w + 1):
            d = self.data[w - k, k:]
            M += np.diag(d, k)
            if k:
                M += np.diag(d, -k)
        return M

    def diagonal(self) -> np.ndarray:
        return self.data[self.width].copy()

    def matvec(self, x: np.ndarray) -> np.ndarray:
        return blas.dsbmv(self.width, 1.0, self.data, x, lower=0)

    def combine(self, other: "BandedMatrix", c: float) -> "BandedMatrix":
        """``self + c * other`` (same shape)."""
        return BandedMatrix(self.data + c * other.data)


@dataclass
class BasisLayout:
    """Unknown radial functions, their basis states and the global ordering."""

    names: list[str]
    symmetries: list[YZSymmetry]
    truncation: tuple[int, int]
    states: list[np.ndarray]
    position: list[np.ndarray]  # global index of each block state

    @property
    def size(self) -> int:
        return sum(len(s) for s in self.states)

    def global_states(self) -> np.ndarray:
        """``(n, 4)`` array of ``(nx, ny, nz, block)`` in global order."""
        out = np.empty((self.size, 4), dtype=np.int64)
        for b, (S, P) in enumerate(zip(self.states, self.position)):
            out[P, :3] = S
            out[P, 3] = b
        return out


def ordering_key(states: np.ndarray, block: np.ndarray, symmetric_sectors: bool) -> list[np.ndarray]:
    """Sort keys (most significant first) giving a narrow band.

    y<->z sector bases are ordered by ``nz`` then ``ny``; unsymmetrized bases by
    the diagonal ``ny - nz - nx`` then ``nx``.  Blocks are interleaved
    state by state.
    """
    nx, ny, nz = states.T
    if symmetric_sectors:
        return [nz, ny, nx, block]
    return [ny - nz - nx, nx, ny, block]


def choose_ordering(trunc_N: int, trunc_Nx: int, symmetries: list[YZSymmetry]) -> list[np.ndarray]:
    """Global position of every basis state of every block."""
    states = [enumerate_basis(BasisTruncation(trunc_N, trunc_Nx, s)) for s in symmetries]
    allst = np.concatenate(states)
    blk = np.concatenate([np.full(len(S), b) for b, S in enumerate(states)])
    sym = any(s is not YZSymmetry.NONE for s in symmetries)
    keys = ordering_key(allst, blk, sym)
    order = np.lexsort(keys[::-1])
    pos = np.empty(len(order), dtype=np.int64)
    pos[order] = np.arange(len(order))
    cuts = np.cumsum([0] + [len(S) for S in states])
    return [pos[cuts[b]:cuts[b + 1]] for b in range(len(states))]


def make_layout(ham: EffectiveHamiltonian, N: int, Nx: int) -> BasisLayout:
    syms = [YZSymmetry(s) for s in ham.yz_symmetry]
    states = [enumerate_basis(BasisTruncation(N, Nx, s)) for s in syms]
    return BasisLayout(list(ham.unknowns), syms, (N, Nx), states, choose_ordering(N, Nx, syms))


# ---------------------------------------------------------------------------
# compiled operator: tensor-product entries per block pair


def _factor_tag(coord: str, derivs) -> OpTag:
    bra, ket = derivs[0] == coord, derivs[1] == coord
    if bra and ket:
        return OpTag.D_U_D
    if bra:
        return OpTag.D_U
    if ket:
        return OpTag.U_D
    return OpTag.U


def compile_terms(ham: EffectiveHamiltonian) -> dict[tuple[int, int], dict[tuple, np.ndarray]]:
    """``{(k, l): {((tag_x, ex), (tag_y, ey), (tag_z, ez)): coeff[4]}}`` with float coefficients."""
    exact: dict = {}
    for t in ham.terms:
        slot = _SLOT[t.channel]
        for e, c in t.coeff.monomials():
            key = tuple((_factor_tag(v, t.derivs), e[i]) for i, v in enumerate(PERIMETRIC))
            for tag, k in key:
                if tag is not OpTag.U and k == 0:
                    raise AssemblyError(f"term {t.block} {t.channel} d{t.derivs} needs a bare derivative")
            exact.setdefault((t.block, key), [0] * 4)[slot] += c
    out: dict = {}
    for (blk, key), cs in exact.items():
        out.setdefault(blk, {})[key] = np.array([float(c) for c in cs])
    return out


def coupling_offsets(ham: EffectiveHamiltonian) -> set[tuple[int, int, int, tuple[int, int]]]:
    """Structurally nonzero plain-basis offsets ``(dx, dy, dz, block pair)``; ``d = bra - ket``."""
    out = set()
    for blk, tab in compile_terms(ham).items():
        for key, vec in tab.items():
            if not vec.any():
                continue
            boxes = [range(-k, k + 1) for _, k in key]
            for d in itertools.product(*boxes):
                out.add(d + (blk,))
    return out


def offset_counts(ham: EffectiveHamiltonian) -> dict[str, int]:
    """Offset counts under the two natural conventions."""
    offs = coupling_offsets(ham)
    return {
        "envelope": len({o[:3] for o in offs}),
        "per_block_pair": len(offs),
    }


def envelope_ok(offsets, J: int) -> bool:
    r, l1 = {0: (2, 3), 1: (4, 5), 2: (6, 7)}[J]
    return all(max(abs(a) for a in o[:3]) <= r and sum(abs(a) for a in o[:3]) <= l1 for o in offsets)


# ---------------------------------------------------------------------------
# assembly


@dataclass
class BandedPair:
    """Channel components of A, and B, over one layout."""

    components: list[BandedMatrix | None]  # [electron+coulomb, 1/mu12 channel, 1/mu0 channel or None]
    B: BandedMatrix
    layout: BasisLayout
    metadata: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.B.n

    @property
    def width(self) -> int:
        return self.B.width

    def masses(self) -> ReducedMasses:
        return ReducedMasses(**self.metadata["masses"])

    def weights(self, masses: ReducedMasses | None = None) -> list[float]:
        if self.metadata.get("collapsed"):
            if masses is not None and masses != self.masses():
                raise AssemblyError("collapsed pair is fixed to the masses it was built with")
            return [1.0, 0.0, 0.0]
        m = masses or self.masses()
        if m.inv_mu0 and self.components[SB] is None:
            raise AssemblyError("symmetry-breaking channel was not assembled for this pair")
        return [1.0, m.inv_mu12, m.inv_mu0]

    def combined(self, masses: ReducedMasses | None = None, shift: float = 0.0,
                 out: np.ndarray | None = None) -> np.ndarray:
        """Band data of ``A - shift * B``, in a fresh array or written into ``out``."""
        w = self.weights(masses)
        if out is None:
            out = self.components[ELEC].data.copy(order="F")
        else:
            out[...] = self.components[ELEC].data
        terms = [(c, comp.data) for c, comp in zip(w[1:], self.components[1:]) if c and comp is not None]
        if shift:
            terms.append((-shift, self.B.data))
        for c, data in terms:
            for i in range(out.shape[0]):  # row by row: no full-size temporaries
                out[i] += c * data[i]
        return out

    def collapsed(self) -> "BandedPair":
        """Copy with the mass channels summed into one A at the stored masses.

        Halves the memory of large problems; the result cannot be re-weighted,
        so derivatives with respect to the masses need the original pair.
        """
        if self.metadata.get("collapsed"):
            return self
        A = BandedMatrix(self.combined())
        return BandedPair([A, None, None], self.B, self.layout, {**self.metadata, "collapsed": True})

    def A(self, masses: ReducedMasses | None = None) -> BandedMatrix:
        return BandedMatrix(self.combined(masses))

    def A_matvec(self, x: np.ndarray, masses: ReducedMasses | None = None) -> np.ndarray:
        w = self.weights(masses)
        y = self.components[ELEC].matvec(x)
        for c, comp in zip(w[1:], self.components[1:]):
            if c and comp is not None:
                y += c * comp.matvec(x)
        return y

    def channel_expectation(self, x: np.ndarray) -> dict[str, float]:
        """``x^T M x / x^T B x`` for every assembled component."""
        norm = float(x @ self.B.matvec(x))
        out = {}
        for name, comp in zip(COMPONENT_NAMES[:3], self.components):
            out[name] = float(x @ comp.matvec(x)) / norm if comp is not None else 0.0
        return out


def _plain_pairs(layout: BasisLayout, bk: int, bl: int, offsets):
    """Yield ``(d, rows, cols, weight, p, q)`` for every plain product pair with ``p - q = d``.

    ``rows``/``cols`` are global indices of the (sector) basis states that contain
    the plain states ``p`` and ``q`` with the combined weight ``w_p w_q``.
    """
    N, Nx = layout.truncation
    sk, sl = layout.symmetries[bk], layout.symmetries[bl]
    S = layout.states[bl]
    lookup = -np.ones((N + 1,) * 3, dtype=np.int64)
    T = layout.states[bk]
    lookup[T[:, 0], T[:, 1], T[:, 2]] = np.arange(len(T))
    comps = [(S, np.ones(len(S)), np.arange(len(S)))]
    if sl is not YZSymmetry.NONE:
        diag = S[:, 1] == S[:, 2]
        w = np.where(diag, 1.0, 1 / np.sqrt(2.0))
        comps = [(S, w, np.arange(len(S)))]
        sgn = 1.0 if sl is YZSymmetry.SYMMETRIC else -1.0
        off = ~diag
        comps.append((S[off][:, [0, 2, 1]], sgn * w[off], np.nonzero(off)[0]))
    cols_all = layout.position[bl]
    for q, wq, idx in comps:
        for d in offsets:
            p = q + np.asarray(d)
            ok = (p >= 0).all(1) & (p[:, 0] <= Nx) & (p.sum(1) <= N)
            if not ok.any():
                continue
            p, qq, w, ii = p[ok], q[ok], wq[ok], idx[ok]
            if sk is YZSymmetry.NONE:
                r = lookup[p[:, 0], p[:, 1], p[:, 2]]
                wp = np.ones(len(p))
            else:
                lo, hi = np.minimum(p[:, 1], p[:, 2]), np.maximum(p[:, 1], p[:, 2])
                r = lookup[p[:, 0], lo, hi]
                same = p[:, 1] == p[:, 2]
                if sk is YZSymmetry.SYMMETRIC:
                    wp = np.where(same, 1.0, 1 / np.sqrt(2.0))
                else:
                    wp = np.where(p[:, 1] < p[:, 2], 1.0, -1.0) / np.sqrt(2.0)
                    r = np.where(same, -1, r)
            good = r >= 0
            if not good.any():
                continue
            yield (d, layout.position[bk][r[good]], cols_all[ii[good]], (wp * w)[good], p[good], qq[good])


@numba.njit(cache=True)
def _accumulate(o0, o1, o2, o3, width, rows, cols, w, p, q, entries, tabs, tabidx, coef):
    """Add the upper-triangle contributions of one offset to the four band arrays."""
    for i in range(rows.shape[0]):
        r, c = rows[i], cols[i]
        if r > c:
            continue
        v0 = v1 = v2 = v3 = 0.0
        for e in entries:
            f = (tabs[tabidx[e, 0], p[i, 0], q[i, 0]]
                 * tabs[tabidx[e, 1], p[i, 1], q[i, 1]]
                 * tabs[tabidx[e, 2], p[i, 2], q[i, 2]])
            v0 += coef[e, 0] * f
            v1 += coef[e, 1] * f
            v2 += coef[e, 2] * f
            v3 += coef[e, 3] * f
        k = width + r - c
        o0[k, c] += w[i] * v0
        o1[k, c] += w[i] * v1
        o2[k, c] += w[i] * v2
        o3[k, c] += w[i] * v3


def assemble(ham: EffectiveHamiltonian, N: int, Nx: int, scales: ScaleParams,
             masses: ReducedMasses | None = None, metadata: dict | None = None) -> BandedPair:
    """Assemble A-components and B for the truncated basis."""
    layout = make_layout(ham, N, Nx)
    compiled = compile_terms(ham)
    per_pair_offsets = {}
    width = 0
    for blk, tab in compiled.items():
        ds = set()
        for key, vec in tab.items():
            if vec.any():
                ds.update(itertools.product(*[range(-k, k + 1) for _, k in key]))
        per_pair_offsets[blk] = sorted(ds)
        for _, rows, cols, _, _, _ in _plain_pairs(layout, blk[0], blk[1], per_pair_offsets[blk]):
            width = max(width, int(np.abs(rows - cols).max()))
    n = layout.size
    has_sb = any(t.channel == F.MU0 for t in ham.terms)
    data = [np.zeros((width + 1, n)) for _ in range(4 if has_sb else 3)]
    if not has_sb:
        data.insert(SB, data[ELEC])  # receives exact zeros only

    tab_keys: dict = {}
    tab_list = []

    def tab_index(tag, k, axis):
        scale = scales.alpha if axis == 0 else scales.beta
        key = (tag, k, axis == 0)
        if key not in tab_keys:
            tab_keys[key] = len(tab_list)
            tab_list.append(stencil(tag, k, scale, nmax=N).matrix)
        return tab_keys[key]

    for blk, tab in compiled.items():
        entries = [(key, vec) for key, vec in tab.items() if vec.any()]
        if not entries:
            continue
        tabidx = np.array([[tab_index(*key[a], a) for a in range(3)] for key, _ in entries], dtype=np.int64)
        coef = np.array([vec for _, vec in entries])
        box = np.array([[key[a][1] for a in range(3)] for key, _ in entries])
        tabs = np.ascontiguousarray(np.stack(tab_list))
        for d, rows, cols, w, p, q in _plain_pairs(layout, blk[0], blk[1], per_pair_offsets[blk]):
            sel = np.nonzero((np.abs(np.asarray(d)) <= box).all(axis=1))[0]
            _accumulate(*data, width, rows, cols, w, p, q, sel, tabs, tabidx, coef)
    meta = {
        "J": ham.J,
        "sector": ham.sector.value,
        "N": N,
        "Nx": Nx,
        "alpha": scales.alpha,
        "beta": scales.beta,
        "blocks": [f"{a}:{s.value}" for a, s in zip(layout.names, layout.symmetries)],
    }
    if masses is not None:
        meta["masses"] = {"mu12": masses.mu12, "inv_mu0": masses.inv_mu0}
    meta.update(metadata or {})
    comps = [BandedMatrix(data[ELEC]), BandedMatrix(data[NUC]), BandedMatrix(data[SB]) if has_sb else None]
    return BandedPair(comps, BandedMatrix(data[OVL]), layout, meta)


# ---------------------------------------------------------------------------
# binary dump

_MAGIC = b"PERIBAND"


def dump_pair(pair: BandedPair, path: str | Path) -> None:
    """Header (JSON metadata), then band arrays as little-endian float64."""
    meta = dict(pair.metadata)
    meta["n"], meta["width"] = pair.n, pair.width
    meta["present"] = [m is not None for m in pair.components]
    meta["layout"] = {
        "names": pair.layout.names,
        "symmetries": [s.value for s in pair.layout.symmetries],
        "truncation": list(pair.layout.truncation),
    }
    head = json.dumps(meta, sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(_MAGIC + struct.pack("<Q", len(head)) + head)
        for m in [*pair.components, pair.B]:
            if m is not None:
                fh.write(np.ascontiguousarray(m.data, dtype="<f8").tobytes())


def load_pair(path: str | Path) -> BandedPair:
    raw = Path(path).read_bytes()
    if raw[:8] != _MAGIC:
        raise ValueError(f"{path}: not a banded-pair dump")
    (hl,) = struct.unpack("<Q", raw[8:16])
    meta = json.loads(raw[16:16 + hl])
    n, w = meta.pop("n"), meta.pop("width")
    lay = meta.pop("layout")
    present = meta.pop("present")
    arr = np.frombuffer(raw[16 + hl:], dtype="<f8").reshape(-1, w + 1, n)
    it = iter(arr)
    comps = [BandedMatrix(next(it).astype(np.float64)) if pr else None for pr in present]
    Bm = BandedMatrix(next(it).astype(np.float64))
    N, Nx = lay["truncation"]
    syms = [YZSymmetry(s) for s in lay["symmetries"]]
    states = [enumerate_basis(BasisTruncation(N, Nx, s)) for s in syms]
    layout = BasisLayout(lay["names"], syms, (N, Nx), states, choose_ordering(N, Nx, syms))
    return BandedPair(comps, Bm, layout, meta)


def pair_digest(pair: BandedPair) -> str:
    h = hashlib.sha256()
    for m in [*pair.components, pair.B]:
        if m is not None:
            h.update(np.ascontiguousarray(m.data).tobytes())
    return h.hexdigest()[:16]
