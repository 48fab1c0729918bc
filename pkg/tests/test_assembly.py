import numpy as np
import pytest

from oracles import assembled_oracle
from perimetric.algebra.derive import load_or_derive, sector_for
from perimetric.assembly import (
    AssemblyError,
    ELEC,
    NUC,
    OVL,
    SB,
    BandedMatrix,
    assemble,
    coupling_offsets,
    dump_pair,
    envelope_ok,
    load_pair,
    make_layout,
    offset_counts,
    pair_digest,
)
from perimetric.sturmian import ScaleParams
from perimetric.systems import SystemSpec, reduced_masses

SECTORS = [(0, "none"), (1, "none"), (2, "none"), (0, "singlet"), (1, "triplet"), (2, "singlet")]


def _pair(J, sector, N, Nx, a=1.3, b=2.1):
    return assemble(load_or_derive(J, sector), N, Nx, ScaleParams(a, b))


@pytest.mark.parametrize("J,sector", SECTORS)
@pytest.mark.parametrize("N,Nx", [(2, 1), (3, 2)])
def test_matches_quadrature_oracle(J, sector, N, Nx):
    ham = load_or_derive(J, sector)
    pair = assemble(ham, N, Nx, ScaleParams(1.3, 2.1))
    ref = assembled_oracle(ham, pair.layout, 1.3, 2.1)
    got = {ELEC: pair.components[0], NUC: pair.components[1], SB: pair.components[2], OVL: pair.B}
    for slot, m in got.items():
        dense = m.to_dense() if m is not None else np.zeros_like(ref[slot])
        scale = max(np.abs(ref[slot]).max(), 1.0)
        assert np.abs(dense - ref[slot]).max() <= 1e-12 * scale, slot


@pytest.mark.parametrize("J,sector", SECTORS)
def test_overlap_positive_definite(J, sector):
    B = _pair(J, sector, 6, 3).B.to_dense()
    assert np.linalg.eigvalsh(B).min() > 0


@pytest.mark.parametrize("J,sector", SECTORS)
def test_envelope(J, sector):
    ham = load_or_derive(J, sector)
    offs = coupling_offsets(ham)
    assert envelope_ok(offs, J)
    pair = _pair(J, sector, 8, 4)
    gs = pair.layout.global_states()
    for m in [*pair.components, pair.B]:
        if m is None:
            continue
        M = m.to_dense()
        i, j = np.nonzero(M)
        if sector == "none":
            d = gs[i, :3] - gs[j, :3]
            r, l1 = {0: (2, 3), 1: (4, 5), 2: (6, 7)}[J]
            assert np.abs(d).max() <= r
            assert np.abs(d).sum(1).max() <= l1


def test_offset_counts_j0():
    c = offset_counts(load_or_derive(0, "none"))
    assert c["envelope"] == 57


@pytest.mark.parametrize("J", [0, 1, 2])
def test_offset_counts_bounded(J):
    c = offset_counts(load_or_derive(J, "none"))
    assert c["envelope"] <= {0: 57, 1: 450, 2: 1707}[J]


def test_reported_widths():
    w = {(J, s): _pair(J, s, 20, 5).width for J, s in SECTORS}
    # interleaved blocks cost little width beyond the scalar problem
    assert w[(1, "triplet")] <= 5 * w[(0, "singlet")]
    assert w[(2, "none")] <= 8 * w[(0, "none")]


def test_banded_matrix_roundtrip():
    rng = np.random.default_rng(0)
    M = rng.standard_normal((9, 9))
    M = M + M.T
    M[np.abs(np.subtract.outer(range(9), range(9))) > 2] = 0
    B = BandedMatrix.from_dense(M)
    assert B.width == 2
    assert np.array_equal(B.to_dense(), M)
    x = rng.standard_normal(9)
    assert np.allclose(B.matvec(x), M @ x, rtol=1e-14, atol=1e-14)


def test_mass_channels_combine():
    spec = SystemSpec.for_species("hd+")
    m = reduced_masses(spec)
    pair = assemble(load_or_derive(1, "none"), 6, 3, ScaleParams(1.5, 3.0), m)
    A = pair.A().to_dense()
    parts = [c.to_dense() for c in pair.components]
    assert np.allclose(A, parts[0] + parts[1] / m.mu12 + m.inv_mu0 * parts[2], rtol=1e-14, atol=1e-14)
    x = np.random.default_rng(1).standard_normal(pair.n)
    assert np.allclose(pair.A_matvec(x), A @ x, rtol=1e-12, atol=1e-12)


def test_homonuclear_has_no_symmetry_breaking_channel():
    spec = SystemSpec.for_species("h2+")
    pair = assemble(load_or_derive(1, sector_for(1, True)), 6, 3, ScaleParams(1.5, 3.0), reduced_masses(spec))
    assert pair.components[2] is None


def test_layout_covers_every_state_once():
    lay = make_layout(load_or_derive(2, "singlet"), 10, 3)
    pos = np.concatenate(lay.position)
    assert np.array_equal(np.sort(pos), np.arange(lay.size))


def test_dump_load_roundtrip(tmp_path):
    spec = SystemSpec.for_species("hd+")
    pair = assemble(load_or_derive(1, "none"), 5, 2, ScaleParams(1.5, 3.0), reduced_masses(spec))
    path = tmp_path / "pair.bin"
    dump_pair(pair, path)
    back = load_pair(path)
    assert pair_digest(back) == pair_digest(pair)
    assert back.metadata == pair.metadata
    assert np.array_equal(back.layout.global_states(), pair.layout.global_states())
    with pytest.raises(ValueError):
        (tmp_path / "junk").write_bytes(b"nothing")
        load_pair(tmp_path / "junk")


def test_collapsed_pair_matches_and_is_fixed():
    spec = SystemSpec.for_species("hd+")
    m = reduced_masses(spec)
    pair = assemble(load_or_derive(0, "none"), 6, 3, ScaleParams(1.8, 14.0), m)
    c = pair.collapsed()
    assert c.components[1] is None and c.collapsed() is c
    assert np.array_equal(c.A().data, pair.A().data)
    x = np.linspace(-1, 1, pair.n)
    assert np.allclose(c.A_matvec(x), pair.A_matvec(x), rtol=1e-15, atol=1e-12)
    other = reduced_masses(SystemSpec.for_species("h2+"))
    with pytest.raises(AssemblyError, match="collapsed"):
        c.A(other)
