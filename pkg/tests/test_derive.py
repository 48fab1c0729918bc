from fractions import Fraction

import pytest

from perimetric.algebra import forms as F
from perimetric.algebra.derive import (
    DerivationError,
    ExchangeSector,
    InvalidSectorError,
    Parity,
    UnsupportedSymmetryError,
    angular_reduce,
    centrifugal_terms,
    check_route_equivalence,
    coulomb_potential,
    derive,
    dumps,
    factorize,
    homonuclear_prefactors,
    load_or_derive,
    loads,
    pole_orders,
    project_exchange,
    sector_for,
)
from perimetric.algebra.poly import Poly


@pytest.fixture(scope="module")
def factorized():
    return {J: factorize(angular_reduce(J)) for J in (0, 1, 2)}


def test_poly_arithmetic_exact():
    x, y = Poly.var(("x", "y"), "x"), Poly.var(("x", "y"), "y")
    p = (x + y) * (x - y)
    assert p == x * x - y * y
    assert p.diff("x") == 2 * x
    assert dict((p / 3).monomials())[(2, 0)] == Fraction(1, 3)
    assert p.coefficient("x", 2) == Poly.const(("x", "y"), 1)
    assert p.evaluate({"x": 3, "y": 1}) == 8


@pytest.mark.parametrize("J,parity", [(3, None), (-1, None), (1, Parity.EVEN), (2, "odd")])
def test_unsupported_symmetry(J, parity):
    with pytest.raises(UnsupportedSymmetryError):
        angular_reduce(J, parity)


def test_centrifugal_poles_before_factorization():
    assert not centrifugal_terms(angular_reduce(0).form)
    for J in (1, 2):
        assert centrifugal_terms(angular_reduce(J).form), f"J={J} should carry 1/R^2 terms"


@pytest.mark.parametrize("J", [1, 2])
def test_centrifugal_poles_cancel(factorized, J):
    body = factorized[J].body
    assert not centrifugal_terms(body)
    assert all(d >= 0 for d in pole_orders(body, "R").values())
    assert all(d >= 0 for d in pole_orders(body, "rho").values())


@pytest.mark.parametrize("J", [0, 1, 2])
def test_routes_agree(factorized, J):
    gap = check_route_equivalence(factorized[J].body, factorized[J].form, npoints=4, seed=J)
    assert gap < 1e-11


def test_route_mismatch_detected(factorized):
    body = factorized[1].body
    doubled = F.QuadForm(body.frame, body.nfun,
                         {ch: {k: w * 2 for k, w in tab.items()} for ch, tab in body.entries.items()})
    with pytest.raises(DerivationError):
        check_route_equivalence(doubled, factorized[1].form)


@pytest.mark.parametrize("J", [1, 2])
def test_exchange_projection_matches_direct_prefactors(factorized, J):
    sector = sector_for(J, True)
    proj = project_exchange(factorized[J], sector)
    direct = F.build_form(F.hylleraas_frame(), homonuclear_prefactors(J), F.kinetic_ab(), coulomb_potential())
    direct = F.drop_channel(direct, F.MU0)
    for ch in (F.ELECTRON, F.MU12, F.COULOMB, F.OVERLAP):
        a = proj.form.entries.get(ch, {})
        b = direct.entries.get(ch, {})
        keys = set(a) | set(b)
        for k in keys:
            pa, pb = a.get(k), b.get(k)
            za = pa is None or pa.is_zero()
            zb = pb is None or pb.is_zero()
            assert za == zb and (za or pa == pb), (ch, k)


def test_wrong_homonuclear_sector_rejected(factorized):
    with pytest.raises(InvalidSectorError):
        project_exchange(factorized[1], ExchangeSector.SINGLET)
    with pytest.raises(InvalidSectorError):
        project_exchange(factorized[2], ExchangeSector.TRIPLET)


@pytest.mark.parametrize("J,sector", [(0, "none"), (1, "none"), (2, "none"), (0, "singlet"), (1, "triplet"),
                                      (2, "singlet")])
def test_effective_hamiltonian_structure(J, sector):
    eh = load_or_derive(J, sector)
    assert eh.nblocks == J + 1
    assert eh.is_transpose_closed()
    per, tot = eh.envelope()
    assert per <= 2 * J + 2 and tot <= 2 * J + 3
    for t in eh.terms:
        for d in t.derivs:
            if d is not None:
                assert t.coeff.min_degree(d) >= 1
    homonuclear = sector != "none"
    assert any(t.channel == F.MU0 for t in eh.terms) == (not homonuclear and J >= 0)


def test_serialization_roundtrip():
    eh = load_or_derive(1, "none")
    text = dumps(eh)
    back = loads(text)
    assert dumps(back) == text
    assert {(t.block, t.channel, t.derivs): t.coeff for t in back.terms} == \
        {(t.block, t.channel, t.derivs): t.coeff for t in eh.terms}


def test_serialization_errors():
    with pytest.raises(ValueError):
        loads("garbage\n")
    text = dumps(load_or_derive(0, "singlet"))
    bad = text + "term 0 0 overlap - - 1 1\n"
    with pytest.raises(ValueError, match="line"):
        loads(bad)


def test_cache_reuse(tmp_path, monkeypatch):
    from perimetric.algebra import derive as D

    monkeypatch.setattr(D, "_MEMO", {})
    a = load_or_derive(0, "none", cache_dir=tmp_path)
    files = list(tmp_path.iterdir())
    assert len(files) == 1
    monkeypatch.setattr(D, "_MEMO", {})
    b = load_or_derive(0, "none", cache_dir=tmp_path)
    assert dumps(a) == dumps(b)


def test_derive_is_deterministic():
    assert dumps(derive(0, "singlet")) == dumps(derive(0, "singlet"))
