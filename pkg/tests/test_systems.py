import math

import pytest
from hypothesis import given, strategies as st

from perimetric.systems import (
    HARTREE_IN_CM1,
    MD_OVER_ME,
    MP_OVER_ME,
    MassRatios,
    Species,
    SystemSpec,
    UnitTable,
    constants_table,
    dissociation_limit,
    reduced_masses,
    species_limit,
    to_wavenumbers,
)


def test_default_mass_ratios_exact():
    m = MassRatios()
    assert m.mp_over_me == 1836.15267261
    assert m.md_over_me == 3670.4829652


@pytest.mark.parametrize("mp,md", [(1.0, 3670.0), (1836.0, 0.5), (-2.0, 3.0)])
def test_mass_ratios_must_exceed_one(mp, md):
    with pytest.raises(ValueError):
        MassRatios(mp, md)


def test_species_masses():
    h = SystemSpec.for_species("h2+")
    d = SystemSpec.for_species(Species.D2PLUS)
    hd = SystemSpec.for_species("HD+")
    assert (h.m1_over_me, h.m2_over_me, h.homonuclear) == (MP_OVER_ME, MP_OVER_ME, True)
    assert (d.m1_over_me, d.m2_over_me, d.homonuclear) == (MD_OVER_ME, MD_OVER_ME, True)
    assert (hd.m1_over_me, hd.m2_over_me, hd.homonuclear) == (MP_OVER_ME, MD_OVER_ME, False)


def test_inconsistent_homonuclear_flag():
    with pytest.raises(ValueError):
        SystemSpec(Species.HDPLUS, MP_OVER_ME, MD_OVER_ME, True)


def test_unknown_species():
    with pytest.raises(ValueError, match="unknown species"):
        Species.parse("he2+")


def test_reduced_masses_examples():
    h = reduced_masses(SystemSpec.for_species("h2+"))
    assert h.mu12 == pytest.approx(918.076336305, rel=1e-15)
    assert h.inv_mu0 == 0.0
    hd = reduced_masses(SystemSpec.for_species("hd+"))
    assert hd.inv_mu0 == 1 / MP_OVER_ME - 1 / MD_OVER_ME
    assert hd.inv_mu0 == pytest.approx(2.721733e-4, rel=1e-6)


@given(st.floats(1.5, 1e5), st.floats(1.5, 1e5))
def test_reduced_masses_swap_symmetry(m1, m2):
    a = reduced_masses(SystemSpec(Species.HDPLUS, m1, m2, m1 == m2))
    b = reduced_masses(SystemSpec(Species.HDPLUS, m2, m1, m1 == m2))
    assert a.mu12 == pytest.approx(b.mu12, rel=1e-15)
    assert a.inv_mu0 == pytest.approx(-b.inv_mu0, rel=1e-12, abs=1e-300)
    assert a.mu12 > 0


def test_dissociation_limits():
    assert dissociation_limit(MP_OVER_ME) == pytest.approx(-0.49972783971226, abs=5e-15)
    assert dissociation_limit(MD_OVER_ME) == pytest.approx(-0.49986381524721, abs=5e-15)
    assert dissociation_limit(1e300) == -0.5
    assert species_limit(SystemSpec.for_species("hd+")) == dissociation_limit(MD_OVER_ME)


@pytest.mark.parametrize("m", [0.0, -1.0, math.nan])
def test_dissociation_limit_domain(m):
    with pytest.raises(ValueError):
        dissociation_limit(m)


def test_wavenumbers():
    assert to_wavenumbers(1.0) == 219474.6313705
    assert to_wavenumbers(0.0) == 0.0
    assert to_wavenumbers(-0.5) == -109737.31568525
    assert UnitTable().hartree_in_cm1 == HARTREE_IN_CM1


def test_constants_table_keys():
    t = constants_table()
    assert t["hartree_in_cm1"] == HARTREE_IN_CM1
    assert t["limit_h2+"] == dissociation_limit(MP_OVER_ME)
