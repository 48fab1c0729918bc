import math

import pytest

from perimetric.algebra.derive import load_or_derive, sector_for
from perimetric.assembly import assemble
from perimetric.eigensolver import SolveRequest, solve
from perimetric.sensitivity import (
    InsufficientConvergenceError,
    Method,
    Parameter,
    SensitivityRequest,
    both_methods,
    limit_sensitivity,
    masses_from_parameters,
    parameter_values,
    parameters_for,
    predict_energy_at,
    relative_gap,
    sensitivity,
)
from perimetric.sturmian import ScaleParams
from perimetric.systems import MassRatios, MP_OVER_ME, MD_OVER_ME, SystemSpec, reduced_masses


def _solve(species, N=24, Nx=6, a=1.8, b=12.0, count=2):
    spec = SystemSpec.for_species(species)
    ham = load_or_derive(0, sector_for(0, spec.homonuclear))
    pair = assemble(ham, N, Nx, ScaleParams(a, b), reduced_masses(spec))
    return spec, pair, solve(pair, SolveRequest(count=count), keep_vectors=True)


def test_parameters_per_species():
    assert parameters_for("h2+") == [Parameter.LAMBDA_E_P]
    assert parameters_for("d2+") == [Parameter.LAMBDA_E_D]
    assert parameters_for("hd+") == [Parameter.LAMBDA_E_P, Parameter.MU_P_D]


def test_mu_for_homonuclear_is_type_error():
    spec, pair, lv = _solve("h2+", 12, 3)
    with pytest.raises(TypeError):
        sensitivity(pair, lv[0], spec, SensitivityRequest(Parameter.MU_P_D))
    with pytest.raises(TypeError):
        sensitivity(pair, lv[0], spec, SensitivityRequest(Parameter.LAMBDA_E_D))


@pytest.mark.parametrize("species", ["h2+", "d2+", "hd+"])
def test_parameter_roundtrip(species):
    spec = SystemSpec.for_species(species)
    m = masses_from_parameters(species, parameter_values(spec))
    ref = reduced_masses(spec)
    assert m.mu12 == pytest.approx(ref.mu12, rel=1e-14)
    assert m.inv_mu0 == pytest.approx(ref.inv_mu0, rel=1e-12, abs=1e-300)


def test_limit_formula():
    from perimetric.systems import dissociation_limit

    lam = 1 / MP_OVER_ME
    h = 1e-4 * lam
    fd = (dissociation_limit(1 / (lam + h)) - dissociation_limit(1 / (lam - h))) / (2 * h)
    assert limit_sensitivity(lam) == pytest.approx(1e2 * lam * fd, rel=1e-8)
    assert limit_sensitivity(lam) == pytest.approx(0.02720121453, rel=1e-9)


@pytest.mark.parametrize("species", ["h2+", "hd+"])
def test_hellmann_feynman_matches_finite_difference(species):
    spec, pair, lv = _solve(species)
    for p in parameters_for(species):
        r = both_methods(pair, lv[0], spec, p)
        assert r.gap <= 1e-4 * abs(r.value)
        if p is not Parameter.MU_P_D:
            assert r.value > 0


def test_refuses_unconverged_level():
    spec, pair, lv = _solve("h2+", 12, 3)
    lv[0].converged_digits = 5
    with pytest.raises(InsufficientConvergenceError, match="required"):
        sensitivity(pair, lv[0], spec, SensitivityRequest(Parameter.LAMBDA_E_P))


def test_requires_vectors():
    spec = SystemSpec.for_species("h2+")
    pair = assemble(load_or_derive(0, "singlet"), 10, 3, ScaleParams(1.8, 12.0), reduced_masses(spec))
    lv = solve(pair, SolveRequest(count=1))[0]
    with pytest.raises(ValueError):
        sensitivity(pair, lv, spec, SensitivityRequest(Parameter.LAMBDA_E_P, Method.HELLMANN_FEYNMAN))


def test_prediction_zero_change():
    spec = SystemSpec.for_species("h2+")
    assert predict_energy_at(spec, spec, -0.597, {Parameter.LAMBDA_E_P: 0.284657}) == -0.597


def test_prediction_codata_shift():
    ref = SystemSpec.for_species("h2+")
    new = SystemSpec.for_species("h2+", MassRatios(MP_OVER_ME / (1 + 4.6e-10), MD_OVER_ME))
    dE = predict_energy_at(new, ref, 0.0, {Parameter.LAMBDA_E_P: 0.284657})
    assert dE == pytest.approx(1e-2 * 0.284657 * 4.6e-10, rel=1e-6)


def test_prediction_warns_outside_linear_regime(caplog):
    ref = SystemSpec.for_species("h2+")
    new = SystemSpec.for_species("h2+", MassRatios(MP_OVER_ME * (1 + 1e-6), MD_OVER_ME))
    with caplog.at_level("WARNING"):
        predict_energy_at(new, ref, 0.0, {Parameter.LAMBDA_E_P: 0.28})
    assert "linear regime" in caplog.text


def test_prediction_matches_resolve():
    spec, pair, lv = _solve("h2+")
    s = sensitivity(pair, lv[0], spec, SensitivityRequest(Parameter.LAMBDA_E_P)).value
    rel = 1e-9
    new = SystemSpec.for_species("h2+", MassRatios(MP_OVER_ME / (1 + rel), MD_OVER_ME))
    pred = predict_energy_at(new, spec, lv[0].energy, {Parameter.LAMBDA_E_P: s})
    from perimetric.eigensolver import shift_refine

    direct = shift_refine(pair, lv[0], masses=reduced_masses(new)).energy
    base = shift_refine(pair, lv[0]).energy
    assert abs((pred - lv[0].energy) - (direct - base)) <= 1e-14


def test_relative_gap():
    assert relative_gap(1.0, 1.0) == 0.0
    assert math.isclose(relative_gap(1.0, 1.1), 0.1 / 1.1)
