"""Normalized mass-ratio sensitivities ``10^2 p dE/dp`` of converged levels.

Parameters: ``lambda = m_e/M_P`` (H2+, HD+), ``lambda = m_e/M_D`` (D2+) and
``mu = M_P/M_D`` (HD+).  In these variables

    H2+, D2+:  1/mu12 = 2 lambda,         1/mu0 = 0
    HD+:       1/mu12 = lambda (1 + mu),  1/mu0 = lambda (1 - mu)

(nucleus 1 = proton).  Only the kinetic channels depend on the masses, so the
Hellmann-Feynman derivative is a combination of channel expectation values.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace
from enum import Enum


from .assembly import BandedPair
from .eigensolver import LevelResult, SolveRequest, shift_refine
from .systems import ReducedMasses, Species, SystemSpec

log = logging.getLogger(__name__)

LINEAR_REGIME = 1e-8


class Parameter(str, Enum):
    LAMBDA_E_P = "lambda_e_over_p"
    LAMBDA_E_D = "lambda_e_over_d"
    MU_P_D = "mu_p_over_d"


class Method(str, Enum):
    HELLMANN_FEYNMAN = "hellmann_feynman"
    CENTRAL_FD = "central_fd"


class InsufficientConvergenceError(ValueError):
    pass


def parameters_for(species: Species | str) -> list[Parameter]:
    sp = Species.parse(species)
    if sp is Species.H2PLUS:
        return [Parameter.LAMBDA_E_P]
    if sp is Species.D2PLUS:
        return [Parameter.LAMBDA_E_D]
    return [Parameter.LAMBDA_E_P, Parameter.MU_P_D]


def _check(species: Species, param: Parameter) -> None:
    if param not in parameters_for(species):
        raise TypeError(f"parameter {param.value} does not apply to {species.label}")


def parameter_values(spec: SystemSpec) -> dict[Parameter, float]:
    if spec.species is Species.H2PLUS:
        return {Parameter.LAMBDA_E_P: 1.0 / spec.m1_over_me}
    if spec.species is Species.D2PLUS:
        return {Parameter.LAMBDA_E_D: 1.0 / spec.m1_over_me}
    return {Parameter.LAMBDA_E_P: 1.0 / spec.m1_over_me, Parameter.MU_P_D: spec.m1_over_me / spec.m2_over_me}


def masses_from_parameters(species: Species | str, values: dict[Parameter, float]) -> ReducedMasses:
    sp = Species.parse(species)
    if sp is Species.HDPLUS:
        lam, mu = values[Parameter.LAMBDA_E_P], values[Parameter.MU_P_D]
        return ReducedMasses(1.0 / (lam * (1 + mu)), lam * (1 - mu))
    lam = values[parameters_for(sp)[0]]
    return ReducedMasses(1.0 / (2 * lam), 0.0)


def channel_derivatives(species: Species, param: Parameter, values: dict[Parameter, float]) -> tuple[float, float]:
    """``(d(1/mu12)/dp, d(1/mu0)/dp)``."""
    if species is not Species.HDPLUS:
        return 2.0, 0.0
    lam, mu = values[Parameter.LAMBDA_E_P], values[Parameter.MU_P_D]
    if param is Parameter.LAMBDA_E_P:
        return 1.0 + mu, 1.0 - mu
    return lam, -lam


@dataclass(frozen=True)
class SensitivityRequest:
    parameter: Parameter
    method: Method = Method.HELLMANN_FEYNMAN
    h: float = 1e-6
    digits: int = 6

    def __post_init__(self):
        object.__setattr__(self, "parameter", Parameter(self.parameter))
        object.__setattr__(self, "method", Method(self.method))


@dataclass
class SensitivityResult:
    species: str
    J: int
    v: int
    parameter: Parameter
    method: Method
    value: float  # 10^2 p dE/dp, hartree
    gap: float = math.nan  # |HF - FD| or the Richardson correction


def _required_digits(value_scale: float, digits: int) -> int:
    """Energy decimals needed so the sensitivity keeps ``digits`` significant figures, plus two."""
    return int(math.ceil(digits - math.log10(max(abs(value_scale), 1e-300)))) + 2


def hellmann_feynman(pair: BandedPair, level: LevelResult, spec: SystemSpec, param: Parameter) -> float:
    """``10^2 p dE/dp`` from channel expectation values of the level's eigenvector."""
    _check(spec.species, param)
    if level.vector is None:
        raise ValueError("level was solved without keep_vectors=True")
    vals = parameter_values(spec)
    d12, d0 = channel_derivatives(spec.species, param, vals)
    ev = pair.channel_expectation(level.vector)
    dE = d12 * ev["nuclear"] + d0 * ev["symmetry_breaking"]
    return 1e2 * vals[param] * dE


def central_difference(pair: BandedPair, level: LevelResult, spec: SystemSpec, param: Parameter,
                       h: float = 1e-6, req: SolveRequest | None = None) -> tuple[float, float]:
    """Richardson-extrapolated central difference and the size of the extrapolation correction."""
    _check(spec.species, param)
    vals = parameter_values(spec)
    p0 = vals[param]

    def energy(rel: float) -> float:
        pv = dict(vals)
        pv[param] = p0 * (1 + rel)
        m = masses_from_parameters(spec.species, pv)
        return shift_refine(pair, level, req, masses=m).energy

    def deriv(step: float) -> float:
        return (energy(step) - energy(-step)) / (2 * step)  # = p dE/dp

    d1, d2 = deriv(h), deriv(h / 2)
    rich = (4 * d2 - d1) / 3
    return 1e2 * rich, 1e2 * abs(rich - d2)


def sensitivity(pair: BandedPair, level: LevelResult, spec: SystemSpec, req: SensitivityRequest,
                fd_request: SolveRequest | None = None) -> SensitivityResult:
    """Sensitivity of one level; refuses levels not converged well enough for ``req.digits``."""
    _check(spec.species, req.parameter)
    need = _required_digits(1e-2, req.digits)
    if level.converged_digits < need:
        raise InsufficientConvergenceError(
            f"level v={level.v} has ~{level.converged_digits} converged decimals; "
            f"{need} are required for {req.digits} sensitivity digits"
        )
    if req.method is Method.HELLMANN_FEYNMAN:
        value = hellmann_feynman(pair, level, spec, req.parameter)
        gap = math.nan
    else:
        value, gap = central_difference(pair, level, spec, req.parameter, req.h, fd_request)
    return SensitivityResult(spec.species.value, level.J, level.v, req.parameter, req.method, value, gap)


def both_methods(pair: BandedPair, level: LevelResult, spec: SystemSpec, param: Parameter,
                 h: float = 1e-6) -> SensitivityResult:
    hf = sensitivity(pair, level, spec, SensitivityRequest(param, Method.HELLMANN_FEYNMAN))
    fd = sensitivity(pair, level, spec, SensitivityRequest(param, Method.CENTRAL_FD, h))
    return replace(hf, gap=abs(hf.value - fd.value))


def predict_energy_at(spec_new: SystemSpec, spec_ref: SystemSpec, energy: float,
                      sensitivities: dict[Parameter, float]) -> float:
    """First-order energy at new masses from ``10^2 p dE/dp`` values at the reference masses."""
    ref = parameter_values(spec_ref)
    new = parameter_values(spec_new)
    E = energy
    for p, s in sensitivities.items():
        rel = new[p] / ref[p] - 1.0
        if abs(rel) > LINEAR_REGIME:
            log.warning("relative change %.2e of %s is outside the linear regime", rel, p.value)
        E += 1e-2 * s * rel
    return E


def limit_sensitivity(lam: float) -> float:
    """``10^2 lambda dE/dlambda`` of the atomic limit ``E = -1/2 (1 + lambda)^-1``."""
    return 1e2 * lam / (2 * (1 + lam) ** 2)


def relative_gap(a: float, b: float) -> float:
    return abs(a - b) / max(abs(a), abs(b), 1e-300)
