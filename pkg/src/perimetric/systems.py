"""Physical constants, mass configurations and limit values for H2+, D2+ and HD+."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

MP_OVER_ME = 1836.15267261
MD_OVER_ME = 3670.4829652
HARTREE_IN_CM1 = 219474.6313705


class Species(str, Enum):
    H2PLUS = "h2+"
    D2PLUS = "d2+"
    HDPLUS = "hd+"

    @classmethod
    def parse(cls, s: "Species | str") -> "Species":
        if isinstance(s, Species):
            return s
        key = s.strip().lower().replace("_", "").replace("plus", "+")
        try:
            return cls(key)
        except ValueError:
            raise ValueError(f"unknown species {s!r} (expected h2+, d2+ or hd+)") from None

    @property
    def label(self) -> str:
        return {"h2+": "H2+", "d2+": "D2+", "hd+": "HD+"}[self.value]


@dataclass(frozen=True)
class MassRatios:
    mp_over_me: float = MP_OVER_ME
    md_over_me: float = MD_OVER_ME
    source_label: str = "CODATA 2002"

    def __post_init__(self):
        for name in ("mp_over_me", "md_over_me"):
            if not getattr(self, name) > 1:
                raise ValueError(f"{name} must be > 1, got {getattr(self, name)}")


@dataclass(frozen=True)
class SystemSpec:
    """Nuclear masses (units of m_e) of one ion; nucleus 1 is the lighter one for HD+."""

    species: Species
    m1_over_me: float
    m2_over_me: float
    homonuclear: bool

    def __post_init__(self):
        if self.homonuclear != (self.m1_over_me == self.m2_over_me):
            raise ValueError("homonuclear flag inconsistent with the masses")
        if min(self.m1_over_me, self.m2_over_me) <= 0:
            raise ValueError("masses must be positive")

    @classmethod
    def for_species(cls, species: Species | str, masses: MassRatios | None = None) -> "SystemSpec":
        sp = Species.parse(species)
        m = masses or MassRatios()
        if sp is Species.H2PLUS:
            return cls(sp, m.mp_over_me, m.mp_over_me, True)
        if sp is Species.D2PLUS:
            return cls(sp, m.md_over_me, m.md_over_me, True)
        return cls(sp, m.mp_over_me, m.md_over_me, False)


@dataclass(frozen=True)
class ReducedMasses:
    mu12: float
    inv_mu0: float

    @property
    def inv_mu12(self) -> float:
        return 1.0 / self.mu12


@dataclass(frozen=True)
class UnitTable:
    hartree_in_cm1: float = field(default=HARTREE_IN_CM1, init=False)


def reduced_masses(spec: SystemSpec) -> ReducedMasses:
    m1, m2 = spec.m1_over_me, spec.m2_over_me
    inv_mu0 = 0.0 if spec.homonuclear else 1.0 / m1 - 1.0 / m2
    return ReducedMasses(m1 * m2 / (m1 + m2), inv_mu0)


def dissociation_limit(nucleus_mass_over_me: float) -> float:
    """Ground-state energy of the hydrogen-like atom with the given nucleus, ``-1/2 (1 + m_e/M)^-1``."""
    if not nucleus_mass_over_me > 0:
        raise ValueError(f"nucleus mass must be positive, got {nucleus_mass_over_me}")
    return -0.5 / (1.0 + 1.0 / nucleus_mass_over_me)


def species_limit(spec: SystemSpec) -> float:
    """Lowest dissociation threshold (the heavier nucleus keeps the electron)."""
    return dissociation_limit(max(spec.m1_over_me, spec.m2_over_me))


def to_wavenumbers(e: float) -> float:
    return e * HARTREE_IN_CM1


def constants_table(masses: MassRatios | None = None) -> dict[str, float]:
    m = masses or MassRatios()
    return {
        "mp_over_me": m.mp_over_me,
        "md_over_me": m.md_over_me,
        "hartree_in_cm1": HARTREE_IN_CM1,
        "limit_h2+": dissociation_limit(m.mp_over_me),
        "limit_d2+": dissociation_limit(m.md_over_me),
    }
