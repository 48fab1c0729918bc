"""Run configuration: flat ``key = value`` files plus command-line overrides."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, fields
from pathlib import Path

from .systems import MD_OVER_ME, MP_OVER_ME, Species

# Desk-scale truncations and scales per (species, J): (N, Nx, alpha, beta).
DESK_DEFAULTS: dict[tuple[Species, int], tuple[int, int, float, float]] = {
    (Species.H2PLUS, 0): (44, 11, 1.8, 12.0),
    (Species.H2PLUS, 1): (44, 11, 1.8, 12.0),
    (Species.H2PLUS, 2): (44, 7, 1.8, 12.0),
    (Species.D2PLUS, 0): (60, 15, 1.8, 16.0),
    (Species.D2PLUS, 1): (52, 12, 1.8, 16.0),
    (Species.D2PLUS, 2): (48, 8, 1.8, 16.0),
    (Species.HDPLUS, 0): (60, 15, 1.8, 14.0),
    (Species.HDPLUS, 1): (48, 12, 1.8, 14.0),
    (Species.HDPLUS, 2): (48, 6, 1.8, 14.0),
}


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    species: Species
    J: int
    N: int | None = None
    Nx: int | None = None
    alpha: float | None = None
    beta: float | None = None
    levels: int = 30
    shift: float | None = None
    refine: bool = False
    sensitivities: bool = False
    mp_over_me: float = MP_OVER_ME
    md_over_me: float = MD_OVER_ME
    seed: int = 12345
    tol: float = 1e-10
    out: str | None = None

    def __post_init__(self):
        self.species = Species.parse(self.species)
        if self.J not in (0, 1, 2):
            raise ConfigError(f"J: must be 0, 1 or 2, got {self.J}")
        N, Nx, a, b = DESK_DEFAULTS[(self.species, self.J)]
        self.N = N if self.N is None else self.N
        self.Nx = Nx if self.Nx is None else self.Nx
        self.alpha = a if self.alpha is None else self.alpha
        self.beta = b if self.beta is None else self.beta
        for name in ("N", "Nx", "levels"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name}: must be a positive integer, got {getattr(self, name)}")
        if self.Nx > self.N:
            raise ConfigError(f"Nx: {self.Nx} exceeds N={self.N}")
        for name in ("alpha", "beta", "mp_over_me", "md_over_me", "tol"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name}: must be positive, got {getattr(self, name)}")

    def digest(self) -> str:
        d = asdict(self)
        d["species"] = self.species.value
        d.pop("out")
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()[:16]


_TYPES = {f.name: f.type for f in fields(RunConfig)}
_ALIASES = {"system": "species", "nx": "Nx", "n": "N", "j": "J"}


def _convert(key: str, raw: str):
    t = _TYPES[key]
    raw = raw.strip()
    if key == "species":
        return Species.parse(raw)
    if "bool" in str(t):
        low = raw.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {raw!r}")
    if "int" in str(t):
        return int(raw)
    if "float" in str(t):
        return float(raw)
    return raw


def canonical_key(key: str) -> str:
    k = key.strip().replace("-", "_")
    k = _ALIASES.get(k.lower(), k)
    if k not in _TYPES:
        raise ConfigError(f"unknown key {key.strip()!r}")
    return k


def parse_config_text(text: str, origin: str = "<config>") -> dict:
    """``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{origin}:{lineno}: expected key = value, got {line!r}")
        key, value = line.split("=", 1)
        if not key.strip():
            raise ConfigError(f"{origin}:{lineno}: empty key")
        try:
            k = canonical_key(key)
        except ConfigError as exc:
            raise ConfigError(f"{origin}:{lineno}: {exc}") from None
        if not value.strip():
            raise ConfigError(f"{origin}:{lineno}: key {k!r} has no value")
        try:
            out[k] = _convert(k, value)
        except ValueError as exc:
            raise ConfigError(f"{origin}:{lineno}: key {k!r}: {exc}") from None
    return out


def load_config(path: str | Path | None = None, overrides: dict | None = None) -> RunConfig:
    values = parse_config_text(Path(path).read_text(), str(path)) if path else {}
    for k, v in (overrides or {}).items():
        if v is not None:
            values[canonical_key(k)] = v
    for required in ("species", "J"):
        if required not in values:
            raise ConfigError(f"missing required key {required!r}")
    try:
        return RunConfig(**values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None
