"""Bundled reference levels and comparison of computed results against them."""

from __future__ import annotations

import csv
import hashlib
import io
import math
from dataclasses import dataclass
from enum import Enum
from importlib import resources
from pathlib import Path

COLUMNS = ["species", "J", "v", "energy_au", "source", "sens_lambda", "sens_mu", "flag"]
REFERENCE_SHA256 = "4b04ce5962c9831968f54aa22cde9ddefe4d13a9d187a242c19fcc1eb94728e5"


class Flag(str, Enum):
    OK = "ok"
    MOSS = "moss"  # value quoted from an earlier calculation
    NOBOUND = "nobound"  # no bound level exists
    BLANK = "blank"  # energy given, sensitivity not resolved


class ReferenceFormatError(ValueError):
    pass


@dataclass(frozen=True)
class ReferenceEntry:
    species: str
    J: int
    v: int
    energy_text: str
    source: str
    sens_lambda_text: str
    sens_mu_text: str
    flag: Flag

    @property
    def energy(self) -> float | None:
        return float(self.energy_text) if self.energy_text else None

    @property
    def decimals(self) -> int:
        """Printed decimal places of the energy."""
        if not self.energy_text or "." not in self.energy_text:
            return 0
        return len(self.energy_text.split(".")[1])

    @property
    def sens_lambda(self) -> float | None:
        return float(self.sens_lambda_text) if self.sens_lambda_text else None

    @property
    def sens_mu(self) -> float | None:
        return float(self.sens_mu_text) if self.sens_mu_text else None

    @property
    def key(self) -> tuple[str, int, int]:
        return (self.species, self.J, self.v)

    def row(self) -> list[str]:
        return [self.species, str(self.J), str(self.v), self.energy_text, self.source,
                self.sens_lambda_text, self.sens_mu_text, self.flag.value]


def bundled_path() -> Path:
    return Path(str(resources.files("perimetric") / "data" / "reference.csv"))


def checksum(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _parse(text: str, origin: str) -> list[ReferenceEntry]:
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header != COLUMNS:
        raise ReferenceFormatError(f"{origin}: header must be {','.join(COLUMNS)}")
    out = []
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != len(COLUMNS):
            raise ReferenceFormatError(f"{origin}: row {lineno}: expected {len(COLUMNS)} fields, got {len(row)}")
        sp, J, v, e, src, sl, sm, flag = row
        try:
            entry = ReferenceEntry(sp, int(J), int(v), e, src, sl, sm, Flag(flag))
            for t in (e, sl, sm):
                if t:
                    float(t)
        except ValueError as exc:
            raise ReferenceFormatError(f"{origin}: row {lineno}: {exc}") from None
        if (entry.flag is Flag.NOBOUND) != (not e):
            raise ReferenceFormatError(f"{origin}: row {lineno}: energy must be empty exactly for nobound cells")
        out.append(entry)
    return out


def ingest_reference(path: str | Path | None = None, verify: bool = True) -> list[ReferenceEntry]:
    """Load a reference CSV (the bundled one by default, checksum-verified)."""
    p = Path(path) if path is not None else bundled_path()
    if path is None and verify and checksum(p) != REFERENCE_SHA256:
        raise ReferenceFormatError(f"{p}: checksum mismatch, bundled reference data was modified")
    return _parse(p.read_text(), str(p))


def write_reference(entries: list[ReferenceEntry], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(COLUMNS)
        for e in entries:
            w.writerow(e.row())


def reference_map(entries: list[ReferenceEntry]) -> dict[tuple[str, int, int], ReferenceEntry]:
    return {e.key: e for e in entries}


def precision_counts(entries: list[ReferenceEntry], min_decimals: int = 12) -> dict[str, int]:
    """Cells per species printed with at least ``min_decimals`` decimals (excluding quoted values)."""
    out: dict[str, int] = {}
    for e in entries:
        if e.flag in (Flag.OK, Flag.BLANK) and e.decimals >= min_decimals:
            out[e.species] = out.get(e.species, 0) + 1
    return out


# ---------------------------------------------------------------------------
# comparison


@dataclass(frozen=True)
class ComputedLevel:
    species: str
    J: int
    v: int
    energy: float


@dataclass(frozen=True)
class Deviation:
    species: str
    J: int
    v: int
    computed: float
    reference: float | None
    delta: float
    matched_digits: int
    tolerance: float
    status: str  # pass | fail | uncovered | nobound-violation


def matched_decimals(delta: float, cap: int) -> int:
    if delta == 0:
        return cap
    return max(0, min(cap, int(math.floor(-math.log10(abs(delta))))))


def compare(results: list[ComputedLevel], reference: list[ReferenceEntry], tol: float = 1e-10) -> list[Deviation]:
    """Per-level deviation report.  The tolerance is widened to the printed precision of each cell."""
    ref = reference_map(reference)
    out = []
    for r in results:
        e = ref.get((r.species, r.J, r.v))
        if e is None:
            out.append(Deviation(r.species, r.J, r.v, r.energy, None, math.nan, 0, tol, "uncovered"))
            continue
        if e.flag is Flag.NOBOUND:
            out.append(Deviation(r.species, r.J, r.v, r.energy, None, math.nan, 0, tol, "nobound-violation"))
            continue
        t = max(tol, 10.0 ** -e.decimals)
        d = r.energy - e.energy
        status = "pass" if abs(d) <= t else "fail"
        out.append(Deviation(r.species, r.J, r.v, r.energy, e.energy, d, matched_decimals(d, e.decimals), t, status))
    return out


def read_results(path: str | Path) -> list[ComputedLevel]:
    """Levels from a results CSV (``#`` provenance lines are skipped)."""
    lines = [ln for ln in Path(path).read_text().splitlines() if ln and not ln.startswith("#")]
    reader = csv.DictReader(lines)
    out = []
    for lineno, row in enumerate(reader, start=2):
        try:
            out.append(ComputedLevel(row["species"], int(row["J"]), int(row["v"]), float(row["energy_au"])))
        except (KeyError, ValueError, TypeError) as exc:
            raise ReferenceFormatError(f"{path}: row {lineno}: {exc}") from None
    return out
