"""Multi-environment trial data: ingestion, validation, and reshaping.

The central objects are :class:`TrialDataset` (validated replicated
observations) and :class:`TwoWayTable` (genotype x environment cell
means).  Environments are (location, year) pairs; datasets without a
year column get a single sentinel year level so both shapes flow through
one code path.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "MalformedCsvError",
    "NonNumericTraitError",
    "DuplicateCellError",
    "EmptyDatasetError",
    "InsufficientLevelsError",
    "IncompleteTableError",
    "TrialRecord",
    "TrialDataset",
    "Environment",
    "TwoWayTable",
    "ColumnSchema",
    "parse_csv",
    "serialize_csv",
    "two_way_means",
    "environment_index",
    "rep_group_index",
]

SENTINEL_YEAR = "_all_"


class MalformedCsvError(ValueError):
    """A CSV row has the wrong arity or a required column is missing."""


class NonNumericTraitError(ValueError):
    def __init__(self, row_index, value):
        super().__init__(f"row {row_index}: trait value {value!r} is not a finite number")
        self.row_index = row_index


class DuplicateCellError(ValueError):
    """The same (year, location, rep, genotype) tuple appears twice."""


class EmptyDatasetError(ValueError):
    """No data rows after the header."""


class InsufficientLevelsError(ValueError):
    """A factor has too few distinct levels for the requested analysis."""


class IncompleteTableError(ValueError):
    """A two-way table with empty cells was passed where completeness is required."""


@dataclass(frozen=True)
class TrialRecord:
    year: str
    location: str
    rep: str
    genotype: str
    trait: float


@dataclass(frozen=True)
class Environment:
    location: str
    year: str = SENTINEL_YEAR

    @property
    def label(self) -> str:
        if self.year == SENTINEL_YEAR:
            return self.location
        return f"{self.location}:{self.year}"


@dataclass(frozen=True)
class ColumnSchema:
    """Maps the caller's header names onto the required roles.

    ``year`` and ``rep`` may be None when the file has no such column.
    """

    genotype: str
    location: str
    trait: str
    year: str | None = None
    rep: str | None = None


@dataclass
class TrialDataset:
    records: tuple[TrialRecord, ...]
    trait_name: str
    genotypes: tuple[str, ...] = field(init=False)
    locations: tuple[str, ...] = field(init=False)
    years: tuple[str, ...] = field(init=False)
    reps: tuple[str, ...] = field(init=False)

    def __post_init__(self):
        if not self.records:
            raise EmptyDatasetError("dataset contains no records")
        seen = set()
        for r in self.records:
            for label in (r.year, r.location, r.rep, r.genotype):
                if not isinstance(label, str) or label == "":
                    raise MalformedCsvError("categorical labels must be non-empty strings")
            if not np.isfinite(r.trait):
                raise NonNumericTraitError("?", r.trait)
            key = (r.year, r.location, r.rep, r.genotype)
            if key in seen:
                raise DuplicateCellError(f"duplicate observation for {key}")
            seen.add(key)
        self.genotypes = _levels(r.genotype for r in self.records)
        self.locations = _levels(r.location for r in self.records)
        self.years = _levels(r.year for r in self.records)
        self.reps = _levels(r.rep for r in self.records)
        if self.n_genotypes < 2 or self.n_locations * self.n_years < 2:
            raise InsufficientLevelsError(
                "need at least 2 genotypes and 2 environments to define an interaction"
            )

    # Level counts in the G / L / Y / R sense.
    @property
    def n_genotypes(self):
        return len(self.genotypes)

    @property
    def n_locations(self):
        return len(self.locations)

    @property
    def n_years(self):
        return len(self.years)

    @property
    def n_reps(self):
        return len(self.reps)

    @property
    def has_years(self) -> bool:
        return not (self.n_years == 1 and self.years[0] == SENTINEL_YEAR)

    def environments(self, by: str = "location-year") -> tuple[Environment, ...]:
        """Observed environments, either (location, year) pairs or locations."""
        if by == "location":
            return tuple(Environment(loc) for loc in self.locations)
        seen = {}
        for r in self.records:
            seen.setdefault((r.location, r.year), None)
        return tuple(Environment(loc, yr) for loc, yr in seen)

    def is_balanced(self) -> bool:
        """Every (year, location, genotype) cell holds one record per rep level."""
        counts = {}
        for r in self.records:
            counts[(r.year, r.location, r.genotype)] = counts.get((r.year, r.location, r.genotype), 0) + 1
        expect = self.n_reps
        if len(counts) != self.n_years * self.n_locations * self.n_genotypes:
            return False
        return all(c == expect for c in counts.values())

    def trait_values(self) -> np.ndarray:
        return np.array([r.trait for r in self.records])


def _levels(values) -> tuple[str, ...]:
    out = []
    seen = set()
    for v in values:
        if v not in seen:
            seen.add(v)
            out.append(v)
    return tuple(out)


def parse_csv(data: bytes | str, schema: ColumnSchema, trait_name: str | None = None) -> TrialDataset:
    """Parse a UTF-8 CSV with a header row into a validated TrialDataset.

    Row order is preserved.  A missing year column yields the sentinel
    year level; a missing rep column numbers replicates within each
    (year, location, genotype) cell in file order.
    """
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    reader = csv.reader(io.StringIO(data))
    try:
        header = next(reader)
    except StopIteration:
        raise EmptyDatasetError("empty file") from None
    header = [h.strip() for h in header]
    pos = {}
    for role, col in (
        ("genotype", schema.genotype),
        ("location", schema.location),
        ("trait", schema.trait),
        ("year", schema.year),
        ("rep", schema.rep),
    ):
        if col is None:
            continue
        if col not in header:
            raise MalformedCsvError(f"column {col!r} (for {role}) not in header {header}")
        pos[role] = header.index(col)

    records = []
    auto_rep: dict[tuple, int] = {}
    for i, row in enumerate(reader, start=2):  # 1-based with header on line 1
        if not row or (len(row) == 1 and row[0].strip() == ""):
            continue
        if len(row) != len(header):
            raise MalformedCsvError(f"row {i}: expected {len(header)} fields, got {len(row)}")
        raw = row[pos["trait"]].strip()
        try:
            trait = float(raw)
        except ValueError:
            raise NonNumericTraitError(i, raw) from None
        if not np.isfinite(trait):
            raise NonNumericTraitError(i, raw)
        year = row[pos["year"]].strip() if "year" in pos else SENTINEL_YEAR
        loc = row[pos["location"]].strip()
        geno = row[pos["genotype"]].strip()
        if "rep" in pos:
            rep = row[pos["rep"]].strip()
        else:
            key = (year, loc, geno)
            auto_rep[key] = auto_rep.get(key, 0) + 1
            rep = str(auto_rep[key])
        records.append(TrialRecord(year=year, location=loc, rep=rep, genotype=geno, trait=trait))
    if not records:
        raise EmptyDatasetError("no data rows after the header")
    return TrialDataset(records=tuple(records), trait_name=trait_name or schema.trait)


def serialize_csv(ds: TrialDataset) -> str:
    """Inverse of parse_csv with the canonical YR,LC,RP,CLT,<trait> header."""
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["YR", "LC", "RP", "CLT", ds.trait_name])
    for r in ds.records:
        writer.writerow([r.year, r.location, r.rep, r.genotype, repr(r.trait)])
    return out.getvalue()


@dataclass
class TwoWayTable:
    """Genotype x environment matrix of cell means with marginals."""

    values: np.ndarray
    genotypes: tuple[str, ...]
    environments: tuple[Environment, ...]
    cell_counts: np.ndarray
    trait_name: str = "trait"

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        self.cell_counts = np.asarray(self.cell_counts, dtype=int)

    @property
    def n_genotypes(self):
        return len(self.genotypes)

    @property
    def n_environments(self):
        return len(self.environments)

    @property
    def complete(self) -> bool:
        return bool(np.all(self.cell_counts >= 1))

    @property
    def genotype_means(self) -> np.ndarray:
        return np.nanmean(self.values, axis=1)

    @property
    def environment_means(self) -> np.ndarray:
        return np.nanmean(self.values, axis=0)

    @property
    def grand_mean(self) -> float:
        """Count-weighted mean over all cells."""
        mask = self.cell_counts > 0
        return float(np.sum(self.values[mask] * self.cell_counts[mask]) / self.cell_counts[mask].sum())

    def interaction(self) -> np.ndarray:
        """Double-centered residual: values - row means - column means + grand."""
        v = self.values
        gm = v.mean()
        return v - v.mean(axis=1, keepdims=True) - v.mean(axis=0, keepdims=True) + gm

    def interaction_ss(self) -> float:
        d = self.interaction()
        return float((d * d).sum())

    def require_complete(self):
        if not self.complete:
            raise IncompleteTableError("table has empty genotype x environment cells")
        return self

    def env_labels(self) -> tuple[str, ...]:
        return tuple(e.label for e in self.environments)


def two_way_means(ds: TrialDataset, environments: str = "location-year") -> TwoWayTable:
    """Cell means over replicates (and nested years in "location" mode).

    ``environments="location-year"`` gives one column per observed
    (location, year) pair; ``"location"`` averages the nested years into
    one column per location.
    """
    envs = ds.environments(by=environments)
    env_pos = {}
    for idx, e in enumerate(envs):
        env_pos[e] = idx
    geno_pos = {g: i for i, g in enumerate(ds.genotypes)}
    G, E = len(geno_pos), len(envs)
    totals = np.zeros((G, E))
    counts = np.zeros((G, E), dtype=int)
    for r in ds.records:
        key = Environment(r.location) if environments == "location" else Environment(r.location, r.year)
        j = env_pos[key]
        i = geno_pos[r.genotype]
        totals[i, j] += r.trait
        counts[i, j] += 1
    with np.errstate(invalid="ignore"):
        values = np.where(counts > 0, totals / np.maximum(counts, 1), np.nan)
    return TwoWayTable(
        values=values,
        genotypes=ds.genotypes,
        environments=envs,
        cell_counts=counts,
        trait_name=ds.trait_name,
    )


def environment_index(ds: TrialDataset) -> dict[Environment, float]:
    """Mean trait over all genotypes and reps, per (location, year) environment."""
    sums: dict[Environment, float] = {}
    counts: dict[Environment, int] = {}
    for r in ds.records:
        e = Environment(r.location, r.year)
        sums[e] = sums.get(e, 0.0) + r.trait
        counts[e] = counts.get(e, 0) + 1
    return {e: sums[e] / counts[e] for e in sums}


def rep_group_index(ds: TrialDataset) -> dict[tuple[str, str, str], float]:
    """Mean trait over genotypes per (year, location, rep) group.

    This is the replicate-level environment index the per-genotype
    regression uses as its continuous regressor.
    """
    sums: dict[tuple, float] = {}
    counts: dict[tuple, int] = {}
    for r in ds.records:
        key = (r.year, r.location, r.rep)
        sums[key] = sums.get(key, 0.0) + r.trait
        counts[key] = counts.get(key, 0) + 1
    return {k: sums[k] / counts[k] for k in sums}
