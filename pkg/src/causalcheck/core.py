"""Shared domain types: datasets, potential-outcome tables, posterior draws.

Everything here is immutable after construction (arrays are frozen), so the
types can be read freely from concurrent replication workers.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

__all__ = [
    "Dataset",
    "PairStructure",
    "PosteriorDraws",
    "PotentialOutcomeTable",
    "ValidationReport",
    "dataset_validate",
    "select_observed",
    "load_dataset_csv",
    "write_dataset_csv",
    "purpose_rng",
    "purpose_seedseq",
    "spawn_rngs",
]

# Reserved CSV column names; everything else is a covariate.
_RESERVED_COLUMNS = ("a", "y", "offset", "pair", "grade")


def _frozen(arr: np.ndarray) -> np.ndarray:
    out = np.asarray(arr)
    out = out.copy() if out.base is not None or out.flags.writeable else out
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class PairStructure:
    """Pair/grade grouping for paired designs (one row per class)."""

    pair_ids: np.ndarray
    grades: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "pair_ids", _frozen(np.asarray(self.pair_ids, dtype=int)))
        object.__setattr__(self, "grades", _frozen(np.asarray(self.grades, dtype=int)))
        if self.pair_ids.shape != self.grades.shape:
            raise ValueError("pair_ids and grades must have equal length")

    @property
    def n_pairs(self) -> int:
        return int(np.unique(self.pair_ids).size)


@dataclass(frozen=True)
class Dataset:
    """Observed study data: covariates, binary assignments, one outcome per unit.

    ``covariates`` is dense, one row per individual.  No intercept column is
    added here; model families declare whether they include one.  ``offsets``
    are exposure multipliers (e.g. trap-days) for count models and must be
    strictly positive when present.
    """

    covariates: np.ndarray
    assignments: np.ndarray
    observed_outcomes: np.ndarray
    offsets: np.ndarray | None = None
    pair_structure: PairStructure | None = None
    covariate_names: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        cov = np.atleast_2d(np.asarray(self.covariates, dtype=float))
        object.__setattr__(self, "covariates", _frozen(cov))
        object.__setattr__(self, "assignments", _frozen(np.asarray(self.assignments, dtype=int)))
        object.__setattr__(
            self, "observed_outcomes", _frozen(np.asarray(self.observed_outcomes, dtype=float))
        )
        if self.offsets is not None:
            object.__setattr__(self, "offsets", _frozen(np.asarray(self.offsets, dtype=float)))
        if not self.covariate_names:
            object.__setattr__(
                self, "covariate_names", tuple(f"x{j + 1}" for j in range(cov.shape[1]))
            )

    @property
    def n(self) -> int:
        return self.covariates.shape[0]

    @property
    def d(self) -> int:
        return self.covariates.shape[1]


@dataclass(frozen=True)
class PotentialOutcomeTable:
    """Both potential outcomes for every unit.

    Only the synthetic generator and posterior-predictive replication may
    build one; real observational ingestion never can (one arm is missing by
    construction).
    """

    y0: np.ndarray
    y1: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "y0", _frozen(np.asarray(self.y0, dtype=float)))
        object.__setattr__(self, "y1", _frozen(np.asarray(self.y1, dtype=float)))
        if self.y0.shape != self.y1.shape:
            raise ValueError("y0 and y1 must have equal length")

    @property
    def n(self) -> int:
        return self.y0.shape[0]


@dataclass(frozen=True)
class PosteriorDraws:
    """S draws of assignment parameters and S draws of outcome parameters.

    The two blocks come from separate, independent fits; the posterior
    factorizes under unconfoundedness, so neither fit sees the other's data
    side.  Variance/dispersion columns are stored on the natural (positive)
    scale.
    """

    phi_draws: np.ndarray | None
    theta_draws: np.ndarray | None
    draw_count: int
    chain_metadata: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        for name in ("phi_draws", "theta_draws"):
            block = getattr(self, name)
            if block is None:
                continue
            block = np.atleast_2d(np.asarray(block, dtype=float))
            if block.shape[0] != self.draw_count:
                raise ValueError(f"{name} must have exactly draw_count={self.draw_count} rows")
            object.__setattr__(self, name, _frozen(block))


@dataclass(frozen=True)
class ValidationReport:
    ok: bool
    issues: tuple[str, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "issues", tuple(self.issues))
        object.__setattr__(self, "ok", len(self.issues) == 0)


def dataset_validate(data: Dataset) -> ValidationReport:
    """Check shapes, finiteness, binary assignments, overlap, and offsets.

    Always returns a report; callers decide whether to abort.  An empty arm is
    reported (it makes inverse-probability reweighting degenerate) but is not
    a construction error, so degenerate oracle studies can still be simulated.
    """
    issues: list[str] = []
    n = data.n
    if data.covariates.ndim != 2:
        issues.append("covariates must be a 2-d matrix")
    if data.assignments.shape[0] != n:
        issues.append(f"assignments length {data.assignments.shape[0]} != n={n}")
    if data.observed_outcomes.shape[0] != n:
        issues.append(f"observed_outcomes length {data.observed_outcomes.shape[0]} != n={n}")

    bad_a = ~np.isin(data.assignments, (0, 1))
    for i in np.nonzero(bad_a)[0]:
        issues.append(f"assignment at row {i} is {data.assignments[i]}, not in {{0,1}}")
    if not bad_a.any() and data.assignments.shape[0] == n and n > 0:
        if data.assignments.sum() == n:
            issues.append("control arm empty: every unit assigned to treatment")
        elif data.assignments.sum() == 0:
            issues.append("treatment arm empty: every unit assigned to control")

    for i in np.nonzero(~np.isfinite(data.observed_outcomes))[0]:
        issues.append(f"non-finite observed outcome at row {i}")
    bad_cov = ~np.isfinite(data.covariates)
    if bad_cov.any():
        rows = np.unique(np.nonzero(bad_cov)[0])
        for i in rows[:10]:
            issues.append(f"non-finite covariate at row {i}")
    if data.d > 0 and n > 1:
        spans = data.covariates.max(axis=0) - data.covariates.min(axis=0)
        for j in np.nonzero(spans == 0)[0]:
            issues.append(f"constant covariate column {j} ({data.covariate_names[j]})")

    if data.offsets is not None:
        if data.offsets.shape[0] != n:
            issues.append(f"offsets length {data.offsets.shape[0]} != n={n}")
        for i in np.nonzero(~(data.offsets > 0))[0]:
            issues.append(f"non-positive offset at row {i}")

    if data.pair_structure is not None and data.pair_structure.pair_ids.shape[0] != n:
        issues.append("pair structure length != n")

    return ValidationReport(ok=not issues, issues=tuple(issues))


def select_observed(table: PotentialOutcomeTable, assignments: Sequence[int]) -> np.ndarray:
    """Return y with y_i = y_i(1) if a_i = 1 else y_i(0)."""
    a = np.asarray(assignments)
    if a.shape[0] != table.n:
        raise ValueError(f"assignments length {a.shape[0]} != table length {table.n}")
    return np.where(a == 1, table.y1, table.y0)


# ---------------------------------------------------------------------------
# Seeding: one 64-bit seed expands into named, per-purpose streams so every
# result is reproducible bit-for-bit regardless of worker count.
# ---------------------------------------------------------------------------

_PURPOSES = ("generation", "inference_assignment", "inference_outcome", "replication", "misc")


def purpose_seedseq(seed: int, purpose: str) -> np.random.SeedSequence:
    """Deterministic per-purpose seed stream derived from the run seed."""
    if purpose not in _PURPOSES:
        raise ValueError(f"unknown rng purpose {purpose!r}; expected one of {_PURPOSES}")
    root = np.random.SeedSequence(seed)
    return root.spawn(len(_PURPOSES))[_PURPOSES.index(purpose)]


def purpose_rng(seed: int, purpose: str) -> np.random.Generator:
    """Deterministic per-purpose generator derived from the run seed."""
    return np.random.Generator(np.random.PCG64(purpose_seedseq(seed, purpose)))


def spawn_rngs(rng_or_seedseq, count: int) -> list[np.random.Generator]:
    """Split off ``count`` independent child generators (one per chain/worker)."""
    if isinstance(rng_or_seedseq, np.random.SeedSequence):
        seq = rng_or_seedseq
    else:
        seq = rng_or_seedseq.bit_generator.seed_seq.spawn(1)[0]
    return [np.random.Generator(np.random.PCG64(s)) for s in seq.spawn(count)]


# ---------------------------------------------------------------------------
# CSV ingestion.  Header required; `a` and `y` are mandatory, `offset`,
# `pair`, `grade` optional, every other column is a covariate in header
# order.  Missing cells are an error; no imputation happens at ingestion.
# ---------------------------------------------------------------------------


def load_dataset_csv(path: str | Path) -> Dataset:
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file, header row required") from None
        header = [h.strip() for h in header]
        for required in ("a", "y"):
            if required not in header:
                raise ValueError(f"{path}: missing required column {required!r}")
        rows = list(reader)

    if not rows:
        raise ValueError(f"{path}: no data rows")

    columns: dict[str, list[float]] = {name: [] for name in header}
    for r, row in enumerate(rows):
        if len(row) != len(header):
            raise ValueError(f"{path}: row {r + 2} has {len(row)} cells, expected {len(header)}")
        for name, cell in zip(header, row):
            cell = cell.strip()
            if cell == "":
                raise ValueError(f"{path}: missing value for {name!r} at row {r + 2}")
            try:
                columns[name].append(float(cell))
            except ValueError:
                raise ValueError(
                    f"{path}: non-numeric value {cell!r} for {name!r} at row {r + 2}"
                ) from None

    cov_names = tuple(name for name in header if name not in _RESERVED_COLUMNS)
    covariates = (
        np.column_stack([columns[name] for name in cov_names])
        if cov_names
        else np.empty((len(rows), 0))
    )
    pair_structure = None
    if "pair" in header or "grade" in header:
        if not ("pair" in header and "grade" in header):
            raise ValueError(f"{path}: pair and grade columns must appear together")
        pair_structure = PairStructure(
            pair_ids=np.asarray(columns["pair"], dtype=int),
            grades=np.asarray(columns["grade"], dtype=int),
        )
    return Dataset(
        covariates=covariates,
        assignments=np.asarray(columns["a"]),
        observed_outcomes=np.asarray(columns["y"]),
        offsets=np.asarray(columns["offset"]) if "offset" in header else None,
        pair_structure=pair_structure,
        covariate_names=cov_names,
    )


def _format_cell(value: float) -> str:
    # Integral values print without a trailing ".0" so count data round-trips.
    if float(value).is_integer():
        return str(int(value))
    return repr(float(value))


def write_dataset_csv(data: Dataset, path: str | Path) -> None:
    path = Path(path)
    header: list[str] = ["a", "y"]
    if data.offsets is not None:
        header.append("offset")
    if data.pair_structure is not None:
        header.extend(["pair", "grade"])
    header.extend(data.covariate_names)

    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for i in range(data.n):
            row = [str(int(data.assignments[i])), _format_cell(data.observed_outcomes[i])]
            if data.offsets is not None:
                row.append(_format_cell(data.offsets[i]))
            if data.pair_structure is not None:
                row.append(str(int(data.pair_structure.pair_ids[i])))
                row.append(str(int(data.pair_structure.grades[i])))
            row.extend(_format_cell(v) for v in data.covariates[i])
            writer.writerow(row)
