"""Grouped, period-ordered choice data with binary predictors."""

from __future__ import annotations

import csv
import hashlib
import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np


class DataError(ValueError):
    """Raised when an input table violates the dataset schema."""


@dataclass(frozen=True, eq=False)
class Dataset:
    """Rows sorted by group then period.

    ``outcomes`` are 1-based action indices and ``predictors`` is an
    ``(n_rows, p)`` 0/1 matrix. ``starts`` holds the first row of every group
    plus a trailing ``n_rows`` sentinel.
    """

    group_labels: tuple[str, ...]
    starts: np.ndarray
    periods: np.ndarray
    outcomes: np.ndarray
    predictors: np.ndarray
    predictor_names: tuple[str, ...]
    action_labels: tuple[str, ...]
    columns: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        starts = np.asarray(self.starts, dtype=np.int64)
        periods = np.asarray(self.periods, dtype=np.int64)
        outcomes = np.asarray(self.outcomes, dtype=np.int64)
        preds = np.asarray(self.predictors, dtype=np.uint8).reshape(len(outcomes), len(self.predictor_names))
        names = tuple(self.predictor_names)
        if not names:
            raise DataError("at least one predictor is required")
        if preds.shape[1] != len(names):
            raise DataError(f"{preds.shape[1]} predictor columns but {len(names)} names")
        if len(starts) != len(self.group_labels) + 1 or starts[0] != 0 or starts[-1] != len(outcomes):
            raise DataError("group boundaries are inconsistent")
        if np.any(np.diff(starts) <= 0):
            raise DataError("empty group")
        if len(periods) != len(outcomes):
            raise DataError("periods and outcomes differ in length")
        if np.any(preds > 1):
            raise DataError("predictors must be 0 or 1")
        if len(outcomes) and (outcomes.min() < 1 or outcomes.max() > len(self.action_labels)):
            raise DataError(f"outcomes must lie in 1..{len(self.action_labels)}")
        for g in range(len(starts) - 1):
            if np.any(np.diff(periods[starts[g]:starts[g + 1]]) <= 0):
                raise DataError(f"periods do not increase within group {self.group_labels[g]!r}")
        weights = (1 << np.arange(len(names), dtype=np.int64))
        for name, value in (
            ("starts", starts), ("periods", periods), ("outcomes", outcomes), ("predictors", preds)
        ):
            value.setflags(write=False)
            object.__setattr__(self, name, value)
        object.__setattr__(self, "predictor_names", names)
        object.__setattr__(self, "action_labels", tuple(self.action_labels))
        object.__setattr__(self, "group_labels", tuple(str(g) for g in self.group_labels))
        cols = (preds.astype(np.int64) @ weights) if len(preds) else np.zeros(0, np.int64)
        cols.setflags(write=False)
        object.__setattr__(self, "columns", cols)

    @property
    def n_rows(self) -> int:
        return len(self.outcomes)

    @property
    def n_groups(self) -> int:
        return len(self.group_labels)

    @property
    def n_predictors(self) -> int:
        return len(self.predictor_names)

    @property
    def n_actions(self) -> int:
        return len(self.action_labels)

    def group_slice(self, g: int) -> slice:
        return slice(int(self.starts[g]), int(self.starts[g + 1]))

    def group_sizes(self) -> np.ndarray:
        return np.diff(self.starts)

    def take_groups(self, indices: Sequence[int]) -> Dataset:
        indices = list(indices)
        if not indices:
            raise DataError("cannot build a dataset with no groups")
        rows = np.concatenate([np.arange(self.starts[g], self.starts[g + 1]) for g in indices])
        sizes = self.group_sizes()[indices]
        return Dataset(
            tuple(self.group_labels[g] for g in indices),
            np.concatenate([[0], np.cumsum(sizes)]),
            self.periods[rows],
            self.outcomes[rows],
            self.predictors[rows],
            self.predictor_names,
            self.action_labels,
        )

    def select_predictors(self, names: Sequence[str]) -> Dataset:
        missing = [n for n in names if n not in self.predictor_names]
        if missing:
            raise ValueError(f"unknown predictors: {missing}")
        idx = [self.predictor_names.index(n) for n in names]
        return Dataset(
            self.group_labels, self.starts, self.periods, self.outcomes,
            self.predictors[:, idx], tuple(names), self.action_labels,
        )

    def __eq__(self, other) -> bool:
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            self.group_labels == other.group_labels
            and self.predictor_names == other.predictor_names
            and self.action_labels == other.action_labels
            and np.array_equal(self.starts, other.starts)
            and np.array_equal(self.periods, other.periods)
            and np.array_equal(self.outcomes, other.outcomes)
            and np.array_equal(self.predictors, other.predictors)
        )

    __hash__ = None  # type: ignore[assignment]

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["group", "period", "outcome", *self.predictor_names])
        for g, label in enumerate(self.group_labels):
            for r in range(self.starts[g], self.starts[g + 1]):
                writer.writerow(
                    [label, int(self.periods[r]), self.action_labels[self.outcomes[r] - 1],
                     *(int(v) for v in self.predictors[r])]
                )
        return buf.getvalue()

    def fingerprint(self) -> dict:
        return {
            "rows": self.n_rows,
            "groups": self.n_groups,
            "predictors": list(self.predictor_names),
            "action_labels": list(self.action_labels),
            "sha256": hashlib.sha256(self.to_csv().encode()).hexdigest(),
        }


def from_groups(
    groups: Sequence[tuple[Sequence[int], Sequence[Sequence[int]]]],
    predictor_names: Sequence[str],
    action_labels: Sequence[str],
    group_labels: Sequence[str] | None = None,
) -> Dataset:
    """Build a dataset from ``(outcomes, predictor_rows)`` pairs, periods 1..n."""
    sizes = [len(o) for o, _ in groups]
    outcomes = np.concatenate([np.asarray(o, dtype=np.int64) for o, _ in groups])
    preds = np.concatenate(
        [np.asarray(p, dtype=np.uint8).reshape(len(o), len(predictor_names)) for o, p in groups]
    )
    periods = np.concatenate([np.arange(1, n + 1) for n in sizes])
    labels = group_labels or [str(i + 1) for i in range(len(groups))]
    return Dataset(tuple(labels), np.concatenate([[0], np.cumsum(sizes)]), periods, outcomes,
                   preds, tuple(predictor_names), tuple(action_labels))


@dataclass
class Schema:
    """Column mapping for :func:`load_table`.

    ``predictor_levels`` optionally names the (low, high) spellings of
    predictor values when the file does not use 0/1.
    """

    predictors: Sequence[str] | None = None
    period: str = "period"
    outcome: str = "outcome"
    group: str | None = "group"
    action_labels: Sequence[str] | None = None
    predictor_levels: Sequence[str] | None = None


def load_table(path: str | Path, schema: Schema | None = None) -> Dataset:
    schema = schema or Schema()
    with open(path, newline="", encoding="utf-8") as fh:
        return read_table(fh, schema, source=str(path))


def read_table(fh, schema: Schema, source: str = "<table>") -> Dataset:
    reader = csv.reader(fh)
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise DataError(f"{source}: empty file") from None

    def col(name: str) -> int:
        if name not in header:
            raise DataError(f"{source}: missing column {name!r}")
        return header.index(name)

    group_col = schema.group if schema.group in header else None
    if schema.group and schema.group != "group" and group_col is None:
        raise DataError(f"{source}: missing column {schema.group!r}")
    predictors = list(schema.predictors) if schema.predictors is not None else [
        h for h in header if h not in {schema.period, schema.outcome, group_col}
    ]
    if not predictors:
        raise DataError(f"{source}: no predictor columns")
    i_period, i_outcome = col(schema.period), col(schema.outcome)
    i_group = col(group_col) if group_col else None
    i_preds = [col(p) for p in predictors]
    levels = {"0": 0, "1": 1}
    if schema.predictor_levels is not None:
        lo, hi = schema.predictor_levels
        levels = {str(lo): 0, str(hi): 1}

    raw_rows = []
    for lineno, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise DataError(f"{source}: row {lineno}: expected {len(header)} fields, got {len(row)}")
        row = [c.strip() for c in row]
        try:
            period = int(row[i_period])
        except ValueError:
            raise DataError(f"{source}: row {lineno}, column {schema.period!r}: "
                            f"period {row[i_period]!r} is not an integer") from None
        if period < 1:
            raise DataError(f"{source}: row {lineno}, column {schema.period!r}: period must be positive")
        bits = []
        for name, i in zip(predictors, i_preds):
            if row[i] not in levels:
                raise DataError(f"{source}: row {lineno}, column {name!r}: "
                                f"non-binary predictor value {row[i]!r}")
            bits.append(levels[row[i]])
        if row[i_outcome] == "":
            raise DataError(f"{source}: row {lineno}, column {schema.outcome!r}: missing outcome")
        raw_rows.append((lineno, row[i_group] if i_group is not None else None, period,
                         row[i_outcome], bits))
    if not raw_rows:
        raise DataError(f"{source}: no data rows")

    labels = list(schema.action_labels) if schema.action_labels is not None else sorted(
        {r[3] for r in raw_rows}
    )
    if len(labels) < 2:
        labels = labels + [f"not-{labels[0]}"]
    label_index = {lab: i + 1 for i, lab in enumerate(labels)}

    group_order: list[str] = []
    members: dict[str, list] = {}
    if i_group is not None:
        for r in raw_rows:
            if r[1] not in members:
                group_order.append(r[1])
                members[r[1]] = []
            members[r[1]].append(r)
        for g in group_order:
            rows = members[g]
            for prev, cur in zip(rows, rows[1:]):
                if cur[2] <= prev[2]:
                    raise DataError(f"{source}: row {cur[0]}, column {schema.period!r}: "
                                    f"period does not increase within group {g!r}")
    else:
        for r in raw_rows:
            if not group_order or r[2] <= members[group_order[-1]][-1][2]:
                group_order.append(str(len(group_order) + 1))
                members[group_order[-1]] = []
            members[group_order[-1]].append(r)

    outcomes, periods, preds, sizes = [], [], [], []
    for g in group_order:
        sizes.append(len(members[g]))
        for lineno, _, period, outcome, bits in members[g]:
            if outcome not in label_index:
                raise DataError(f"{source}: row {lineno}, column {schema.outcome!r}: "
                                f"unknown outcome label {outcome!r}")
            outcomes.append(label_index[outcome])
            periods.append(period)
            preds.append(bits)
    return Dataset(tuple(group_order), np.concatenate([[0], np.cumsum(sizes)]),
                   np.array(periods), np.array(outcomes),
                   np.array(preds, dtype=np.uint8), tuple(predictors), tuple(labels))


def write_table(data: Dataset, path: str | Path) -> None:
    Path(path).write_text(data.to_csv(), encoding="utf-8")


def binarize(values: Sequence[float], threshold: float | str = "median") -> np.ndarray:
    """High/low split; values equal to the threshold are low."""
    arr = np.asarray(values, dtype=float)
    if arr.size == 0:
        raise ValueError("cannot binarize an empty sequence")
    if isinstance(threshold, str):
        if threshold != "median":
            raise ValueError(f"unknown threshold {threshold!r}")
        threshold = float(np.median(arr))
    return (arr > threshold).astype(np.uint8)


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.8
    seed: int = 0

    def __post_init__(self) -> None:
        if not 0 < self.train_fraction < 1:
            raise ValueError("train_fraction must lie in (0, 1)")


def split_train_test(data: Dataset, spec: SplitSpec) -> tuple[Dataset, Dataset]:
    """Random partition of whole groups into train and test sets."""
    if data.n_groups < 2:
        raise ValueError("need at least two groups to split")
    n_train = min(math.ceil(spec.train_fraction * data.n_groups), data.n_groups - 1)
    order = np.random.default_rng(spec.seed).permutation(data.n_groups)
    return (data.take_groups(sorted(order[:n_train].tolist())),
            data.take_groups(sorted(order[n_train:].tolist())))


def fold_assignments(data: Dataset, k: int, seed: int) -> np.ndarray:
    """1-based fold label per group; fold sizes differ by at most one."""
    if k < 2:
        raise ValueError("k must be at least 2")
    if k > data.n_groups:
        raise ValueError(f"k={k} exceeds the number of groups ({data.n_groups})")
    folds = np.empty(data.n_groups, dtype=np.int64)
    order = np.random.default_rng(seed).permutation(data.n_groups)
    folds[order] = np.arange(data.n_groups) % k + 1
    return folds


def concat(parts: Sequence[Dataset]) -> Dataset:
    """Stack datasets with identical schemas; groups keep their labels."""
    first = parts[0]
    for d in parts[1:]:
        if d.predictor_names != first.predictor_names or d.action_labels != first.action_labels:
            raise DataError("cannot concatenate datasets with different schemas")
    sizes = np.concatenate([d.group_sizes() for d in parts])
    return Dataset(
        tuple(g for d in parts for g in d.group_labels),
        np.concatenate([[0], np.cumsum(sizes)]),
        np.concatenate([d.periods for d in parts]),
        np.concatenate([d.outcomes for d in parts]),
        np.concatenate([d.predictors for d in parts]),
        first.predictor_names,
        first.action_labels,
    )
