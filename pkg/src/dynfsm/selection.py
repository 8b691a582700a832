"""Cross-validated choice of state count and predictor subset."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .analysis import variable_importance
from .codec import Layout
from .dataset import Dataset, fold_assignments
from .fitness import accuracy
from .ga import EvolveResult, GaConfig, evolve

MAX_INTERPRETABLE = 3


@dataclass(frozen=True)
class HyperGrid:
    state_counts: tuple[int, ...] = (2,)
    predictor_subsets: tuple[tuple[str, ...], ...] | None = None
    metric: str = "accuracy"
    k: int = 10
    seed: int = 0
    # mean scores within this distance count as tied (then fewer states/predictors win)
    tie_tolerance: float = 0.0

    def __post_init__(self) -> None:
        if not self.state_counts or any(s < 2 for s in self.state_counts):
            raise ValueError("state_counts must be a non-empty list of counts >= 2")
        if self.predictor_subsets is not None and not self.predictor_subsets:
            raise ValueError("predictor_subsets must be non-empty")
        if self.metric != "accuracy":
            raise ValueError(f"unsupported metric {self.metric!r}; only 'accuracy' is available")
        if self.k < 2:
            raise ValueError("k must be at least 2")

    def rows(self, data: Dataset) -> list[tuple[int, tuple[str, ...]]]:
        subsets = self.predictor_subsets or (data.predictor_names,)
        for sub in subsets:
            unknown = [p for p in sub if p not in data.predictor_names]
            if unknown or not sub:
                raise ValueError(f"grid references unknown predictors: {unknown or sub}")
        return [(s, tuple(sub)) for s in self.state_counts for sub in subsets]

    def to_dict(self) -> dict:
        return {"state_counts": list(self.state_counts),
                "predictor_subsets": None if self.predictor_subsets is None
                else [list(s) for s in self.predictor_subsets],
                "metric": self.metric, "k": self.k, "seed": self.seed,
                "tie_tolerance": self.tie_tolerance}


@dataclass(frozen=True)
class CvRow:
    n_states: int
    predictors: tuple[str, ...]
    fold_scores: tuple[float, ...]

    @property
    def mean_score(self) -> float:
        return float(np.mean(self.fold_scores))

    def to_dict(self) -> dict:
        return {"states": self.n_states, "predictors": list(self.predictors),
                "fold_scores": list(self.fold_scores), "mean_score": self.mean_score}


@dataclass
class CvResult:
    table: list[CvRow]
    best: CvRow
    folds: np.ndarray = field(repr=False)

    def to_dict(self) -> dict:
        return {"table": [r.to_dict() for r in self.table], "best": self.best.to_dict(),
                "fold_of_group": self.folds.tolist()}

    def to_csv(self) -> str:
        lines = ["states,predictors,mean_score," + ",".join(
            f"fold{i + 1}" for i in range(len(self.best.fold_scores)))]
        for r in self.table:
            lines.append(",".join([str(r.n_states), "|".join(r.predictors), repr(r.mean_score),
                                   *map(repr, r.fold_scores)]))
        return "\n".join(lines) + "\n"


def pick_best(rows: Sequence[CvRow], tie_tolerance: float = 0.0) -> CvRow:
    """Highest mean; near-ties go to fewer states, then fewer predictors."""
    top = max(r.mean_score for r in rows)
    tied = [r for r in rows if r.mean_score >= top - tie_tolerance - 1e-12]
    return min(tied, key=lambda r: (r.n_states, len(r.predictors), -r.mean_score))


def fold_seed(seed: int, fold: int) -> int:
    return int(np.random.SeedSequence(seed, spawn_key=(fold,)).generate_state(1)[0])


def cross_validate(data: Dataset, grid: HyperGrid, ga_config: GaConfig | None = None,
                   progress=None) -> CvResult:
    """k-fold CV over (states x predictor subset); folds are whole groups.

    Every grid row sees the same folds and the same per-fold GA seeds so rows
    differ only in their hyper-parameters.
    """
    ga_config = ga_config or GaConfig()
    rows = grid.rows(data)
    folds = fold_assignments(data, grid.k, grid.seed)
    table = []
    for n_states, subset in rows:
        sub = data.select_predictors(subset)
        layout = Layout.for_predictors(n_states, max(2, data.n_actions), len(subset))
        scores = []
        for f in range(1, grid.k + 1):
            train = sub.take_groups(np.flatnonzero(folds != f))
            test = sub.take_groups(np.flatnonzero(folds == f))
            res = evolve(train, layout, ga_config.replace(seed=fold_seed(ga_config.seed, f)))
            scores.append(accuracy(res.best_fsm, test).accuracy)
            if progress is not None:
                progress(n_states, subset, f, scores[-1])
        table.append(CvRow(n_states, subset, tuple(scores)))
    return CvResult(table, pick_best(table, grid.tie_tolerance), folds)


def _check_bound(n: int, what: str) -> None:
    if n > MAX_INTERPRETABLE:
        raise ValueError(f"{what} must be < 4 to keep machines interpretable, got {n}")


def subset_search(data: Dataset, max_predictors: int, ga_config: GaConfig | None = None,
                  state_counts: Sequence[int] = (2,), k: int = 10, seed: int = 0) -> list[CvRow]:
    """Cross-validate every predictor subset of size 1..max_predictors; best first."""
    _check_bound(max_predictors, "max_predictors")
    if max_predictors < 1:
        raise ValueError("max_predictors must be at least 1")
    if data.n_predictors < max_predictors:
        raise ValueError("dataset has fewer predictors than max_predictors")
    subsets = tuple(
        combo for size in range(1, max_predictors + 1)
        for combo in itertools.combinations(data.predictor_names, size)
    )
    grid = HyperGrid(tuple(state_counts), subsets, k=k, seed=seed)
    result = cross_validate(data, grid, ga_config)
    return sorted(result.table, key=lambda r: (-r.mean_score, r.n_states, len(r.predictors)))


@dataclass
class ReductionResult:
    data: Dataset
    full: EvolveResult
    reduced: EvolveResult
    ranking: list[str]


def importance_guided_reduction(data: Dataset, keep: int, ga_config: GaConfig | None = None,
                                n_states: int = 2) -> ReductionResult:
    """Fit on all predictors, keep the ``keep`` most important, refit."""
    _check_bound(keep, "keep")
    if keep < 1 or keep >= data.n_predictors:
        raise ValueError(f"keep must lie in 1..{data.n_predictors - 1}")
    ga_config = ga_config or GaConfig()
    n_actions = max(2, data.n_actions)
    full = evolve(data, Layout.for_predictors(n_states, n_actions, data.n_predictors), ga_config)
    full.importance = variable_importance(full.best_fsm, data, ga_config.threads)
    ranking = full.importance.ranking()
    kept = [p for p in data.predictor_names if p in ranking[:keep]]
    reduced_data = data.select_predictors(kept)
    reduced = evolve(reduced_data, Layout.for_predictors(n_states, n_actions, keep), ga_config)
    return ReductionResult(reduced_data, full, reduced, ranking)
