"""Predictive-accuracy fitness for machines and populations of chromosomes."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numba
import numpy as np

from .codec import Layout, decode_arrays
from .dataset import Dataset
from .fsm import Fsm


@numba.njit(cache=True, nogil=True)
def _count_matches(actions, matrix, columns, outcomes, starts, out):
    # actions (N, S), matrix (N, S, C), outcomes 0-based; state resets per group
    for i in range(actions.shape[0]):
        hits = 0
        for g in range(starts.shape[0] - 1):
            s = 0
            for t in range(starts[g], starts[g + 1]):
                if t > starts[g]:
                    s = matrix[i, s, columns[t]]
                if actions[i, s] == outcomes[t]:
                    hits += 1
        out[i] = hits


@numba.njit(cache=True, nogil=True)
def _trace(actions, matrix, columns, starts, predicted, states):
    for g in range(starts.shape[0] - 1):
        s = 0
        for t in range(starts[g], starts[g + 1]):
            if t > starts[g]:
                s = matrix[s, columns[t]]
            states[t] = s
            predicted[t] = actions[s]


@dataclass(frozen=True)
class FitnessReport:
    accuracy: float
    row_count: int
    matches: int
    per_group_accuracy: tuple[float, ...] | None = None


def _check_arity(n_columns: int, data: Dataset) -> None:
    if n_columns != 2**data.n_predictors:
        raise ValueError(
            f"machine has {n_columns} columns but data has {data.n_predictors} predictors"
        )


def trace_dataset(fsm: Fsm, data: Dataset) -> tuple[np.ndarray, np.ndarray]:
    """1-based predicted actions and visited states for every row."""
    _check_arity(fsm.n_columns, data)
    actions, matrix = fsm.arrays()
    predicted = np.empty(data.n_rows, dtype=np.int64)
    states = np.empty(data.n_rows, dtype=np.int64)
    _trace(actions, matrix, data.columns, data.starts, predicted, states)
    return predicted + 1, states + 1


def accuracy(fsm: Fsm, data: Dataset, per_group: bool = False) -> FitnessReport:
    if data.n_rows == 0:
        raise ValueError("empty dataset")
    predicted, _ = trace_dataset(fsm, data)
    hits = predicted == data.outcomes
    n_hit = int(hits.sum())
    groups = None
    if per_group:
        sums = np.add.reduceat(hits.astype(np.int64), data.starts[:-1])
        groups = tuple((sums / data.group_sizes()).tolist())
    return FitnessReport(n_hit / data.n_rows, data.n_rows, n_hit, groups)


def match_counts(actions: np.ndarray, matrix: np.ndarray, data: Dataset, threads: int = 1) -> np.ndarray:
    """Matched-row counts for decoded 0-based population arrays."""
    actions = np.ascontiguousarray(actions, dtype=np.int64)
    matrix = np.ascontiguousarray(matrix, dtype=np.int64)
    outcomes = data.outcomes - 1
    out = np.zeros(len(actions), dtype=np.int64)
    if threads <= 1 or len(actions) < 2 * threads:
        _count_matches(actions, matrix, data.columns, outcomes, data.starts, out)
        return out
    bounds = np.linspace(0, len(actions), threads + 1).astype(int)

    def work(k: int) -> None:
        lo, hi = bounds[k], bounds[k + 1]
        _count_matches(actions[lo:hi], matrix[lo:hi], data.columns, outcomes, data.starts, out[lo:hi])

    with ThreadPoolExecutor(max_workers=threads) as pool:
        list(pool.map(work, range(threads)))
    return out


def evaluate_population(population, data: Dataset, layout: Layout, threads: int = 1) -> np.ndarray:
    """Accuracy of each decoded chromosome, in input order."""
    pop = np.atleast_2d(np.asarray(population, dtype=np.uint8))
    if data.n_rows == 0:
        raise ValueError("empty dataset")
    _check_arity(layout.n_columns, data)
    if data.outcomes.max() > layout.n_actions:
        raise ValueError("data has more actions than the layout can express")
    actions, matrix = decode_arrays(pop, layout)
    return match_counts(actions, matrix, data, threads) / data.n_rows
