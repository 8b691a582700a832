"""Diagnostics for estimated machines and the built-in IPD strategy library."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .dataset import Dataset
from .fitness import _check_arity, match_counts
from .fsm import Fsm, column_bits

IPD_PREDICTORS = ("own_lag", "opp_lag")
IPD_ACTIONS = ("c", "d")
IPD_COLUMNS = ("cc", "dc", "cd", "dd")


def _ipd(action_vector, state_matrix) -> Fsm:
    return Fsm(action_vector, state_matrix, IPD_PREDICTORS, IPD_ACTIONS, IPD_COLUMNS)


# Cells unreachable under deterministic play follow the opponent's last move
# (tft, tf2t) or stay put in the absorbing state (grim).
STRATEGIES: dict[str, Callable[[], Fsm]] = {
    "tft": lambda: _ipd((1, 2), [(1, 1, 2, 2), (1, 1, 2, 2)]),
    "grim": lambda: _ipd((1, 2), [(1, 2, 2, 2), (2, 2, 2, 2)]),
    "tf2t": lambda: _ipd((1, 1, 2), [(1, 1, 2, 2), (1, 1, 3, 3), (2, 2, 3, 3)]),
    "noisy-grim": lambda: _ipd((1, 2), [(1, 2, 2, 2), (1, 2, 2, 2)]),
    "always-c": lambda: _ipd((1, 1), [(1, 1, 1, 1), (2, 2, 2, 2)]),
    "always-d": lambda: _ipd((2, 2), [(1, 1, 1, 1), (2, 2, 2, 2)]),
}
ALIASES = {"gt": "grim", "ng": "noisy-grim", "tit-for-tat": "tft", "tit-for-two-tat": "tf2t"}


def builtin_strategy(name: str) -> Fsm:
    key = ALIASES.get(name.lower(), name.lower())
    if key not in STRATEGIES:
        raise ValueError(f"unknown strategy {name!r}; known: {', '.join(sorted(STRATEGIES))}")
    return STRATEGIES[key]()


def register_strategy(name: str, factory: Callable[[], Fsm]) -> None:
    STRATEGIES[name.lower()] = factory


@dataclass(frozen=True)
class IdentifiabilityReport:
    """``deltas[s, c, k]`` is fitness(machine) minus fitness with cell
    ``(s+1, c+1)`` replaced by its k-th alternative state (NaN padding)."""

    identifiable: np.ndarray
    deltas: np.ndarray
    base_fitness: float

    @property
    def min_delta(self) -> np.ndarray:
        return np.nanmin(self.deltas, axis=-1) if self.deltas.shape[-1] else np.zeros(
            self.identifiable.shape)

    @property
    def mean_delta(self) -> np.ndarray:
        return np.nanmean(self.deltas, axis=-1) if self.deltas.shape[-1] else np.zeros(
            self.identifiable.shape)

    def to_dict(self) -> dict:
        return {
            "identifiable": self.identifiable.astype(int).tolist(),
            "min_delta": self.min_delta.tolist(),
            "base_fitness": self.base_fitness,
        }


def _alternatives(fsm: Fsm) -> tuple[np.ndarray, np.ndarray, list[tuple[int, int, int]]]:
    """Every single-cell variant of the machine, stacked as 0-based arrays."""
    actions, matrix = fsm.arrays()
    variants, index = [], []
    for s in range(fsm.n_states):
        for c in range(fsm.n_columns):
            for v in range(fsm.n_states):
                if v != matrix[s, c]:
                    m = matrix.copy()
                    m[s, c] = v
                    variants.append(m)
                    index.append((s, c, v))
    stacked = np.stack(variants) if variants else np.zeros((0,) + matrix.shape, np.int64)
    return np.broadcast_to(actions, (len(variants), fsm.n_states)), stacked, index


def identifiability(fsm: Fsm, data: Dataset, threads: int = 1) -> IdentifiabilityReport:
    """A cell is identifiable iff every alternative value strictly lowers fitness."""
    _check_arity(fsm.n_columns, data)
    actions, matrix = fsm.arrays()
    base = match_counts(actions[None], matrix[None], data)[0]
    alt_actions, alt_matrix, index = _alternatives(fsm)
    counts = match_counts(alt_actions, alt_matrix, data, threads)
    n_alt = fsm.n_states - 1
    deltas = np.full((fsm.n_states, fsm.n_columns, n_alt), np.nan)
    fill = np.zeros((fsm.n_states, fsm.n_columns), dtype=int)
    for (s, c, _), cnt in zip(index, counts):
        deltas[s, c, fill[s, c]] = (base - cnt) / data.n_rows
        fill[s, c] += 1
    if n_alt:
        flags = np.all(deltas > 0, axis=-1)
    else:
        flags = np.zeros((fsm.n_states, fsm.n_columns), dtype=bool)
    return IdentifiabilityReport(flags, deltas, base / data.n_rows)


@dataclass(frozen=True)
class ImportanceReport:
    names: tuple[str, ...]
    scores: np.ndarray
    column_decrease: np.ndarray

    def ranking(self) -> list[str]:
        order = sorted(range(len(self.names)), key=lambda j: (-self.scores[j], j))
        return [self.names[j] for j in order]

    def to_dict(self) -> dict:
        return {n: float(s) for n, s in zip(self.names, self.scores)}


def variable_importance(fsm: Fsm, data: Dataset, threads: int = 1,
                        report: IdentifiabilityReport | None = None) -> ImportanceReport:
    """Relative predictor importance from single-cell perturbations.

    Each cell's score is its mean fitness decrease over alternative values
    (increases count as zero), normalized to sum to one. Predictor ``j`` is
    credited with the combined score of every pair of cells in the same row
    whose columns differ only in bit ``j`` and whose transitions differ; a
    predictor whose paired columns always agree has no effect and scores 0.
    Scores are scaled so the largest is 100.
    """
    report = report or identifiability(fsm, data, threads)
    cell = np.clip(report.mean_delta, 0.0, None)
    total = cell.sum()
    if total > 0:
        cell = cell / total
    matrix = np.asarray(fsm.state_matrix)
    p = fsm.n_predictors
    raw = np.zeros(p)
    for j in range(p):
        for c in range(fsm.n_columns):
            if (c >> j) & 1:
                continue
            c2 = c | (1 << j)
            differs = matrix[:, c] != matrix[:, c2]
            raw[j] += float(((cell[:, c] + cell[:, c2]) * differs).sum())
    scores = raw / raw.max() * 100.0 if raw.max() > 0 else np.zeros(p)
    return ImportanceReport(fsm.predictor_names, scores, cell.sum(axis=0))


def accessible_mask(truth: Fsm, own_predictor: int = 0) -> np.ndarray:
    """Cells reachable in noise-free play: the column's own-lag bit equals the
    action the state emits (action 1 <-> bit 0, action 2 <-> bit 1)."""
    if truth.n_actions != 2:
        raise ValueError("accessibility is defined for two-action machines")
    mask = np.zeros((truth.n_states, truth.n_columns), dtype=bool)
    for s in range(truth.n_states):
        for c in range(truth.n_columns):
            mask[s, c] = column_bits(c + 1, truth.n_predictors)[own_predictor] == (
                truth.action_vector[s] - 1)
    return mask


def mask_size(truth: Fsm, own_predictor: int = 0) -> int:
    return truth.n_states + int(accessible_mask(truth, own_predictor).sum())


def model_error(estimated: Fsm, truth: Fsm, mask: np.ndarray | None = None,
                own_predictor: int = 0) -> int:
    """Mismatches over the action vector plus the masked state-matrix cells."""
    if estimated.layout != truth.layout:
        raise ValueError(f"layouts differ: {estimated.layout} vs {truth.layout}")
    if mask is None:
        mask = accessible_mask(truth, own_predictor)
    mask = np.asarray(mask, dtype=bool)
    av_err = int(np.sum(np.asarray(estimated.action_vector) != np.asarray(truth.action_vector)))
    sm_err = int(np.sum((np.asarray(estimated.state_matrix) != np.asarray(truth.state_matrix)) & mask))
    return av_err + sm_err
