"""Deterministic Moore machines over binary predictor columns."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np


def column_index(predictor_bits: Sequence[int], n_predictors: int | None = None) -> int:
    """1-based state-matrix column for a joint predictor assignment.

    The first predictor is the least-significant bit, so for the IPD schema
    (own lag, opponent lag) the columns run cc, dc, cd, dd.
    """
    bits = list(predictor_bits)
    if n_predictors is not None and len(bits) != n_predictors:
        raise ValueError(f"expected {n_predictors} predictor values, got {len(bits)}")
    col = 0
    for j, b in enumerate(bits):
        if b not in (0, 1):
            raise ValueError(f"predictor values must be 0 or 1, got {b!r}")
        col |= int(b) << j
    return col + 1


def column_bits(column: int, n_predictors: int) -> tuple[int, ...]:
    """Inverse of :func:`column_index`."""
    c = column - 1
    return tuple((c >> j) & 1 for j in range(n_predictors))


def default_column_labels(n_predictors: int, levels: Sequence[str] = ("0", "1")) -> tuple[str, ...]:
    return tuple(
        "".join(levels[b] for b in column_bits(c, n_predictors))
        for c in range(1, 2**n_predictors + 1)
    )


@dataclass(frozen=True)
class PredictionTrace:
    predicted_actions: tuple[int, ...]
    visited_states: tuple[int, ...]
    matches: tuple[bool, ...] | None = None


@dataclass(frozen=True)
class Fsm:
    """A Moore machine with 1-based actions and states.

    ``state_matrix[s-1][c-1]`` is the state entered from state ``s`` when the
    predictors fall in column ``c``. The initial state is always 1.
    """

    action_vector: tuple[int, ...]
    state_matrix: tuple[tuple[int, ...], ...]
    predictor_names: tuple[str, ...]
    action_labels: tuple[str, ...]
    column_labels: tuple[str, ...] | None = field(default=None, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "action_vector", tuple(int(a) for a in self.action_vector))
        object.__setattr__(
            self, "state_matrix", tuple(tuple(int(v) for v in row) for row in self.state_matrix)
        )
        object.__setattr__(self, "predictor_names", tuple(self.predictor_names))
        object.__setattr__(self, "action_labels", tuple(self.action_labels))
        n_states = len(self.action_vector)
        if n_states < 1:
            raise ValueError("machine needs at least one state")
        if len(self.state_matrix) != n_states:
            raise ValueError("state matrix must have one row per state")
        n_cols = 2 ** len(self.predictor_names)
        if not self.predictor_names:
            raise ValueError("machine needs at least one predictor")
        for row in self.state_matrix:
            if len(row) != n_cols:
                raise ValueError(f"state matrix rows must have {n_cols} columns")
            if any(not 1 <= v <= n_states for v in row):
                raise ValueError(f"state matrix entries must lie in 1..{n_states}")
        if any(not 1 <= a <= len(self.action_labels) for a in self.action_vector):
            raise ValueError(f"actions must lie in 1..{len(self.action_labels)}")
        if self.column_labels is not None and len(self.column_labels) != n_cols:
            raise ValueError("column_labels must name every column")

    @classmethod
    def from_arrays(
        cls,
        action_vector,
        state_matrix,
        predictor_names: Sequence[str] | None = None,
        action_labels: Sequence[str] | None = None,
        n_actions: int | None = None,
        column_labels: Sequence[str] | None = None,
    ) -> Fsm:
        sm = np.asarray(state_matrix)
        n_pred = int(sm.shape[1]).bit_length() - 1
        if predictor_names is None:
            predictor_names = tuple(f"x{j + 1}" for j in range(n_pred))
        if action_labels is None:
            n_actions = n_actions or int(np.max(action_vector))
            action_labels = tuple(str(a + 1) for a in range(n_actions))
        return cls(
            tuple(np.asarray(action_vector).tolist()),
            tuple(map(tuple, sm.tolist())),
            tuple(predictor_names),
            tuple(action_labels),
            tuple(column_labels) if column_labels is not None else None,
        )

    @property
    def n_states(self) -> int:
        return len(self.action_vector)

    @property
    def n_actions(self) -> int:
        return len(self.action_labels)

    @property
    def n_predictors(self) -> int:
        return len(self.predictor_names)

    @property
    def n_columns(self) -> int:
        return 2 ** len(self.predictor_names)

    @property
    def initial_state(self) -> int:
        return 1

    @property
    def layout(self):
        from .codec import Layout

        return Layout(self.n_states, self.n_actions, self.n_columns)

    def labels(self) -> tuple[str, ...]:
        return self.column_labels or default_column_labels(self.n_predictors)

    def arrays(self) -> tuple[np.ndarray, np.ndarray]:
        """0-based ``(actions, matrix)`` arrays for the scoring kernels."""
        return (
            np.asarray(self.action_vector, dtype=np.int64) - 1,
            np.asarray(self.state_matrix, dtype=np.int64) - 1,
        )

    def with_cell(self, state: int, column: int, value: int) -> Fsm:
        rows = [list(r) for r in self.state_matrix]
        rows[state - 1][column - 1] = value
        return Fsm(self.action_vector, rows, self.predictor_names, self.action_labels,
                   self.column_labels)

    def relabel(self, predictor_names=None, action_labels=None, column_labels=None) -> Fsm:
        return Fsm(
            self.action_vector,
            self.state_matrix,
            tuple(predictor_names) if predictor_names is not None else self.predictor_names,
            tuple(action_labels) if action_labels is not None else self.action_labels,
            tuple(column_labels) if column_labels is not None else self.column_labels,
        )

    def to_dict(self) -> dict:
        return {
            "action_vector": list(self.action_vector),
            "state_matrix": [list(r) for r in self.state_matrix],
            "initial_state": self.initial_state,
            "predictor_names": list(self.predictor_names),
            "action_labels": list(self.action_labels),
            "column_labels": list(self.labels()),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> Fsm:
        if doc.get("initial_state", 1) != 1:
            raise ValueError("only machines starting in state 1 are supported")
        return cls(
            doc["action_vector"],
            doc["state_matrix"],
            doc["predictor_names"],
            doc["action_labels"],
            doc.get("column_labels"),
        )


def predict_sequence(
    fsm: Fsm, rows: Iterable[Sequence[int]], outcomes: Sequence[int] | None = None
) -> PredictionTrace:
    """Run the machine over one group's period-ordered predictor rows.

    The first row only emits the initial state's action; its predictors are
    never read. Every later row moves the machine on its (lagged) predictors
    first and then emits the new state's action.
    """
    state = fsm.initial_state
    predicted: list[int] = []
    visited: list[int] = []
    for t, bits in enumerate(rows):
        col = column_index(bits, fsm.n_predictors)
        if t > 0:
            state = fsm.state_matrix[state - 1][col - 1]
        visited.append(state)
        predicted.append(fsm.action_vector[state - 1])
    matches = None
    if outcomes is not None:
        outcomes = list(outcomes)
        if len(outcomes) != len(predicted):
            raise ValueError("outcomes and rows differ in length")
        matches = tuple(p == o for p, o in zip(predicted, outcomes))
    return PredictionTrace(tuple(predicted), tuple(visited), matches)


def _quote(s: str) -> str:
    return '"{}"'.format(str(s).replace('"', r"\""))


def to_dot(fsm: Fsm, accessible_mask=None, name: str = "fsm") -> str:
    """Graphviz digraph; one edge per (state, target) listing its columns.

    With a mask, accessible column labels are bold and the rest italic.
    """
    labels = fsm.labels()
    if accessible_mask is not None:
        accessible_mask = np.asarray(accessible_mask, dtype=bool)
        if accessible_mask.shape != (fsm.n_states, fsm.n_columns):
            raise ValueError("mask shape must match the state matrix")

    names = _state_names(fsm)
    lines = [f"digraph {_quote(name)} {{", "  rankdir=LR;", '  __start [shape=point, label=""];']
    for s in range(1, fsm.n_states + 1):
        action = fsm.action_labels[fsm.action_vector[s - 1] - 1]
        lines.append(
            f"  s{s} [shape=circle, label={_quote(names[s - 1])}, "
            f"tooltip={_quote('state ' + str(s) + ': ' + action)}];"
        )
    lines.append(f"  __start -> s{fsm.initial_state};")
    for s in range(1, fsm.n_states + 1):
        by_target: dict[int, list[int]] = {}
        for c, target in enumerate(fsm.state_matrix[s - 1], start=1):
            by_target.setdefault(target, []).append(c)
        for target, cols in by_target.items():
            if accessible_mask is None:
                label = _quote(",".join(labels[c - 1] for c in cols))
            else:
                parts = [
                    f"<B>{labels[c - 1]}</B>" if accessible_mask[s - 1, c - 1]
                    else f"<I>{labels[c - 1]}</I>"
                    for c in cols
                ]
                label = "<" + ",".join(parts) + ">"
            lines.append(f"  s{s} -> s{target} [label={label}];")
    lines.append("}")
    return "\n".join(lines) + "\n"


def _state_names(fsm: Fsm) -> list[str]:
    # C, D for unique actions; C1, C2, ... when an action owns several states
    raw = [fsm.action_labels[a - 1].upper() for a in fsm.action_vector]
    counts = {r: raw.count(r) for r in raw}
    seen: dict[str, int] = {}
    out = []
    for r in raw:
        if counts[r] == 1:
            out.append(r)
        else:
            seen[r] = seen.get(r, 0) + 1
            out.append(f"{r}{seen[r]}")
    return out
