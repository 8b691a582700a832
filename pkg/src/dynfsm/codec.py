"""Gray-coded bitstring genotype <-> Moore machine phenotype.

A chromosome is a flat 0/1 vector made of two segments: the action vector
(one field per state) followed by the state matrix (one field per cell,
stored column by column). Each segment is Gray-decoded as a single word and
then cut into fixed-width fields.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .fsm import Fsm


@dataclass(frozen=True)
class Layout:
    """Segment geometry of a chromosome."""

    n_states: int
    n_actions: int
    n_columns: int

    def __post_init__(self) -> None:
        if self.n_states < 2 or self.n_actions < 2 or self.n_columns < 2:
            raise ValueError(f"layout counts must all be >= 2, got {self}")
        if self.n_columns & (self.n_columns - 1):
            raise ValueError(f"n_columns must be a power of two, got {self.n_columns}")

    @property
    def action_bits(self) -> int:
        return math.ceil(math.log2(self.n_actions))

    @property
    def state_bits(self) -> int:
        return math.ceil(math.log2(self.n_states))

    @property
    def n_predictors(self) -> int:
        return self.n_columns.bit_length() - 1

    @property
    def action_segment(self) -> int:
        return self.n_states * self.action_bits

    @property
    def matrix_segment(self) -> int:
        return self.n_states * self.n_columns * self.state_bits

    @property
    def length(self) -> int:
        return self.action_segment + self.matrix_segment

    @classmethod
    def for_predictors(cls, n_states: int, n_actions: int, n_predictors: int) -> Layout:
        return cls(n_states, n_actions, 2**n_predictors)


def chromosome_length(layout: Layout) -> int:
    return layout.length


def _as_bits(bits) -> np.ndarray:
    arr = np.asarray(bits, dtype=np.uint8)
    if arr.size == 0:
        raise ValueError("bit sequence must be non-empty")
    if np.any(arr > 1):
        raise ValueError("bits must be 0 or 1")
    return arr


def gray_to_binary(bits) -> np.ndarray:
    """Reflected-Gray decode: ``out[i] = out[i-1] ^ in[i]``.

    Works on the last axis, so a 2-D array decodes row by row.
    """
    arr = _as_bits(bits)
    return np.bitwise_xor.accumulate(arr, axis=-1)


def binary_to_gray(bits) -> np.ndarray:
    arr = _as_bits(bits)
    out = arr.copy()
    out[..., 1:] ^= arr[..., :-1]
    return out


def _field_values(binary: np.ndarray, width: int) -> np.ndarray:
    # binary: (..., n_fields * width), MSB first within each field
    shaped = binary.reshape(binary.shape[:-1] + (-1, width)).astype(np.int64)
    weights = 1 << np.arange(width - 1, -1, -1, dtype=np.int64)
    return shaped @ weights


def decode_arrays(population, layout: Layout) -> tuple[np.ndarray, np.ndarray]:
    """Decode one chromosome or a stacked population to 0-based index arrays.

    Returns ``(actions, matrix)`` with shapes ``(..., S)`` and ``(..., S, C)``.
    Out-of-range field values wrap modulo the valid range.
    """
    pop = np.asarray(population, dtype=np.uint8)
    if pop.shape[-1] != layout.length:
        raise ValueError(
            f"chromosome length {pop.shape[-1]} does not match layout length {layout.length}"
        )
    av_seg = pop[..., : layout.action_segment]
    sm_seg = pop[..., layout.action_segment :]
    actions = _field_values(gray_to_binary(av_seg), layout.action_bits) % layout.n_actions
    fields = _field_values(gray_to_binary(sm_seg), layout.state_bits) % layout.n_states
    # column-major: consecutive fields run down a column
    matrix = fields.reshape(fields.shape[:-1] + (layout.n_columns, layout.n_states))
    matrix = np.swapaxes(matrix, -1, -2)
    return actions, np.ascontiguousarray(matrix)


def decode_chromosome(
    bits,
    layout: Layout,
    predictor_names: tuple[str, ...] | None = None,
    action_labels: tuple[str, ...] | None = None,
) -> Fsm:
    bits = _as_bits(bits)
    if bits.ndim != 1:
        raise ValueError("decode_chromosome takes a single chromosome")
    actions, matrix = decode_arrays(bits, layout)
    return Fsm.from_arrays(
        actions + 1,
        matrix + 1,
        predictor_names=predictor_names,
        action_labels=action_labels,
        n_actions=layout.n_actions,
    )


def _field_bits(values, width: int) -> np.ndarray:
    values = np.asarray(values, dtype=np.int64)
    shifts = np.arange(width - 1, -1, -1, dtype=np.int64)
    return ((values[:, None] >> shifts) & 1).astype(np.uint8).ravel()


def encode_chromosome(fsm: Fsm, layout: Layout | None = None) -> np.ndarray:
    layout = layout or fsm.layout
    if fsm.n_states != layout.n_states or fsm.n_columns != layout.n_columns:
        raise ValueError(f"machine shape does not fit layout {layout}")
    av = np.asarray(fsm.action_vector) - 1
    sm = np.asarray(fsm.state_matrix) - 1
    if av.min() < 0 or av.max() >= layout.n_actions:
        raise ValueError("action index out of range for layout")
    if sm.min() < 0 or sm.max() >= layout.n_states:
        raise ValueError("state index out of range for layout")
    av_bits = _field_bits(av, layout.action_bits)
    sm_bits = _field_bits(sm.T.ravel(), layout.state_bits)
    return np.concatenate([binary_to_gray(av_bits), binary_to_gray(sm_bits)])
