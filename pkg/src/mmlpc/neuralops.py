"""Minimal neural inference ops: dense/block-sparse matrix-vector products,
GRU cell, dual fully-connected output head, embedding lookup-sum, and
categorical sampling.

These are the validated public entry points; the arithmetic itself lives
in :mod:`mmlpc.kernels` with interchangeable NumPy and compiled backends.
Parameter containers are immutable after construction and safe to share
across threads.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence, Union

import numpy as np

from . import kernels
from .errors import NumericError, ParameterError, ValidationError

BLOCK_ROWS = 16
ALPHABET = 256


def _as_vector(x, name="vector"):
    arr = np.ascontiguousarray(x, dtype=np.float64)
    if arr.ndim != 1:
        raise ParameterError(f"{name} must be 1-D, got shape {arr.shape}")
    return arr


class BlockSparseMatrix:
    """Sparse matrix stored as 16x1 blocks (16 consecutive rows, 1 column).

    Blocks are canonicalized to (row_block, col) order at construction so
    products accumulate deterministically.
    """

    def __init__(self, rows: int, cols: int, blocks: Sequence[tuple[int, int, np.ndarray]]):
        if rows <= 0 or cols <= 0:
            raise ValidationError(f"matrix shape must be positive, got {rows}x{cols}")
        if rows % BLOCK_ROWS != 0:
            raise ValidationError(f"rows must be divisible by {BLOCK_ROWS}, got {rows}")
        n = len(blocks)
        row_blocks = np.empty(n, dtype=np.int32)
        block_cols = np.empty(n, dtype=np.int32)
        values = np.empty((n, BLOCK_ROWS), dtype=np.float64)
        for i, (rb, c, vals) in enumerate(blocks):
            if not 0 <= rb < rows // BLOCK_ROWS:
                raise ValidationError(f"row block {rb} out of range for {rows} rows")
            if not 0 <= c < cols:
                raise ValidationError(f"column {c} out of range for {cols} columns")
            v = np.asarray(vals, dtype=np.float64)
            if v.shape != (BLOCK_ROWS,):
                raise ValidationError(f"block values must have shape ({BLOCK_ROWS},), got {v.shape}")
            row_blocks[i], block_cols[i], values[i] = rb, c, v
        order = np.lexsort((block_cols, row_blocks))
        row_blocks, block_cols, values = row_blocks[order], block_cols[order], values[order]
        keys = row_blocks.astype(np.int64) * cols + block_cols
        if n > 1 and np.any(np.diff(keys) == 0):
            raise ValidationError("duplicate (row_block, col) block positions")
        self.rows = rows
        self.cols = cols
        self.row_blocks = row_blocks
        self.block_cols = block_cols
        self.values = values

    @property
    def n_blocks(self) -> int:
        return len(self.row_blocks)

    @property
    def density(self) -> float:
        return self.n_blocks * BLOCK_ROWS / (self.rows * self.cols)

    def to_dense(self) -> np.ndarray:
        dense = np.zeros((self.rows, self.cols))
        for rb, c, vals in zip(self.row_blocks, self.block_cols, self.values):
            dense[rb * BLOCK_ROWS : (rb + 1) * BLOCK_ROWS, c] = vals
        return dense


WeightMatrix = Union[np.ndarray, BlockSparseMatrix]


@dataclass(frozen=True)
class GruParams:
    """Recurrent weights and biases for the update/reset/candidate gates.

    Gate input contributions arrive pre-multiplied (embedding lookups or
    upstream projections), so there are no input weight matrices here.
    """

    w_update: WeightMatrix
    w_reset: WeightMatrix
    w_cand: WeightMatrix
    b_update: np.ndarray
    b_reset: np.ndarray
    b_cand: np.ndarray

    def __post_init__(self):
        size = self.size
        for w in (self.w_update, self.w_reset, self.w_cand):
            shape = (w.rows, w.cols) if isinstance(w, BlockSparseMatrix) else w.shape
            if shape != (size, size):
                raise ValidationError(f"recurrent weight shape {shape} != ({size}, {size})")
        for name in ("b_update", "b_reset", "b_cand"):
            b = _as_vector(getattr(self, name), name)
            if b.shape != (size,):
                raise ValidationError(f"{name} must have length {size}")
            object.__setattr__(self, name, b)

    @property
    def size(self) -> int:
        w = self.w_update
        return w.rows if isinstance(w, BlockSparseMatrix) else w.shape[0]


@dataclass(frozen=True)
class DualFcParams:
    """Output head: a1 * tanh(W1 x) + a2 * tanh(W2 x) + b, 256 logits."""

    w1: np.ndarray
    w2: np.ndarray
    scale1: np.ndarray
    scale2: np.ndarray
    bias: np.ndarray

    def __post_init__(self):
        w1 = np.ascontiguousarray(self.w1, dtype=np.float64)
        w2 = np.ascontiguousarray(self.w2, dtype=np.float64)
        if w1.ndim != 2 or w1.shape[0] != ALPHABET:
            raise ValidationError(f"w1 must be ({ALPHABET}, in_dim), got {w1.shape}")
        if w2.shape != w1.shape:
            raise ValidationError(f"w2 shape {w2.shape} != w1 shape {w1.shape}")
        object.__setattr__(self, "w1", w1)
        object.__setattr__(self, "w2", w2)
        for name in ("scale1", "scale2", "bias"):
            v = _as_vector(getattr(self, name), name)
            if v.shape != (ALPHABET,):
                raise ValidationError(f"{name} must have length {ALPHABET}")
            object.__setattr__(self, name, v)

    @property
    def in_dim(self) -> int:
        return self.w1.shape[1]


def gemv_dense(m, x) -> np.ndarray:
    """Dense matrix-vector product."""
    m = np.ascontiguousarray(m, dtype=np.float64)
    x = _as_vector(x, "x")
    if m.ndim != 2 or m.shape[1] != x.size:
        raise ParameterError(f"shape mismatch: matrix {m.shape} vs vector ({x.size},)")
    return kernels.active().gemv_dense(m, x)


def gemv_block_sparse(m: BlockSparseMatrix, x) -> np.ndarray:
    """Block-sparse matrix-vector product; equals the densified product."""
    x = _as_vector(x, "x")
    if x.size != m.cols:
        raise ParameterError(f"shape mismatch: matrix {m.rows}x{m.cols} vs vector ({x.size},)")
    return kernels.active().block_sparse_gemv(m.row_blocks, m.block_cols, m.values, x, m.rows)


def _recurrent(w: WeightMatrix, h: np.ndarray) -> np.ndarray:
    k = kernels.active()
    if isinstance(w, BlockSparseMatrix):
        return k.block_sparse_gemv(w.row_blocks, w.block_cols, w.values, h, w.rows)
    return k.gemv_dense(w, h)


def gru_cell(h_prev, input_contrib, p: GruParams) -> np.ndarray:
    """One GRU step: h' = (1 - z) * h + z * tanh(i_h + r * (R_h h) + b_h)."""
    h = _as_vector(h_prev, "h_prev")
    if h.size != p.size:
        raise ParameterError(f"state length {h.size} != GRU size {p.size}")
    if len(input_contrib) != 3:
        raise ParameterError("input_contrib must hold one vector per gate (update, reset, cand)")
    iz, ir, ih = (_as_vector(c, "input_contrib") for c in input_contrib)
    if not iz.size == ir.size == ih.size == p.size:
        raise ParameterError("input contribution length does not match GRU size")
    rz = _recurrent(p.w_update, h)
    rr = _recurrent(p.w_reset, h)
    rh = _recurrent(p.w_cand, h)
    return kernels.active().gru_gates(
        iz, ir, ih, rz, rr, rh, p.b_update, p.b_reset, p.b_cand, h
    )


def dual_fc(x, p: DualFcParams) -> np.ndarray:
    """256 output logits from one dual fully-connected head."""
    x = _as_vector(x, "x")
    if x.size != p.in_dim:
        raise ParameterError(f"input length {x.size} != head input dim {p.in_dim}")
    return kernels.active().dual_fc(p.w1, p.w2, p.scale1, p.scale2, p.bias, x)


def embed_lookup_sum(
    indices: Sequence[tuple[str, int]],
    tables: Mapping[str, np.ndarray],
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Sum per-role embedding rows and split into the 3 gate contributions.

    Each table holds 256 rows of width 3*G (update/reset/candidate chunks
    concatenated); the summed row is split into the three gate vectors.
    Cost is O(len(indices) * width): no matrix product is formed.
    """
    if not indices:
        raise ParameterError("at least one (role, index) pair is required")
    width = None
    acc = None
    for role, idx in indices:
        if role not in tables:
            raise ParameterError(f"no embedding table for role {role!r}")
        table = tables[role]
        if table.ndim != 2 or table.shape[0] != ALPHABET or table.shape[1] % 3 != 0:
            raise ValidationError(
                f"table for role {role!r} must be ({ALPHABET}, 3*G), got {table.shape}"
            )
        if width is None:
            width = table.shape[1]
        elif table.shape[1] != width:
            raise ValidationError(f"table widths differ: {table.shape[1]} vs {width}")
        if not 0 <= idx < ALPHABET:
            raise ParameterError(f"index {idx} for role {role!r} outside [0, {ALPHABET})")
        row = table[idx]
        acc = row.astype(np.float64, copy=True) if acc is None else acc + row
    g = width // 3
    return acc[:g], acc[g : 2 * g], acc[2 * g :]


def sample_categorical(logits, temperature: float, rng) -> int:
    """Draw an index from softmax(logits / temperature).

    Temperatures below 1e-6 short-circuit to an exact argmax (ties broken
    toward the zero-excitation index 128, then toward lower indices)
    without consuming randomness.  Otherwise exactly one uniform draw is
    taken from `rng` (anything exposing ``random() -> float``).
    """
    logits = _as_vector(logits, "logits")
    if not np.all(np.isfinite(logits)):
        raise NumericError("logits contain non-finite values")
    if temperature < 0:
        raise ParameterError(f"temperature must be nonnegative, got {temperature}")
    k = kernels.active()
    if temperature < 1e-6:
        return int(k.argmax_band_zero(logits))
    return int(k.sample_from_logits(logits, float(temperature), float(rng.random())))
