"""NumPy implementation of the hot numeric kernels.

Mirrors the compiled backend in ``_cyimpl.pyx`` function for function.
All arrays are float64; block-sparse inputs must be sorted by
(row_block, col) so both backends accumulate in the same order.
"""

import numpy as np

BLOCK_ROWS = 16

NAME = "py"


def gemv_dense(m, x):
    return m @ x


def block_sparse_gemv(row_blocks, cols, values, x, n_rows):
    out = np.zeros(n_rows)
    if len(cols) == 0:
        return out
    contrib = values * x[cols][:, None]
    # row_blocks is sorted, so segments of equal row_block are contiguous
    boundaries = np.flatnonzero(np.diff(row_blocks)) + 1
    starts = np.concatenate(([0], boundaries))
    sums = np.add.reduceat(contrib, starts, axis=0)
    out2d = out.reshape(-1, BLOCK_ROWS)
    out2d[row_blocks[starts]] = sums
    return out


def gru_gates(iz, ir, ih, rz, rr, rh, bz, br, bh, h):
    z = _sigmoid(iz + rz + bz)
    r = _sigmoid(ir + rr + br)
    hc = np.tanh(ih + r * rh + bh)
    return (1.0 - z) * h + z * hc


def dual_fc(w1, w2, a1, a2, b, x):
    return a1 * np.tanh(w1 @ x) + a2 * np.tanh(w2 @ x) + b


def dual_fc_multi(w1s, w2s, a1s, a2s, bs, x):
    return a1s * np.tanh(w1s @ x) + a2s * np.tanh(w2s @ x) + bs


def embed_sum(stacked, indices):
    return stacked[np.arange(len(indices)), indices].sum(axis=0)


def sample_from_logits(logits, temperature, u):
    if temperature < 1e-6:
        return argmax_band_zero(logits)
    p = np.exp((logits - logits.max()) / temperature)
    c = np.cumsum(p)
    return min(int(np.searchsorted(c, u * c[-1], side="right")), logits.size - 1)


def argmax_band_zero(logits):
    """Argmax with ties broken toward the zero-excitation index 128."""
    m = logits.max()
    ties = np.flatnonzero(logits == m)
    return int(ties[np.argmin(np.abs(ties - 128))])


def lpc_predict(queue, coeffs):
    # queue holds the 16 most recent samples, newest last
    return float(np.dot(coeffs, queue[::-1]))


def _sigmoid(v):
    return 1.0 / (1.0 + np.exp(-v))
