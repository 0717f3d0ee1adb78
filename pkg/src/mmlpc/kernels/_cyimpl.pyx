# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled implementation of the hot numeric kernels.

Mirrors ``_pyimpl.py`` function for function; plain sequential loops in
double precision so results are reproducible across platforms.
"""

import numpy as np

from libc.math cimport exp, tanh

BLOCK_ROWS = 16

NAME = "ext"


def gemv_dense(double[:, ::1] m, double[::1] x):
    cdef Py_ssize_t rows = m.shape[0]
    cdef Py_ssize_t cols = m.shape[1]
    cdef Py_ssize_t i, j
    cdef double acc
    out_arr = np.empty(rows)
    cdef double[::1] out = out_arr
    for i in range(rows):
        acc = 0.0
        for j in range(cols):
            acc += m[i, j] * x[j]
        out[i] = acc
    return out_arr


def block_sparse_gemv(int[::1] row_blocks, int[::1] cols, double[:, ::1] values,
                      double[::1] x, Py_ssize_t n_rows):
    cdef Py_ssize_t nb = row_blocks.shape[0]
    cdef Py_ssize_t b, i, base
    cdef double xv
    out_arr = np.zeros(n_rows)
    cdef double[::1] out = out_arr
    for b in range(nb):
        base = row_blocks[b] * BLOCK_ROWS
        xv = x[cols[b]]
        for i in range(16):
            out[base + i] += values[b, i] * xv
    return out_arr


def gru_gates(double[::1] iz, double[::1] ir, double[::1] ih,
              double[::1] rz, double[::1] rr, double[::1] rh,
              double[::1] bz, double[::1] br, double[::1] bh,
              double[::1] h):
    cdef Py_ssize_t n = h.shape[0]
    cdef Py_ssize_t i
    cdef double z, r, hc
    out_arr = np.empty(n)
    cdef double[::1] out = out_arr
    for i in range(n):
        z = 1.0 / (1.0 + exp(-(iz[i] + rz[i] + bz[i])))
        r = 1.0 / (1.0 + exp(-(ir[i] + rr[i] + br[i])))
        hc = tanh(ih[i] + r * rh[i] + bh[i])
        out[i] = (1.0 - z) * h[i] + z * hc
    return out_arr


def dual_fc(double[:, ::1] w1, double[:, ::1] w2, double[::1] a1, double[::1] a2,
            double[::1] b, double[::1] x):
    cdef Py_ssize_t rows = w1.shape[0]
    cdef Py_ssize_t cols = w1.shape[1]
    cdef Py_ssize_t i, j
    cdef double acc1, acc2
    out_arr = np.empty(rows)
    cdef double[::1] out = out_arr
    for i in range(rows):
        acc1 = 0.0
        acc2 = 0.0
        for j in range(cols):
            acc1 += w1[i, j] * x[j]
            acc2 += w2[i, j] * x[j]
        out[i] = a1[i] * tanh(acc1) + a2[i] * tanh(acc2) + b[i]
    return out_arr


def dual_fc_multi(double[:, :, ::1] w1s, double[:, :, ::1] w2s, double[:, ::1] a1s,
                  double[:, ::1] a2s, double[:, ::1] bs, double[::1] x):
    cdef Py_ssize_t heads = w1s.shape[0]
    cdef Py_ssize_t rows = w1s.shape[1]
    cdef Py_ssize_t cols = w1s.shape[2]
    cdef Py_ssize_t hh, i, j
    cdef double acc1, acc2
    out_arr = np.empty((heads, rows))
    cdef double[:, ::1] out = out_arr
    for hh in range(heads):
        for i in range(rows):
            acc1 = 0.0
            acc2 = 0.0
            for j in range(cols):
                acc1 += w1s[hh, i, j] * x[j]
                acc2 += w2s[hh, i, j] * x[j]
            out[hh, i] = a1s[hh, i] * tanh(acc1) + a2s[hh, i] * tanh(acc2) + bs[hh, i]
    return out_arr


def embed_sum(double[:, :, ::1] stacked, int[::1] indices):
    cdef Py_ssize_t n_roles = stacked.shape[0]
    cdef Py_ssize_t width = stacked.shape[2]
    cdef Py_ssize_t r, j, row
    out_arr = np.zeros(width)
    cdef double[::1] out = out_arr
    for r in range(n_roles):
        row = indices[r]
        for j in range(width):
            out[j] += stacked[r, row, j]
    return out_arr


def sample_from_logits(double[::1] logits, double temperature, double u):
    cdef Py_ssize_t n = logits.shape[0]
    cdef Py_ssize_t i
    cdef double m, total, acc, thresh
    if temperature < 1e-6:
        return argmax_band_zero(logits)
    m = logits[0]
    for i in range(1, n):
        if logits[i] > m:
            m = logits[i]
    total = 0.0
    for i in range(n):
        total += exp((logits[i] - m) / temperature)
    thresh = u * total
    acc = 0.0
    for i in range(n):
        acc += exp((logits[i] - m) / temperature)
        if acc > thresh:
            return i
    return n - 1


def argmax_band_zero(double[::1] logits):
    cdef Py_ssize_t n = logits.shape[0]
    cdef Py_ssize_t i, best = 0
    cdef double m = logits[0]
    cdef long dist_i, dist_best
    for i in range(1, n):
        if logits[i] > m:
            m = logits[i]
            best = i
        elif logits[i] == m:
            dist_i = i - 128 if i >= 128 else 128 - i
            dist_best = best - 128 if best >= 128 else 128 - best
            if dist_i < dist_best:
                best = i
    return best


def lpc_predict(double[::1] queue, double[::1] coeffs):
    cdef Py_ssize_t n = coeffs.shape[0]
    cdef Py_ssize_t k
    cdef double acc = 0.0
    for k in range(n):
        acc += coeffs[k] * queue[n - 1 - k]
    return acc
