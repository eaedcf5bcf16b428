# cython: language_level=3
"""Compiled hot loops: block-sparse matvec and the closed-loop MB-LP recursion.

Arithmetic order matches ``_fallback.py`` exactly; both are compiled without
FMA contraction so the two backends agree bit for bit.
"""

import numpy as np
cimport numpy as cnp
from cython.parallel cimport prange
from libc.math cimport log1p, floor, fabs, copysign

cnp.import_array()

ctypedef fused real:
    float
    double


DEF MAX_BLOCK = 64


def bsr_matvec(const long long[::1] row_ptr, const long long[::1] col_idx,
               const real[:, ::1] values, const real[::1] x, real[::1] out,
               int threads=1):
    """out[block_row*R + i] = sum over blocks of values[blk, i] * x[col], ascending column."""
    cdef Py_ssize_t n_brows = row_ptr.shape[0] - 1
    cdef Py_ssize_t R = values.shape[1]
    cdef Py_ssize_t br
    if R > MAX_BLOCK:
        raise ValueError(f"block height {R} exceeds {MAX_BLOCK}")
    if values.shape[0] == 0:
        out[:] = 0
        return
    if threads <= 1:
        for br in range(n_brows):
            _bsr_row(&row_ptr[0], &col_idx[0], &values[0, 0], &x[0], &out[0], br, R)
    else:
        for br in prange(n_brows, nogil=True, num_threads=threads, schedule="static"):
            _bsr_row(&row_ptr[0], &col_idx[0], &values[0, 0], &x[0], &out[0], br, R)


cdef inline void _bsr_row(const long long* row_ptr, const long long* col_idx,
                          const real* values, const real* x, real* out,
                          Py_ssize_t br, Py_ssize_t R) noexcept nogil:
    # local accumulator: no aliasing with the inputs, so the lane loop vectorises
    cdef real acc[MAX_BLOCK]
    cdef const real* v
    cdef Py_ssize_t p, i
    cdef real xv
    for i in range(R):
        acc[i] = 0
    if R == 16:
        # constant trip count lets the compiler emit full-width vector code
        for p in range(row_ptr[br], row_ptr[br + 1]):
            xv = x[col_idx[p]]
            v = values + p * 16
            for i in range(16):
                acc[i] = acc[i] + v[i] * xv
    else:
        for p in range(row_ptr[br], row_ptr[br + 1]):
            xv = x[col_idx[p]]
            v = values + p * R
            for i in range(R):
                acc[i] = acc[i] + v[i] * xv
    for i in range(R):
        out[br * R + i] = acc[i]


cdef inline long long _encode(double x, double mu, long long levels) noexcept nogil:
    cdef double comp
    cdef long long idx
    if x > 1.0:
        x = 1.0
    elif x < -1.0:
        x = -1.0
    comp = copysign(log1p(mu * fabs(x)) / log1p(mu), x)
    idx = <long long>floor((comp + 1.0) * 0.5 * levels)
    if idx < 0:
        idx = 0
    elif idx > levels - 1:
        idx = levels - 1
    return idx


cdef inline double _predict(const double[::1] hist, const double[::1] a,
                            Py_ssize_t M) noexcept nogil:
    cdef double acc = 0.0
    cdef Py_ssize_t k
    for k in range(M):
        acc = acc + a[k] * hist[k]
    return acc


cdef inline void _push(double[::1] hist, double v, Py_ssize_t M) noexcept nogil:
    cdef Py_ssize_t k
    for k in range(M - 1, 0, -1):
        hist[k] = hist[k - 1]
    hist[0] = v


def lp_prepare(const double[:, ::1] g, const double[:, :, ::1] coeffs, int repeat,
               const double[::1] table, double mu, double[:, ::1] hist):
    """Closed-loop excitation extraction; ``hist`` (bands, M) is updated in place."""
    cdef Py_ssize_t B = g.shape[0], S = g.shape[1], M = coeffs.shape[2]
    cdef long long levels = table.shape[0]
    e_idx_arr = np.empty((B, S), dtype=np.int64)
    pred_arr = np.empty((B, S), dtype=np.float64)
    recon_arr = np.empty((B, S), dtype=np.float64)
    cdef long long[:, ::1] e_idx = e_idx_arr
    cdef double[:, ::1] pred = pred_arr
    cdef double[:, ::1] recon = recon_arr
    cdef Py_ssize_t n, b, frame
    cdef double p, gr
    cdef long long ei
    with nogil:
        for n in range(S):
            frame = n // repeat
            for b in range(B):
                p = _predict(hist[b], coeffs[frame, b], M)
                ei = _encode(g[b, n] - p, mu, levels)
                gr = p + table[ei]
                pred[b, n] = p
                e_idx[b, n] = ei
                recon[b, n] = gr
                _push(hist[b], gr, M)
    return e_idx_arr, pred_arr, recon_arr


def lp_replay(const long long[:, ::1] e_idx, const double[:, :, ::1] coeffs, int repeat,
              const double[::1] table, double[:, ::1] hist):
    """Rebuild subband samples from excitation indices; ``hist`` updated in place."""
    cdef Py_ssize_t B = e_idx.shape[0], S = e_idx.shape[1], M = coeffs.shape[2]
    cdef long long levels = table.shape[0]
    recon_arr = np.empty((B, S), dtype=np.float64)
    cdef double[:, ::1] recon = recon_arr
    cdef Py_ssize_t n, b, frame
    cdef double gr
    cdef long long ei
    for n in range(S):
        for b in range(B):
            ei = e_idx[b, n]
            if ei < 0 or ei >= levels:
                raise IndexError(f"excitation index {ei} out of range")
    with nogil:
        for n in range(S):
            frame = n // repeat
            for b in range(B):
                gr = _predict(hist[b], coeffs[frame, b], M) + table[e_idx[b, n]]
                recon[b, n] = gr
                _push(hist[b], gr, M)
    return recon_arr


def lp_predict(const double[:, ::1] hist, const double[:, ::1] coeffs):
    """Per-band prediction for one step: ``coeffs`` is (bands, M)."""
    cdef Py_ssize_t B = hist.shape[0], M = hist.shape[1], b
    out_arr = np.empty(B, dtype=np.float64)
    cdef double[::1] out = out_arr
    for b in range(B):
        out[b] = _predict(hist[b], coeffs[b], M)
    return out_arr


def lp_push(double[:, ::1] hist, const double[::1] values):
    cdef Py_ssize_t B = hist.shape[0], M = hist.shape[1], b
    for b in range(B):
        _push(hist[b], values[b], M)
