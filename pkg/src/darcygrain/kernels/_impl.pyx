# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner-loop kernels: banded SPD Cholesky, gradient contraction, and
binary image counters.

Banded storage convention (column bands as rows, cache-friendly for the
trailing update): ab[j, k] = A[j + k, j], shape (n, bw + 1), C-contiguous.
All loops release the GIL so sample-level thread pools scale.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport sqrt

BACKEND = "compiled"


cdef int _cholesky_lower(double[:, ::1] ab) noexcept nogil:
    cdef Py_ssize_t n = ab.shape[0]
    cdef Py_ssize_t bw = ab.shape[1] - 1
    cdef Py_ssize_t j, k, i, kn
    cdef double ajj, ljk
    for j in range(n):
        ajj = ab[j, 0]
        if not ajj > 0.0:
            return <int>j + 1
        ajj = sqrt(ajj)
        ab[j, 0] = ajj
        kn = bw
        if n - 1 - j < kn:
            kn = n - 1 - j
        for i in range(1, kn + 1):
            ab[j, i] /= ajj
        for k in range(1, kn + 1):
            ljk = ab[j, k]
            for i in range(k, kn + 1):
                ab[j + k, i - k] -= ab[j, i] * ljk
    return 0


cdef void _solve_lower(double[:, ::1] ab, double[::1] b) noexcept nogil:
    cdef Py_ssize_t n = ab.shape[0]
    cdef Py_ssize_t bw = ab.shape[1] - 1
    cdef Py_ssize_t j, i, kn
    cdef double bj, acc
    # forward substitution L y = b
    for j in range(n):
        bj = b[j] / ab[j, 0]
        b[j] = bj
        kn = bw
        if n - 1 - j < kn:
            kn = n - 1 - j
        for i in range(1, kn + 1):
            b[j + i] -= ab[j, i] * bj
    # backward substitution L^T x = y
    for j in range(n - 1, -1, -1):
        kn = bw
        if n - 1 - j < kn:
            kn = n - 1 - j
        acc = b[j]
        for i in range(1, kn + 1):
            acc -= ab[j, i] * b[j + i]
        b[j] = acc / ab[j, 0]


def cholesky_banded_lower(double[:, ::1] ab):
    cdef int info
    with nogil:
        info = _cholesky_lower(ab)
    if info != 0:
        raise np.linalg.LinAlgError(
            f"banded matrix not positive definite (leading minor {info})")
    return np.asarray(ab)


def solve_banded_lower(double[:, ::1] ab, double[::1] b):
    with nogil:
        _solve_lower(ab, b)
    return np.asarray(b)


def cholesky_banded_batch(double[:, :, ::1] ab_batch):
    cdef Py_ssize_t s, ns = ab_batch.shape[0]
    cdef int info = 0
    with nogil:
        for s in range(ns):
            info = _cholesky_lower(ab_batch[s])
            if info != 0:
                break
    if info != 0:
        raise np.linalg.LinAlgError(
            f"banded matrix not positive definite (leading minor {info})")
    return np.asarray(ab_batch)


def solve_banded_batch(double[:, :, ::1] ab_batch, double[:, ::1] b_batch):
    cdef Py_ssize_t s, ns = ab_batch.shape[0]
    with nogil:
        for s in range(ns):
            _solve_lower(ab_batch[s], b_batch[s])
    return np.asarray(b_batch)


def cell_gradient_batch(double[:, ::1] uc, double[:, ::1] adj,
                        cnp.int64_t[:, ::1] elements, double[:, ::1] s4,
                        double[:, ::1] k_el, cnp.int64_t[::1] element_cell,
                        Py_ssize_t n_cells):
    """out[s, m] = -sum_{e in cell m} K_el[s,e] * adj_e^T S4 uc_e."""
    cdef Py_ssize_t S = uc.shape[0]
    cdef Py_ssize_t E = elements.shape[0]
    cdef Py_ssize_t s, e, a, b
    cdef double acc, ua
    out_arr = np.zeros((S, n_cells))
    cdef double[:, ::1] out = out_arr
    with nogil:
        for s in range(S):
            for e in range(E):
                acc = 0.0
                for a in range(4):
                    ua = adj[s, elements[e, a]]
                    if ua != 0.0:
                        for b in range(4):
                            acc += ua * s4[a, b] * uc[s, elements[e, b]]
                out[s, element_cell[e]] -= k_el[s, e] * acc
    return out_arr


def lineal_window_count(mask, Py_ssize_t k):
    cdef cnp.uint8_t[:, ::1] m = np.ascontiguousarray(mask, dtype=np.uint8)
    cdef Py_ssize_t h = m.shape[0], w = m.shape[1]
    cdef Py_ssize_t win = k + 1
    cdef long long hits = 0, total = 0
    cdef Py_ssize_t i, j, run
    with nogil:
        if w >= win:
            total += h * (w - win + 1)
            for i in range(h):
                run = 0
                for j in range(w):
                    if m[i, j]:
                        run += 1
                    else:
                        run = 0
                    if j >= win - 1 and run >= win:
                        hits += 1
        if h >= win:
            total += w * (h - win + 1)
            for j in range(w):
                run = 0
                for i in range(h):
                    if m[i, j]:
                        run += 1
                    else:
                        run = 0
                    if i >= win - 1 and run >= win:
                        hits += 1
    return int(hits), int(total)


def two_point_count(mask, Py_ssize_t k):
    cdef cnp.uint8_t[:, ::1] m = np.ascontiguousarray(mask, dtype=np.uint8)
    cdef Py_ssize_t h = m.shape[0], w = m.shape[1]
    cdef long long hits = 0, total = 0
    cdef Py_ssize_t i, j
    with nogil:
        if w > k or k == 0:
            total += h * (w - k)
            for i in range(h):
                for j in range(w - k):
                    if m[i, j] and m[i, j + k]:
                        hits += 1
        if h > k or k == 0:
            total += w * (h - k)
            for j in range(w):
                for i in range(h - k):
                    if m[i, j] and m[i + k, j]:
                        hits += 1
    return int(hits), int(total)


def chord_run_counts(mask):
    cdef cnp.uint8_t[:, ::1] m = np.ascontiguousarray(mask, dtype=np.uint8)
    cdef Py_ssize_t h = m.shape[0], w = m.shape[1]
    cdef Py_ssize_t maxlen = h if h > w else w
    counts_arr = np.zeros(maxlen + 1, dtype=np.int64)
    cdef long long[::1] counts = counts_arr
    cdef Py_ssize_t i, j, run
    with nogil:
        for i in range(h):
            run = 0
            for j in range(w):
                if m[i, j]:
                    run += 1
                elif run > 0:
                    counts[run] += 1
                    run = 0
            if run > 0:
                counts[run] += 1
        for j in range(w):
            run = 0
            for i in range(h):
                if m[i, j]:
                    run += 1
                elif run > 0:
                    counts[run] += 1
                    run = 0
            if run > 0:
                counts[run] += 1
    return counts_arr


def interface_edge_count(mask):
    cdef cnp.uint8_t[:, ::1] m = np.ascontiguousarray(mask, dtype=np.uint8)
    cdef Py_ssize_t h = m.shape[0], w = m.shape[1]
    cdef long long n = 0
    cdef Py_ssize_t i, j
    with nogil:
        for i in range(h):
            for j in range(w - 1):
                if m[i, j] != m[i, j + 1]:
                    n += 1
        for i in range(h - 1):
            for j in range(w):
                if m[i, j] != m[i + 1, j]:
                    n += 1
    return int(n)
