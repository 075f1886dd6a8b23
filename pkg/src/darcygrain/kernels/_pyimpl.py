"""NumPy/SciPy fallback for the compiled kernel module.

Same contracts as ``darcygrain.kernels._impl``: banded Cholesky routines use
LAPACK via scipy, image-statistics counters use vectorized numpy.  All counting
results are integer-exact and identical to the compiled backend.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import cho_solve_banded, cholesky_banded

BACKEND = "python"


# ---------------------------------------------------------------------------
# Banded SPD linear algebra (column-band rows: ab[j, k] = A[j + k, j])
# ---------------------------------------------------------------------------

def cholesky_banded_lower(ab: np.ndarray) -> np.ndarray:
    """In-place Cholesky factorization of a banded SPD matrix."""
    c = cholesky_banded(np.ascontiguousarray(ab.T), lower=True, check_finite=False)
    ab[...] = c.T
    return ab


def solve_banded_lower(ab: np.ndarray, b: np.ndarray) -> np.ndarray:
    """In-place solve L L^T x = b given the factor from cholesky_banded_lower."""
    x = cho_solve_banded((np.ascontiguousarray(ab.T), True), b, check_finite=False)
    b[...] = x
    return b


def cholesky_banded_batch(ab_batch: np.ndarray) -> np.ndarray:
    for s in range(ab_batch.shape[0]):
        cholesky_banded_lower(ab_batch[s])
    return ab_batch


def solve_banded_batch(ab_batch: np.ndarray, b_batch: np.ndarray) -> np.ndarray:
    for s in range(ab_batch.shape[0]):
        solve_banded_lower(ab_batch[s], b_batch[s])
    return b_batch


def cell_gradient_batch(uc, adj, elements, s4, k_el, element_cell, n_cells):
    """out[s, m] = -sum_{e in cell m} K_el[s,e] * adj_e^T S4 uc_e."""
    t = np.einsum("sea,ab,seb->se", adj[:, elements], s4, uc[:, elements])
    t = t * k_el
    out = np.zeros((uc.shape[0], n_cells))
    np.add.at(out.T, element_cell, t.T)
    return -out


# ---------------------------------------------------------------------------
# Binary image statistics (mask: 2-D uint8/bool, True = phase of interest)
# ---------------------------------------------------------------------------

def lineal_window_count(mask: np.ndarray, k: int):
    """Count windows of k+1 consecutive same-phase pixels, rows and columns pooled.

    Returns (hits, total) over both orientations.
    """
    m = np.ascontiguousarray(mask, dtype=np.uint8)
    h, w = m.shape
    win = k + 1
    hits = 0
    total = 0
    for axis, extent, other in ((1, w, h), (0, h, w)):
        if extent >= win:
            cs = np.cumsum(m, axis=axis, dtype=np.int64)
            pad_shape = (h, 1) if axis == 1 else (1, w)
            cs = np.concatenate([np.zeros(pad_shape, np.int64), cs], axis=axis)
            if axis == 1:
                sums = cs[:, win:] - cs[:, :-win]
            else:
                sums = cs[win:, :] - cs[:-win, :]
            hits += int(np.count_nonzero(sums == win))
            total += other * (extent - win + 1)
    return hits, total


def two_point_count(mask: np.ndarray, k: int):
    """Count pixel pairs at offset k (rows and columns pooled) with both in phase."""
    m = np.ascontiguousarray(mask, dtype=bool)
    h, w = m.shape
    if k == 0:
        c = int(np.count_nonzero(m))
        return 2 * c, 2 * h * w
    hits = 0
    total = 0
    if w > k:
        hits += int(np.count_nonzero(m[:, :-k] & m[:, k:]))
        total += h * (w - k)
    if h > k:
        hits += int(np.count_nonzero(m[:-k, :] & m[k:, :]))
        total += w * (h - k)
    return hits, total


def _run_lengths_1d(rows: np.ndarray) -> np.ndarray:
    h, w = rows.shape
    padded = np.zeros((h, w + 2), np.int8)
    padded[:, 1:-1] = rows
    d = np.diff(padded, axis=1)
    start_cols = np.nonzero(d == 1)[1]
    end_cols = np.nonzero(d == -1)[1]
    return end_cols - start_cols


def chord_run_counts(mask: np.ndarray) -> np.ndarray:
    """Histogram of maximal same-phase run lengths along rows and columns.

    Returns int64 counts indexed by run length (entry 0 unused).
    """
    m = np.ascontiguousarray(mask, dtype=np.int8)
    h, w = m.shape
    maxlen = max(h, w)
    lengths = np.concatenate([_run_lengths_1d(m), _run_lengths_1d(m.T)])
    return np.bincount(lengths, minlength=maxlen + 1).astype(np.int64)


def interface_edge_count(mask: np.ndarray) -> int:
    """Number of 4-neighbor pixel pairs with differing phase."""
    m = np.ascontiguousarray(mask, dtype=bool)
    n = int(np.count_nonzero(m[:, 1:] != m[:, :-1]))
    n += int(np.count_nonzero(m[1:, :] != m[:-1, :]))
    return n
