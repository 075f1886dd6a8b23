"""Bilinear quadrilateral FEM helpers on regular unit-square grids.

Conventions used package-wide:
  - an n x n element grid has (n+1)^2 nodes, node(iy, ix) = iy*(n+1) + ix,
    coordinates (ix*h, iy*h) with h = 1/n;
  - element(ey, ex) = ey*n + ex with local node order [SW, SE, NE, NW];
  - the pressure is anchored at the origin node (id 0), reduced systems drop
    that row/column.

The diffusion element stiffness on a square is scale-invariant in 2-D, so a
single unit-permeability matrix serves every grid size.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np
import scipy.sparse as sp

_GAUSS = 1.0 / np.sqrt(3.0)


def _shape_gradients(xi: float, eta: float) -> np.ndarray:
    """Reference-element gradients of the 4 bilinear shape functions."""
    return 0.25 * np.array(
        [
            [-(1 - eta), -(1 - xi)],
            [(1 - eta), -(1 + xi)],
            [(1 + eta), (1 + xi)],
            [-(1 + eta), (1 - xi)],
        ]
    )


@lru_cache(maxsize=1)
def unit_stiffness() -> np.ndarray:
    """4x4 element stiffness for K = 1 (2x2 Gauss quadrature, exact here)."""
    S = np.zeros((4, 4))
    for xi in (-_GAUSS, _GAUSS):
        for eta in (-_GAUSS, _GAUSS):
            G = _shape_gradients(xi, eta)
            S += G @ G.T
    S.setflags(write=False)
    return S


def shape_values(xi: float, eta: float) -> np.ndarray:
    return 0.25 * np.array(
        [
            (1 - xi) * (1 - eta),
            (1 + xi) * (1 - eta),
            (1 + xi) * (1 + eta),
            (1 - xi) * (1 + eta),
        ]
    )


def element_nodes(n: int) -> np.ndarray:
    """(n*n, 4) global node ids per element, local order [SW, SE, NE, NW]."""
    ex, ey = np.meshgrid(np.arange(n), np.arange(n))
    ex = ex.ravel()
    ey = ey.ravel()
    sw = ey * (n + 1) + ex
    return np.column_stack([sw, sw + 1, sw + n + 2, sw + n + 1])


def node_coords(n: int) -> np.ndarray:
    """((n+1)^2, 2) node coordinates in row-major (iy, ix) order."""
    h = 1.0 / n
    ix, iy = np.meshgrid(np.arange(n + 1), np.arange(n + 1))
    return np.column_stack([ix.ravel() * h, iy.ravel() * h])


def boundary_flux_load(n: int, bc) -> np.ndarray:
    """Consistent load from the prescribed boundary normal velocity.

    bc = (a_x, a_y, a_xy) defines V_bc = (a_x + a_xy*y, a_y + a_xy*x); the
    load is b_i = -int_Gamma (V_bc . n) psi_i ds, integrated edge-by-edge with
    2-point Gauss (exact for the linear integrand).
    """
    a_x, a_y, a_xy = bc
    h = 1.0 / n
    b = np.zeros((n + 1) * (n + 1))
    ts = np.array([-_GAUSS, _GAUSS])
    psi = np.column_stack([(1 - ts) / 2, (1 + ts) / 2])  # (gauss, edge node)
    edge_s = np.arange(n)[:, None] * h + (ts[None, :] + 1) * (h / 2)  # (n, gauss)

    def accumulate(node_a, node_b, vn):
        # vn: (n, gauss) values of V_bc . n at the Gauss points
        contrib = -(h / 2) * vn  # includes ds Jacobian and unit Gauss weights
        np.add.at(b, node_a, contrib @ psi[:, 0])
        np.add.at(b, node_b, contrib @ psi[:, 1])

    idx = np.arange(n)
    # bottom edge y=0, outward normal (0,-1): V.n = -(a_y + a_xy*x)
    accumulate(idx, idx + 1, -(a_y + a_xy * edge_s))
    # top edge y=1, normal (0,1)
    top = n * (n + 1)
    accumulate(top + idx, top + idx + 1, a_y + a_xy * edge_s)
    # left edge x=0, normal (-1,0): V.n = -(a_x + a_xy*y)
    accumulate(idx * (n + 1), (idx + 1) * (n + 1), -(a_x + a_xy * edge_s))
    # right edge x=1, normal (1,0)
    accumulate(idx * (n + 1) + n, (idx + 1) * (n + 1) + n, a_x + a_xy * edge_s)
    return b


class GridAssembler:
    """Precomputed assembly maps for -div(K grad P) on an n x n grid.

    The global matrix is linear in the per-element permeabilities, so assembly
    reduces to one sparse matrix-vector product per stiffness: CSR data or
    banded storage equals ``map @ K_elements``.
    """

    def __init__(self, n: int):
        self.n = n
        self.n_nodes = (n + 1) * (n + 1)
        self.n_free = self.n_nodes - 1  # origin node anchored
        self.bandwidth = n + 2
        self.elements = element_nodes(n)
        S = unit_stiffness()

        E = n * n
        i_idx, j_idx, vals, e_idx = [], [], [], []
        for a in range(4):
            for bb in range(4):
                i_idx.append(self.elements[:, a])
                j_idx.append(self.elements[:, bb])
                vals.append(np.full(E, S[a, bb]))
                e_idx.append(np.arange(E))
        i_idx = np.concatenate(i_idx)
        j_idx = np.concatenate(j_idx)
        vals = np.concatenate(vals)
        e_idx = np.concatenate(e_idx)

        # full CSR pattern (row-major unique keys are already CSR-ordered)
        keys = i_idx * self.n_nodes + j_idx
        uniq, inv = np.unique(keys, return_inverse=True)
        self._csr_map = sp.csr_matrix(
            (vals, (inv, e_idx)), shape=(uniq.size, E)
        )
        self._csr_indices = (uniq % self.n_nodes).astype(np.int32)
        rows = uniq // self.n_nodes
        counts = np.bincount(rows, minlength=self.n_nodes)
        self._csr_indptr = np.concatenate([[0], np.cumsum(counts)]).astype(np.int32)

        # reduced CSR (anchor dropped)
        keep = (i_idx != 0) & (j_idx != 0)
        ri, rj = i_idx[keep] - 1, j_idx[keep] - 1
        rkeys = ri * self.n_free + rj
        runiq, rinv = np.unique(rkeys, return_inverse=True)
        self._red_map = sp.csr_matrix(
            (vals[keep], (rinv, e_idx[keep])), shape=(runiq.size, E)
        )
        self._red_indices = (runiq % self.n_free).astype(np.int32)
        rrows = runiq // self.n_free
        rcounts = np.bincount(rrows, minlength=self.n_free)
        self._red_indptr = np.concatenate([[0], np.cumsum(rcounts)]).astype(np.int32)

        # reduced banded storage (column bands as rows): ab[j, k] = A[j+k, j]
        lower = keep & (i_idx >= j_idx)
        bi, bj = i_idx[lower] - 1, j_idx[lower] - 1
        flat = bj * (self.bandwidth + 1) + (bi - bj)
        self._band_map = sp.csr_matrix(
            (vals[lower], (flat, e_idx[lower])),
            shape=(self.n_free * (self.bandwidth + 1), E),
        )

    def assemble_csr(self, k_el: np.ndarray) -> sp.csr_matrix:
        data = self._csr_map @ k_el
        return sp.csr_matrix(
            (data, self._csr_indices, self._csr_indptr),
            shape=(self.n_nodes, self.n_nodes),
        )

    def assemble_csr_reduced(self, k_el: np.ndarray) -> sp.csr_matrix:
        data = self._red_map @ k_el
        return sp.csr_matrix(
            (data, self._red_indices, self._red_indptr),
            shape=(self.n_free, self.n_free),
        )

    def assemble_banded(self, k_el: np.ndarray) -> np.ndarray:
        """Reduced system in column-band storage, shape (n_free, bw+1)."""
        return np.ascontiguousarray(
            (self._band_map @ k_el).reshape(self.n_free, self.bandwidth + 1)
        )

    def assemble_banded_batch(self, k_el_batch: np.ndarray) -> np.ndarray:
        """Batch variant: (S, n_el^2) -> (S, n_free, bw+1)."""
        data = self._band_map @ k_el_batch.T  # (n_free*(bw+1), S)
        out = data.T.reshape(k_el_batch.shape[0], self.n_free, self.bandwidth + 1)
        return np.ascontiguousarray(out)


@lru_cache(maxsize=8)
def grid_assembler(n: int) -> GridAssembler:
    return GridAssembler(n)
