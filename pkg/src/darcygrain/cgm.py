"""Coarse Darcy stencil: partition, FEM solve, interpolation matrix, adjoints.

The coarse model solves -div(exp(lambda_m) grad P) = 0 on an n x n bilinear
grid with prescribed boundary normal velocity and the pressure anchored at the
origin node.  The permeability is piecewise constant on an axis-aligned cell
partition whose bounds coincide with element-grid lines, so permeability cells
and FEM elements stay nested under quadtree splits.

Solves use banded Cholesky (the reduced matrix has bandwidth n+2); gradients
of linear functionals w^T uc cost one extra back-substitution via the adjoint
system, independent of dim(lambda).
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import fem, kernels
from .errors import SolverError, ValidationError


@dataclass(frozen=True)
class Cell:
    """Axis-aligned cell on the element grid; bounds are element indices."""

    id: int
    ex0: int
    ey0: int
    ex1: int
    ey1: int
    parent: int | None = None

    def domain_box(self, n_el: int):
        return (self.ex0 / n_el, self.ey0 / n_el, self.ex1 / n_el, self.ey1 / n_el)


class Partition:
    """Disjoint cover of the unit square by element-aligned rectangles."""

    def __init__(self, n_el: int, cells):
        self.n_el = n_el
        self.cells = list(cells)
        self._validate()

    @classmethod
    def regular(cls, n_el: int, shape) -> "Partition":
        ny, nx = (shape, shape) if isinstance(shape, int) else shape
        if n_el % nx or n_el % ny:
            raise ValidationError(f"{ny}x{nx} partition does not align with a {n_el} element grid")
        sx, sy = n_el // nx, n_el // ny
        cells = []
        for cy in range(ny):
            for cx in range(nx):
                cells.append(Cell(len(cells), cx * sx, cy * sy, (cx + 1) * sx, (cy + 1) * sy))
        return cls(n_el, cells)

    def _validate(self) -> None:
        paint = np.zeros((self.n_el, self.n_el), dtype=np.int64)
        ids = set()
        for c in self.cells:
            if c.id in ids:
                raise ValidationError(f"duplicate cell id {c.id}")
            ids.add(c.id)
            if not (0 <= c.ex0 < c.ex1 <= self.n_el and 0 <= c.ey0 < c.ey1 <= self.n_el):
                raise ValidationError(f"cell {c.id} bounds outside the element grid")
            paint[c.ey0 : c.ey1, c.ex0 : c.ex1] += 1
        if not np.all(paint == 1):
            raise ValidationError("cells must cover the element grid exactly once")

    @property
    def n_cells(self) -> int:
        return len(self.cells)

    def cell_boxes(self):
        return [c.domain_box(self.n_el) for c in self.cells]

    def element_cell_index(self) -> np.ndarray:
        """(n_el^2,) map from element id to cell position in the lambda vector."""
        out = np.empty(self.n_el * self.n_el, dtype=np.int64)
        for pos, c in enumerate(self.cells):
            for ey in range(c.ey0, c.ey1):
                out[ey * self.n_el + c.ex0 : ey * self.n_el + c.ex1] = pos
        return out

    def position_of(self, cell_id: int) -> int:
        for pos, c in enumerate(self.cells):
            if c.id == cell_id:
                return pos
        raise ValidationError(f"no cell with id {cell_id}")

    def split(self, cell_id: int):
        """Replace a cell by its 4 equal quadrants.

        Returns (new_partition, parent_of) where parent_of[new_pos] is the old
        position every new position inherits from (children map to the parent).
        """
        pos = self.position_of(cell_id)
        c = self.cells[pos]
        w, h = c.ex1 - c.ex0, c.ey1 - c.ey0
        if w < 2 or h < 2 or w % 2 or h % 2:
            raise ValidationError(
                f"cannot refine cell {cell_id} below the FEM grid (footprint {w}x{h} elements)"
            )
        mx, my = c.ex0 + w // 2, c.ey0 + h // 2
        next_id = max(cc.id for cc in self.cells) + 1
        children = [
            Cell(next_id + 0, c.ex0, c.ey0, mx, my, parent=c.id),
            Cell(next_id + 1, mx, c.ey0, c.ex1, my, parent=c.id),
            Cell(next_id + 2, c.ex0, my, mx, c.ey1, parent=c.id),
            Cell(next_id + 3, mx, my, c.ex1, c.ey1, parent=c.id),
        ]
        cells = self.cells[:pos] + children + self.cells[pos + 1 :]
        parent_of = (
            list(range(pos)) + [pos] * 4 + list(range(pos + 1, len(self.cells)))
        )
        return Partition(self.n_el, cells), parent_of

    def to_json(self) -> dict:
        return {
            "n_el": self.n_el,
            "cells": [
                {"id": c.id, "ex0": c.ex0, "ey0": c.ey0, "ex1": c.ex1, "ey1": c.ey1,
                 "parent": c.parent}
                for c in self.cells
            ],
        }

    @classmethod
    def from_json(cls, d: dict) -> "Partition":
        cells = [
            Cell(c["id"], c["ex0"], c["ey0"], c["ex1"], c["ey1"], c.get("parent"))
            for c in d["cells"]
        ]
        return cls(d["n_el"], cells)

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh, indent=1)

    @classmethod
    def load(cls, path) -> "Partition":
        with open(path) as fh:
            return cls.from_json(json.load(fh))


def split_cell(partition: Partition, cell_id: int) -> Partition:
    return partition.split(cell_id)[0]


def build_W(n_el: int, fine_points: np.ndarray) -> sp.csr_matrix:
    """Shape-function interpolation matrix, W[i, j] = psi_j(x_i).

    fine_points: (n, 2) coordinates in [0,1]^2.  Rows have at most 4 nonzeros
    and sum to 1 (bilinear partition of unity).
    """
    pts = np.asarray(fine_points, dtype=float)
    if pts.min() < 0 or pts.max() > 1:
        raise ValidationError("interpolation points must lie in [0,1]^2")
    h = 1.0 / n_el
    ex = np.minimum((pts[:, 0] // h).astype(int), n_el - 1)
    ey = np.minimum((pts[:, 1] // h).astype(int), n_el - 1)
    xi = 2.0 * (pts[:, 0] / h - ex) - 1.0
    eta = 2.0 * (pts[:, 1] / h - ey) - 1.0
    vals = 0.25 * np.column_stack(
        [
            (1 - xi) * (1 - eta),
            (1 + xi) * (1 - eta),
            (1 + xi) * (1 + eta),
            (1 - xi) * (1 + eta),
        ]
    )
    sw = ey * (n_el + 1) + ex
    cols = np.column_stack([sw, sw + 1, sw + n_el + 2, sw + n_el + 1])
    rows = np.repeat(np.arange(pts.shape[0]), 4)
    W = sp.csr_matrix(
        (vals.ravel(), (rows, cols.ravel())),
        shape=(pts.shape[0], (n_el + 1) ** 2),
    )
    W.eliminate_zeros()
    return W


def fine_node_grid(g: int) -> np.ndarray:
    """(g*g, 2) row-major node coordinates of a regular g x g point grid."""
    xs = np.linspace(0.0, 1.0, g)
    gx, gy = np.meshgrid(xs, xs)
    return np.column_stack([gx.ravel(), gy.ravel()])


@dataclass
class CoarseSolution:
    uc: np.ndarray  # full nodal vector, anchored entry exactly 0
    anchored_node: int
    diagnostics: dict


class CoarseModel:
    """Immutable coarse Darcy discretization for one boundary condition."""

    def __init__(self, n_el: int, partition: Partition, bc, fine_grid: int):
        if partition.n_el != n_el:
            raise ValidationError("partition does not match the element grid")
        self.n_el = n_el
        self.partition = partition
        self.bc = tuple(float(a) for a in bc)
        self.fine_grid = fine_grid
        self.assembler = fem.grid_assembler(n_el)
        self.element_cell = partition.element_cell_index()
        self._element_cell_i64 = np.ascontiguousarray(self.element_cell, dtype=np.int64)
        self._elements_i64 = np.ascontiguousarray(self.assembler.elements, dtype=np.int64)
        self.W = build_W(n_el, fine_node_grid(fine_grid))
        self.W_T = self.W.T.tocsr()
        self._load = fem.boundary_flux_load(n_el, self.bc)[1:]

    @property
    def n_nodes(self) -> int:
        return self.assembler.n_nodes

    @property
    def n_free_dofs(self) -> int:
        return self.assembler.n_free

    @property
    def n_cells(self) -> int:
        return self.partition.n_cells

    def with_partition(self, partition: Partition) -> "CoarseModel":
        return CoarseModel(self.n_el, partition, self.bc, self.fine_grid)

    def with_bc(self, bc) -> "CoarseModel":
        return CoarseModel(self.n_el, self.partition, bc, self.fine_grid)

    def permeability_field(self, lambda_c: np.ndarray) -> np.ndarray:
        """Per-element isotropic permeability exp(lambda) mapped through cells."""
        lam = np.asarray(lambda_c, dtype=float)
        if lam.shape != (self.n_cells,):
            raise ValidationError(
                f"lambda_c has dim {lam.shape}, partition has {self.n_cells} cells"
            )
        return np.exp(lam)[self.element_cell]

    def _factor(self, lambda_c: np.ndarray) -> np.ndarray:
        k_el = self.permeability_field(lambda_c)
        if not np.all(np.isfinite(k_el)):
            raise SolverError("non-finite permeability field")
        ab = self.assembler.assemble_banded(k_el)
        try:
            kernels.cholesky_banded_lower(ab)
        except np.linalg.LinAlgError as exc:
            raise SolverError(f"coarse stiffness not SPD: {exc}") from exc
        return ab

    def solve(self, lambda_c: np.ndarray) -> CoarseSolution:
        ab = self._factor(lambda_c)
        x = self._load.copy()
        kernels.solve_banded_lower(ab, x)
        uc = np.concatenate([[0.0], x])
        if not np.all(np.isfinite(uc)):
            raise SolverError("coarse solve produced non-finite pressures")
        return CoarseSolution(
            uc=uc,
            anchored_node=0,
            diagnostics={"solver": "banded-cholesky", "n_free_dofs": self.n_free_dofs},
        )

    def solve_batch(self, lam_batch: np.ndarray) -> np.ndarray:
        """(S, n_cells) -> (S, n_nodes) nodal pressures; anchor column is 0."""
        ab, uc = self._factor_solve_batch(lam_batch)
        return uc

    def _factor_solve_batch(self, lam_batch: np.ndarray):
        lam_batch = np.asarray(lam_batch, dtype=float)
        S = lam_batch.shape[0]
        if not np.all(np.isfinite(lam_batch)):
            raise SolverError("non-finite latent permeability sample")
        k_el = np.exp(lam_batch)[:, self.element_cell]
        ab = self.assembler.assemble_banded_batch(k_el)
        try:
            kernels.cholesky_banded_batch(ab)
        except np.linalg.LinAlgError as exc:
            raise SolverError(f"coarse stiffness not SPD: {exc}") from exc
        rhs = np.ascontiguousarray(np.broadcast_to(self._load, (S, self._load.size)).copy())
        kernels.solve_banded_batch(ab, rhs)
        uc = np.concatenate([np.zeros((S, 1)), rhs], axis=1)
        return ab, uc

    def _adjoint_solve_batch(self, ab_factored: np.ndarray, w_full: np.ndarray) -> np.ndarray:
        """Solve A adj = w for each factored system; w given on full nodes."""
        rhs = np.array(w_full[:, 1:], dtype=float, copy=True, order="C")
        kernels.solve_banded_batch(ab_factored, rhs)
        return np.concatenate([np.zeros((rhs.shape[0], 1)), rhs], axis=1)

    def _grad_from_solutions(
        self, lam_batch: np.ndarray, uc: np.ndarray, adj: np.ndarray
    ) -> np.ndarray:
        """d(w^T uc)/d lambda_m = -sum_{e in m} K_e adj_e^T S uc_e, batched."""
        k_el = np.exp(lam_batch)[:, self.element_cell]
        return kernels.cell_gradient_batch(
            np.ascontiguousarray(uc),
            np.ascontiguousarray(adj),
            self._elements_i64,
            np.ascontiguousarray(fem.unit_stiffness()),
            np.ascontiguousarray(k_el),
            self._element_cell_i64,
            self.n_cells,
        )

    def solve_batch_with_pullback(self, lam_batch: np.ndarray):
        """Forward solves plus a vector-Jacobian closure reusing the factors.

        Returns (uc_batch, pullback) where pullback(w_full_batch) yields the
        per-sample gradients of w^T uc at one back-substitution each.
        """
        lam_batch = np.asarray(lam_batch, dtype=float)
        ab, uc = self._factor_solve_batch(lam_batch)

        def pullback(w_full_batch: np.ndarray) -> np.ndarray:
            adj = self._adjoint_solve_batch(ab, w_full_batch)
            return self._grad_from_solutions(lam_batch, uc, adj)

        return uc, pullback

    def adjoint_gradient(self, lambda_c: np.ndarray, weight: np.ndarray) -> np.ndarray:
        """Gradient of weight^T uc(lambda_c) with one extra banded solve."""
        weight = np.asarray(weight, dtype=float)
        if weight.shape != (self.n_nodes,):
            raise ValidationError("weight must be a full nodal vector")
        if not np.all(np.isfinite(weight)):
            raise ValidationError("weight must be finite")
        lam = np.asarray(lambda_c, dtype=float)[None, :]
        ab, uc = self._factor_solve_batch(lam)
        adj = self._adjoint_solve_batch(ab, weight[None, :])
        return self._grad_from_solutions(lam, uc, adj)[0]


def solve_coarse(model: CoarseModel, lambda_c: np.ndarray) -> CoarseSolution:
    return model.solve(lambda_c)


def permeability_field(lambda_c: np.ndarray, partition: Partition) -> np.ndarray:
    lam = np.asarray(lambda_c, dtype=float)
    if lam.shape != (partition.n_cells,):
        raise ValidationError(
            f"lambda_c has dim {lam.shape}, partition has {partition.n_cells} cells"
        )
    return np.exp(lam)[partition.element_cell_index()]
