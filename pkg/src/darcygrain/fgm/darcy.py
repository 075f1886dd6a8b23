"""Fine-grained Darcy reference solver on the pixel grid.

Acts as the expensive forward model at desk scale: per-pixel isotropic
permeability 1 (pore) or eps_solid (solid), flux boundary conditions from the
prescribed boundary velocity, pressure anchored at the origin node.  Solved
with conjugate gradients preconditioned by algebraic multigrid, which handles
the eps_solid contrast.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import pyamg
import scipy.sparse.linalg as spla

from .. import fem
from ..errors import SolverError, ValidationError
from ..microgen import Microstructure

CG_RTOL = 1e-10
CG_MAXITER = 2000


@dataclass
class FineField:
    """Nodal pressures on a regular grid, row-major, anchored at the origin."""

    values: np.ndarray  # ((g*g),) with g = grid points per side
    grid: int
    bc: tuple

    def as_grid(self) -> np.ndarray:
        return self.values.reshape(self.grid, self.grid)

    def validate(self) -> None:
        if self.values.shape != (self.grid * self.grid,):
            raise ValidationError("field size does not match its grid")
        if not np.all(np.isfinite(self.values)):
            raise ValidationError("field contains non-finite values")
        if self.values[0] != 0.0:
            raise ValidationError("pressure must be anchored to 0 at the origin node")


def pixel_permeability(micro: Microstructure, n_el: int, eps_solid: float) -> np.ndarray:
    """Per-element permeability sampled at element centers of an n_el grid."""
    res = micro.resolution
    if n_el == res:
        solid = micro.pixels.ravel()
    else:
        centers = (np.arange(n_el) + 0.5) / n_el
        px = np.minimum((centers * res).astype(int), res - 1)
        solid = micro.pixels[np.ix_(px, px)].ravel()
    return np.where(solid, eps_solid, 1.0)


def solve_fine_darcy(
    micro: Microstructure,
    bc,
    fine_res: int = 64,
    eps_solid: float = 1e-8,
    rtol: float = CG_RTOL,
) -> FineField:
    """Solve the pixel-permeability Darcy system; returns nodal pressures."""
    if fine_res < 16:
        raise ValidationError(f"fine_res must be >= 16, got {fine_res}")
    if not (0.0 < eps_solid < 1.0):
        raise ValidationError(f"eps_solid must lie in (0, 1), got {eps_solid}")
    k_el = pixel_permeability(micro, fine_res, eps_solid)
    asm = fem.grid_assembler(fine_res)
    A = asm.assemble_csr_reduced(k_el)
    b = fem.boundary_flux_load(fine_res, bc)[1:]

    ml = pyamg.ruge_stuben_solver(A, max_coarse=32)
    M = ml.aspreconditioner(cycle="V")
    x, info = spla.cg(A, b, rtol=rtol, atol=0.0, maxiter=CG_MAXITER, M=M)
    if info != 0:
        residual = float(np.linalg.norm(A @ x - b) / np.linalg.norm(b))
        raise SolverError("fine Darcy CG did not converge", residual=residual)

    values = np.concatenate([[0.0], x])
    field = FineField(values=values, grid=fine_res + 1, bc=tuple(float(a) for a in bc))
    field.validate()
    return field
