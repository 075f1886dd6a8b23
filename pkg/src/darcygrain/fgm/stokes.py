"""Staggered-grid (MAC) Stokes solver on the pixel geometry.

Velocities live on cell faces, pressures at cell centers.  Faces touching a
solid pixel are no-slip; domain-boundary faces carry the prescribed velocity;
tangential wall conditions enter through ghost reflection.  The saddle-point
system is solved through the pressure Schur complement with conjugate
gradients, velocity solves via a cached sparse factorization.

This solver provides the higher-fidelity reference for validation studies; the
acceptance pipeline uses the fine Darcy solver, which is orders of magnitude
cheaper at equal resolution.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy import ndimage

from ..errors import DisconnectedPoreError, SolverError, ValidationError
from ..microgen import Microstructure
from .darcy import FineField

SCHUR_RTOL = 1e-10
SCHUR_MAXITER = 4000


def _check_pore_connected(solid: np.ndarray) -> None:
    pore = ~solid
    labels, n = ndimage.label(pore, structure=np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]]))
    if n != 1:
        raise DisconnectedPoreError(f"pore space splits into {n} components")


def solve_fine_stokes(micro: Microstructure, bc, fine_res: int | None = None) -> FineField:
    """Solve pore-scale Stokes flow; returns nodal pressures on the node grid."""
    r = micro.resolution if fine_res is None else fine_res
    if r > 128:
        raise ValidationError("stokes solver is desk-scale only (fine_res <= 128)")
    if r != micro.resolution:
        raise ValidationError("stokes solve requires fine_res == microstructure resolution")
    a_x, a_y, a_xy = (float(a) for a in bc)
    solid = micro.pixels
    _check_pore_connected(solid)
    fluid = ~solid
    h = 1.0 / r
    inv_h2 = 1.0 / (h * h)
    inv_h = 1.0 / h

    # ---- face classification -------------------------------------------
    # u faces: (r, r+1); v faces: (r+1, r).  value array carries prescribed
    # values; active arrays mark unknowns.
    u_val = np.zeros((r, r + 1))
    v_val = np.zeros((r + 1, r))
    ys = (np.arange(r) + 0.5) * h
    xs = (np.arange(r) + 0.5) * h

    u_active = np.zeros((r, r + 1), dtype=bool)
    u_active[:, 1:r] = fluid[:, :-1] & fluid[:, 1:]
    u_val[:, 0] = np.where(fluid[:, 0], a_x + a_xy * ys, 0.0)
    u_val[:, r] = np.where(fluid[:, -1], a_x + a_xy * ys, 0.0)

    v_active = np.zeros((r + 1, r), dtype=bool)
    v_active[1:r, :] = fluid[:-1, :] & fluid[1:, :]
    v_val[0, :] = np.where(fluid[0, :], a_y + a_xy * xs, 0.0)
    v_val[r, :] = np.where(fluid[-1, :], a_y + a_xy * xs, 0.0)

    u_idx = -np.ones((r, r + 1), dtype=np.int64)
    u_idx[u_active] = np.arange(int(u_active.sum()))
    nu = int(u_active.sum())
    v_idx = -np.ones((r + 1, r), dtype=np.int64)
    v_idx[v_active] = nu + np.arange(int(v_active.sum()))
    n_vel = nu + int(v_active.sum())

    c_idx = -np.ones((r, r), dtype=np.int64)
    c_idx[fluid] = np.arange(int(fluid.sum()))
    n_cells = int(fluid.sum())

    rows, cols, vals = [], [], []
    f = np.zeros(n_vel)
    g_rows, g_cols, g_vals = [], [], []

    def add(i, j, v):
        rows.append(i)
        cols.append(j)
        vals.append(v)

    # ---- u momentum ------------------------------------------------------
    ju, iu = np.nonzero(u_active)
    for j, i in zip(ju, iu):
        row = u_idx[j, i]
        diag = 4.0
        # normal-direction neighbors (left/right u faces at distance h)
        for ii in (i - 1, i + 1):
            if u_idx[j, ii] >= 0:
                add(row, u_idx[j, ii], -inv_h2)
            else:
                f[row] += u_val[j, ii] * inv_h2
        # tangential neighbors (up/down); walls enter via ghost reflection
        for jj in (j - 1, j + 1):
            if jj < 0 or jj >= r:
                wall = a_x + a_xy * (0.0 if jj < 0 else 1.0)
                diag += 1.0
                f[row] += 2.0 * wall * inv_h2
            elif u_idx[jj, i] >= 0:
                add(row, u_idx[jj, i], -inv_h2)
            else:
                # face suppressed by a solid pixel: no-slip wall at h/2
                diag += 1.0
        add(row, row, diag * inv_h2)
        # pressure gradient (p_right - p_left)/h
        g_rows.append(row), g_cols.append(c_idx[j, i]), g_vals.append(inv_h)
        g_rows.append(row), g_cols.append(c_idx[j, i - 1]), g_vals.append(-inv_h)

    # ---- v momentum ------------------------------------------------------
    jv, iv = np.nonzero(v_active)
    for j, i in zip(jv, iv):
        row = v_idx[j, i]
        diag = 4.0
        for jj in (j - 1, j + 1):
            if v_idx[jj, i] >= 0:
                add(row, v_idx[jj, i], -inv_h2)
            else:
                f[row] += v_val[jj, i] * inv_h2
        for ii in (i - 1, i + 1):
            if ii < 0 or ii >= r:
                wall = a_y + a_xy * (0.0 if ii < 0 else 1.0)
                diag += 1.0
                f[row] += 2.0 * wall * inv_h2
            elif v_idx[j, ii] >= 0:
                add(row, v_idx[j, ii], -inv_h2)
            else:
                diag += 1.0
        add(row, row, diag * inv_h2)
        g_rows.append(row), g_cols.append(c_idx[j, i]), g_vals.append(inv_h)
        g_rows.append(row), g_cols.append(c_idx[j - 1, i]), g_vals.append(-inv_h)

    # ---- continuity ------------------------------------------------------
    g_c = np.zeros(n_cells)
    jc, ic = np.nonzero(fluid)
    for j, i in zip(jc, ic):
        c = c_idx[j, i]
        for face, sign in (((j, i + 1), 1.0), ((j, i), -1.0)):
            if u_idx[face] < 0:
                g_c[c] -= sign * u_val[face] * inv_h
        for face, sign in (((j + 1, i), 1.0), ((j, i), -1.0)):
            if v_idx[face] < 0:
                g_c[c] -= sign * v_val[face] * inv_h

    A = sp.csr_matrix((vals, (rows, cols)), shape=(n_vel, n_vel))
    G = sp.csr_matrix((g_vals, (g_rows, g_cols)), shape=(n_vel, n_cells))

    # ---- Schur-complement pressure solve ---------------------------------
    anchor = c_idx[0, 0]
    if anchor < 0:
        anchor = 0  # first fluid cell anchors the pressure instead
    keep = np.ones(n_cells, dtype=bool)
    keep[anchor] = False
    G_red = G[:, keep].tocsr()

    lu = spla.splu(A.tocsc())
    rhs_p = G_red.T @ lu.solve(f) + g_c[keep]

    def schur_mv(q):
        return G_red.T @ lu.solve(G_red @ q)

    S = spla.LinearOperator((n_cells - 1, n_cells - 1), matvec=schur_mv)
    p_red, info = spla.cg(S, rhs_p, rtol=SCHUR_RTOL, atol=0.0, maxiter=SCHUR_MAXITER)
    if info != 0:
        res = float(np.linalg.norm(schur_mv(p_red) - rhs_p) / max(np.linalg.norm(rhs_p), 1e-300))
        raise SolverError("Stokes Schur-complement CG did not converge", residual=res)
    p = np.zeros(n_cells)
    p[keep] = p_red

    # ---- interpolate cell pressures to the node grid ---------------------
    p_cells = np.full((r, r), np.nan)
    p_cells[fluid] = p
    num = np.zeros((r + 1, r + 1))
    den = np.zeros((r + 1, r + 1))
    fin = np.nan_to_num(p_cells)
    msk = fluid.astype(float)
    for dy in (0, 1):
        for dx in (0, 1):
            num[dy : r + dy, dx : r + dx] += fin
            den[dy : r + dy, dx : r + dx] += msk
    nodes = np.where(den > 0, num / np.maximum(den, 1.0), np.nan)
    if np.isnan(nodes).any():
        # nodes surrounded by solid: copy from the nearest resolved node
        _, (iy, ix) = ndimage.distance_transform_edt(np.isnan(nodes), return_indices=True)
        nodes = nodes[iy, ix]
    nodes = nodes - nodes[0, 0]  # anchor P(0,0) = 0
    field = FineField(values=nodes.ravel(), grid=r + 1, bc=(a_x, a_y, a_xy))
    field.validate()
    return field
