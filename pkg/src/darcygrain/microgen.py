"""Random porous microstructures: polydisperse non-overlapping disks on [0,1]^2.

The number of disk placement attempts is log-normal; radii are log-normal with
a spatially varying log-mean drawn from a squared-exponential Gaussian process;
centers follow a sigmoid-warped GP density, sampled by rejection.  Proposals
that overlap an already placed disk are dropped (which distorts the center
law — we reproduce the procedure, not a target density); proposals violating
the boundary margin are redrawn so the attempt is not lost.

Pixel convention: ``pixels[iy, ix]`` is True for solid, pixel centers at
``((ix + 0.5)/R, (iy + 0.5)/R)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np

from .errors import BudgetExceededError, ValidationError

AUX_GRID = 32  # GP discretization; adequate for length scales >= 0.05
PROPOSALS_PER_ATTEMPT = 50


@dataclass(frozen=True)
class MicrostructureParams:
    """Distribution parameters for disk microstructure sampling."""

    mu_ex: float  # log-mean of the attempted disk count
    sigma_ex: float  # log-std of the attempted disk count
    mu_r_base: float  # base log-mean of disk radii
    sigma_r: float  # log-std of disk radii
    l_x: float = 0.08  # GP length scale of the center density
    l_r: float = 0.05  # GP length scale of the radius log-mean field
    l_s: float = 1.2  # sigmoid warp slope
    margin: float = 0.003  # minimum disk-boundary clearance
    seed: int = 0

    def validate(self) -> None:
        if not (self.sigma_ex > 0 and self.sigma_r > 0):
            raise ValidationError("sigma_ex and sigma_r must be > 0")
        if not (self.l_x > 0 and self.l_r > 0 and self.l_s > 0):
            raise ValidationError("length scales l_x, l_r, l_s must be > 0")
        if not (0 <= self.margin < 0.5):
            raise ValidationError("margin must lie in [0, 0.5)")


@dataclass
class Microstructure:
    """Binary solid/pore image with the generating disk list when available."""

    pixels: np.ndarray  # (R, R) bool, True = solid
    disks: list | None = None  # [(x, y, r), ...]
    params: MicrostructureParams | None = None

    @property
    def resolution(self) -> int:
        return self.pixels.shape[0]

    @property
    def pore_fraction(self) -> float:
        return 1.0 - float(np.count_nonzero(self.pixels)) / self.pixels.size

    def validate(self) -> None:
        if self.pixels.ndim != 2 or self.pixels.shape[0] != self.pixels.shape[1]:
            raise ValidationError("pixels must be a square 2-D grid")
        if self.disks is not None:
            arr = np.asarray(self.disks, dtype=float)
            if arr.size and (
                np.any(arr[:, 2] <= 0)
                or np.any(arr[:, :2] < 0)
                or np.any(arr[:, :2] > 1)
            ):
                raise ValidationError("disk centers must lie in [0,1]^2 with r > 0")


@lru_cache(maxsize=16)
def _gp_factor(length_scale: float, grid: int = AUX_GRID) -> np.ndarray:
    """Covariance factor F with sample = F @ z on the auxiliary grid.

    Eigen-factorization with clipping; the squared-exponential kernel is
    near-singular, a Cholesky would need ad hoc jitter.
    """
    xs = (np.arange(grid) + 0.5) / grid
    gx, gy = np.meshgrid(xs, xs)
    pts = np.column_stack([gx.ravel(), gy.ravel()])
    d2 = ((pts[:, None, :] - pts[None, :, :]) ** 2).sum(axis=2)
    cov = np.exp(-d2 / length_scale**2)
    w, v = np.linalg.eigh(cov)
    w = np.clip(w, 0.0, None)
    return v * np.sqrt(w)


def _sample_gp(rng: np.random.Generator, length_scale: float, grid: int = AUX_GRID):
    z = rng.standard_normal(grid * grid)
    return (_gp_factor(length_scale, grid) @ z).reshape(grid, grid)


def _bilerp(fieldvals: np.ndarray, x: float, y: float) -> float:
    """Bilinear interpolation on the auxiliary grid (cell-center nodes)."""
    g = fieldvals.shape[0]
    fx = np.clip(x * g - 0.5, 0.0, g - 1.0)
    fy = np.clip(y * g - 0.5, 0.0, g - 1.0)
    ix, iy = int(fx), int(fy)
    ix1, iy1 = min(ix + 1, g - 1), min(iy + 1, g - 1)
    tx, ty = fx - ix, fy - iy
    return float(
        fieldvals[iy, ix] * (1 - tx) * (1 - ty)
        + fieldvals[iy, ix1] * tx * (1 - ty)
        + fieldvals[iy1, ix] * (1 - tx) * ty
        + fieldvals[iy1, ix1] * tx * ty
    )


def rasterize(disks, resolution: int) -> np.ndarray:
    """Binary solid mask: pixel True iff its center lies inside some disk."""
    pixels = np.zeros((resolution, resolution), dtype=bool)
    inv = 1.0 / resolution
    for x, y, r in disks:
        ix0 = max(int((x - r) * resolution - 0.5), 0)
        ix1 = min(int((x + r) * resolution + 1.5), resolution)
        iy0 = max(int((y - r) * resolution - 0.5), 0)
        iy1 = min(int((y + r) * resolution + 1.5), resolution)
        if ix0 >= ix1 or iy0 >= iy1:
            continue
        cx = (np.arange(ix0, ix1) + 0.5) * inv
        cy = (np.arange(iy0, iy1) + 0.5) * inv
        dx2 = (cx[None, :] - x) ** 2
        dy2 = (cy[:, None] - y) ** 2
        pixels[iy0:iy1, ix0:ix1] |= dx2 + dy2 <= r * r
    return pixels


def sample_microstructure(params: MicrostructureParams, resolution: int) -> Microstructure:
    """Draw one microstructure; deterministic in (params, resolution)."""
    params.validate()
    if resolution < 16:
        raise ValidationError(f"resolution must be >= 16, got {resolution}")
    rng = np.random.default_rng(params.seed)

    n_attempt = int(np.rint(rng.lognormal(params.mu_ex, params.sigma_ex)))
    budget = PROPOSALS_PER_ATTEMPT * max(n_attempt, 1)
    spent = 0

    density = 1.0 / (1.0 + np.exp(-params.l_s * _sample_gp(rng, params.l_x)))
    density_max = float(density.max())
    mu_r_field = _sample_gp(rng, params.l_r)

    xs = np.empty(n_attempt)
    ys = np.empty(n_attempt)
    rs = np.empty(n_attempt)
    n_placed = 0
    for _ in range(n_attempt):
        while True:
            if spent >= budget:
                raise BudgetExceededError(
                    f"center rejection budget of {budget} proposals "
                    f"({PROPOSALS_PER_ATTEMPT} per attempted disk) exhausted "
                    f"after placing {n_placed} disks"
                )
            spent += 1
            x, y = rng.uniform(size=2)
            if rng.uniform() * density_max > _bilerp(density, x, y):
                continue
            r = rng.lognormal(params.mu_r_base + _bilerp(mu_r_field, x, y), params.sigma_r)
            if min(x, y, 1.0 - x, 1.0 - y) >= r + params.margin:
                break
        if n_placed:
            d2 = (xs[:n_placed] - x) ** 2 + (ys[:n_placed] - y) ** 2
            if np.any(d2 <= (rs[:n_placed] + r) ** 2):
                continue  # overlapping proposal is dropped, not retried
        xs[n_placed], ys[n_placed], rs[n_placed] = x, y, r
        n_placed += 1

    disks = [(float(xs[i]), float(ys[i]), float(rs[i])) for i in range(n_placed)]
    return Microstructure(pixels=rasterize(disks, resolution), disks=disks, params=params)


# ---------------------------------------------------------------------------
# Tiled benchmark microstructures (inhomogeneous lower-left quadrant)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TiledParams:
    """Homogeneous disk carpet except the lower-left quadrant, which is split
    into tiles x tiles sub-cells of individually random solid fraction."""

    radius: float = 0.03
    background_fraction: float = 0.12
    tile_fraction_lo: float = 0.02
    tile_fraction_hi: float = 0.45
    tiles: int = 4
    margin: float = 0.003
    seed: int = 0

    def validate(self) -> None:
        if not (0 < self.radius < 0.25):
            raise ValidationError("radius must lie in (0, 0.25)")
        if not (0 <= self.tile_fraction_lo <= self.tile_fraction_hi < 0.7):
            raise ValidationError("tile fractions must satisfy 0 <= lo <= hi < 0.7")
        if self.tiles < 1:
            raise ValidationError("tiles must be >= 1")


def _fill_disks(rng, box, n_target, radius, margin, xs, ys, rs, n_placed, budget=400):
    x0, y0, x1, y1 = box
    lo_x, hi_x = max(x0, radius + margin), min(x1, 1 - radius - margin)
    lo_y, hi_y = max(y0, radius + margin), min(y1, 1 - radius - margin)
    if lo_x >= hi_x or lo_y >= hi_y:
        return n_placed
    placed_here = 0
    attempts = 0
    while placed_here < n_target and attempts < budget * max(n_target, 1):
        attempts += 1
        x = rng.uniform(lo_x, hi_x)
        y = rng.uniform(lo_y, hi_y)
        if n_placed:
            d2 = (xs[:n_placed] - x) ** 2 + (ys[:n_placed] - y) ** 2
            if np.any(d2 <= (rs[:n_placed] + radius) ** 2):
                continue
        xs[n_placed], ys[n_placed], rs[n_placed] = x, y, radius
        n_placed += 1
        placed_here += 1
    return n_placed


def sample_tiled_microstructure(params: TiledParams, resolution: int) -> Microstructure:
    params.validate()
    if resolution < 16:
        raise ValidationError(f"resolution must be >= 16, got {resolution}")
    rng = np.random.default_rng(params.seed)
    disk_area = np.pi * params.radius**2

    cap = int(0.9 / disk_area) + params.tiles**2 + 8
    xs = np.empty(cap)
    ys = np.empty(cap)
    rs = np.empty(cap)
    n = 0

    # background carpet: three quadrants outside the lower-left corner
    n_bg = int(np.rint(0.75 * params.background_fraction / disk_area))
    for box in [(0.5, 0.0, 1.0, 0.5), (0.0, 0.5, 0.5, 1.0), (0.5, 0.5, 1.0, 1.0)]:
        n = _fill_disks(rng, box, int(np.rint(n_bg / 3)), params.radius, params.margin, xs, ys, rs, n)

    # lower-left quadrant: per-tile random solid fraction
    tile = 0.5 / params.tiles
    tile_area = tile * tile
    for ty in range(params.tiles):
        for tx in range(params.tiles):
            frac = rng.uniform(params.tile_fraction_lo, params.tile_fraction_hi)
            n_tile = int(np.rint(frac * tile_area / disk_area))
            box = (tx * tile, ty * tile, (tx + 1) * tile, (ty + 1) * tile)
            n = _fill_disks(rng, box, n_tile, params.radius, params.margin, xs, ys, rs, n)

    disks = [(float(xs[i]), float(ys[i]), float(rs[i])) for i in range(n)]
    return Microstructure(pixels=rasterize(disks, resolution), disks=disks, params=None)


def desk_params(seed: int = 0, **overrides) -> MicrostructureParams:
    """Reduced-resolution analog of the dense polydisperse configuration."""
    kw = dict(
        mu_ex=np.log(42.0),
        sigma_ex=0.2,
        mu_r_base=np.log(0.045),
        sigma_r=0.3,
        l_x=0.08,
        l_r=0.05,
        l_s=1.2,
        margin=0.003,
        seed=seed,
    )
    kw.update(overrides)
    return MicrostructureParams(**kw)


def with_seed(params: MicrostructureParams, seed: int) -> MicrostructureParams:
    return replace(params, seed=seed)
