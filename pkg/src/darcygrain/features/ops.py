"""Microstructural statistics evaluated on rectangular pixel regions.

All operations are exhaustive (no Monte Carlo) and deterministic.  Distances
named ``d`` are in domain units on [0,1]^2 and are converted to pixel offsets
with the full-image resolution; distance-transform statistics are reported in
pixel units.  ``pixels`` is the solid mask (True = solid).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .. import kernels
from ..errors import ValidationError

log = logging.getLogger("darcygrain.features")

EPS_K = 1e-6  # permeability clamp for effective-medium estimates
LOG_CLAMP = 1e-12  # lower clamp on log arguments


@dataclass(frozen=True)
class Region:
    """Pixel-index box (end-exclusive) within an R x R image."""

    y0: int
    x0: int
    y1: int
    x1: int
    res: int  # full-image resolution; sets the pixel side length 1/res

    @classmethod
    def full(cls, res: int) -> "Region":
        return cls(0, 0, res, res, res)

    @classmethod
    def from_domain(cls, box, res: int) -> "Region":
        """box = (x0, y0, x1, y1) in domain units; must align with the pixel grid."""
        idx = []
        for v in (box[1], box[0], box[3], box[2]):
            p = v * res
            if abs(p - round(p)) > 1e-9:
                raise ValidationError(f"region bound {v} does not align with a {res} pixel grid")
            idx.append(int(round(p)))
        return cls(idx[0], idx[1], idx[2], idx[3], res)

    def crop(self, pixels: np.ndarray) -> np.ndarray:
        return pixels[self.y0 : self.y1, self.x0 : self.x1]

    @property
    def n_pixels(self) -> int:
        return (self.y1 - self.y0) * (self.x1 - self.x0)

    @property
    def domain_box(self):
        r = self.res
        return (self.x0 / r, self.y0 / r, self.x1 / r, self.y1 / r)

    @property
    def diagonal(self) -> float:
        return float(np.hypot((self.x1 - self.x0) / self.res, (self.y1 - self.y0) / self.res))


def _region(pixels: np.ndarray, region: Region | None) -> Region:
    if region is None:
        return Region.full(pixels.shape[0])
    if region.n_pixels <= 0:
        raise ValidationError("empty region")
    return region


def _phase_mask(pixels: np.ndarray, region: Region, phase: str) -> np.ndarray:
    m = region.crop(pixels)
    if phase == "pore":
        return ~m
    if phase == "solid":
        return m
    raise ValidationError(f"phase must be 'pore' or 'solid', got {phase!r}")


def pore_fraction(pixels: np.ndarray, region: Region | None = None) -> float:
    region = _region(pixels, region)
    m = region.crop(pixels)
    return 1.0 - float(np.count_nonzero(m)) / m.size


def interface_area(pixels: np.ndarray, region: Region | None = None) -> float:
    """Total pore/solid interface length inside the region, in domain units."""
    region = _region(pixels, region)
    edges = kernels.interface_edge_count(region.crop(pixels))
    return edges / region.res


def lineal_path(pixels: np.ndarray, region: Region | None, phase: str, d: float) -> float:
    """Fraction of axis-aligned segments of length d lying entirely in the phase."""
    region = _region(pixels, region)
    if not 0 <= d < 1:
        raise ValidationError(f"lineal path distance must lie in [0, 1), got {d}")
    m = _phase_mask(pixels, region, phase)
    k = int(round(d * region.res))
    if k == 0:
        if d > 0:
            log.warning("lineal_path: d=%g is below one pixel, falling back to phase fraction", d)
        return float(np.count_nonzero(m)) / m.size
    hits, total = kernels.lineal_window_count(m, k)
    if total == 0:
        return 0.0
    return hits / total


def chord_length_density(pixels: np.ndarray, region: Region | None, phase: str, d_edges) -> np.ndarray:
    """Normalized chord-length density over the given bin edges (domain units).

    A chord is a maximal same-phase run along a row or column of the region
    (runs truncated by the region boundary are counted).  The returned
    densities integrate to <= 1 over the given bins (mass outside the last
    edge is dropped); an all-empty histogram is returned with a log flag when
    the region contains no chords of the phase.
    """
    region = _region(pixels, region)
    d_edges = np.asarray(d_edges, dtype=float)
    if d_edges.ndim != 1 or d_edges.size < 2 or np.any(np.diff(d_edges) <= 0):
        raise ValidationError("d_edges must be ascending bin edges")
    m = _phase_mask(pixels, region, phase)
    counts = kernels.chord_run_counts(m)
    n_chords = int(counts.sum())
    if n_chords == 0:
        log.warning("chord_length_density: no %s chords in region", phase)
        return np.zeros(d_edges.size - 1)
    lengths = np.nonzero(counts)[0] / region.res
    weights = counts[np.nonzero(counts)[0]]
    hist, _ = np.histogram(lengths, bins=d_edges, weights=weights)
    widths = np.diff(d_edges)
    return hist / (n_chords * widths)


def _pore_distances_px(pixels: np.ndarray, region: Region, metric: str) -> np.ndarray:
    """Per-pore-pixel distance (pixel units) to the nearest solid pixel.

    With no solid pixel in the region the distances are measured to a virtual
    solid ring just outside the region (distance-to-boundary convention).
    """
    m = region.crop(pixels)
    pore = ~m
    if not m.any():
        padded = np.pad(pore, 1, constant_values=False)
    else:
        padded = pore
    if metric == "euclidean":
        dist = ndimage.distance_transform_edt(padded)
    elif metric == "chessboard":
        dist = ndimage.distance_transform_cdt(padded, metric="chessboard").astype(float)
    elif metric == "cityblock":
        dist = ndimage.distance_transform_cdt(padded, metric="taxicab").astype(float)
    else:
        raise ValidationError(f"unknown metric {metric!r}")
    if not m.any():
        dist = dist[1:-1, 1:-1]
    return dist[pore]


def distance_transform_stats(pixels: np.ndarray, region: Region | None = None, metric: str = "euclidean"):
    """(mean, variance, max) of pore-pixel distances to the nearest solid, pixel units."""
    region = _region(pixels, region)
    d = _pore_distances_px(pixels, region, metric)
    if d.size == 0:  # solid everywhere
        return 0.0, 0.0, 0.0
    return float(d.mean()), float(d.var()), float(d.max())


def pore_size_density(pixels: np.ndarray, region: Region | None, d: float) -> float:
    """Histogram-density estimate (at distance d) of pore-to-interface distances.

    Distances are (EDT - 1) pixel widths converted to domain units, binned at
    one-pixel width; d selects the bin.  Regions with no interface return 0
    with a log flag.
    """
    region = _region(pixels, region)
    if d < 0:
        raise ValidationError("d must be >= 0")
    m = region.crop(pixels)
    pore_count = int(np.count_nonzero(~m))
    if pore_count == 0:
        raise ValidationError("region has no pore pixels")
    if not m.any():
        log.warning("pore_size_density: region has no interface, returning 0")
        return 0.0
    dist = _pore_distances_px(pixels, region, "euclidean") - 1.0
    b = int(np.floor(d * region.res + 1e-9))
    frac = np.count_nonzero((dist >= b) & (dist < b + 1)) / pore_count
    return float(frac * region.res)


def void_nearest_neighbor(pixels: np.ndarray, region: Region | None = None) -> float:
    """Density of the nearest interface distance at contact (d = 0)."""
    return pore_size_density(pixels, region, 0.0)


def two_point_correlation(pixels: np.ndarray, region: Region | None, phase: str, d: float) -> float:
    """Probability that both ends of an axis-aligned displacement d are in the phase."""
    region = _region(pixels, region)
    if d < 0:
        raise ValidationError("d must be >= 0")
    m = _phase_mask(pixels, region, phase)
    k = int(round(d * region.res))
    hits, total = kernels.two_point_count(m, k)
    if total == 0:
        return 0.0
    return hits / total


def effective_medium(pixels: np.ndarray, region: Region | None = None, kind: str = "maxwell") -> float:
    """Closed-form 2-D effective permeability from the solid fraction.

    Infinite-contrast (impermeable inclusion) limits: Maxwell-Garnett
    (1-phi_s)/(1+phi_s), self-consistent 1-2*phi_s with its percolation
    cutoff clamped at EPS_K.
    """
    region = _region(pixels, region)
    phi_s = 1.0 - pore_fraction(pixels, region)
    if kind == "maxwell":
        return (1.0 - phi_s) / (1.0 + phi_s)
    if kind == "sca":
        k = 1.0 - 2.0 * phi_s
        if k <= EPS_K:
            log.debug("effective_medium: SCA clamped at percolation cutoff (phi_s=%.3f)", phi_s)
            return EPS_K
        return k
    raise ValidationError(f"unknown effective medium kind {kind!r}")


def exclusion_statistics(disks, region: Region) -> dict:
    """Disk statistics over exclusions whose centers lie in the region.

    Distance statistics over fewer than 2 disks fall back to the cell
    diagonal sentinel so downstream feature transforms stay finite.
    """
    if disks is None:
        raise ValidationError("microstructure carries no disk list")
    x0, y0, x1, y1 = region.domain_box
    arr = np.asarray(disks, dtype=float).reshape(-1, 3)
    # half-open cell membership so a disk belongs to exactly one cell;
    # cells touching the domain edge close on that side
    in_x = (arr[:, 0] >= x0) & ((arr[:, 0] <= x1) if x1 >= 1.0 else (arr[:, 0] < x1))
    in_y = (arr[:, 1] >= y0) & ((arr[:, 1] <= y1) if y1 >= 1.0 else (arr[:, 1] < y1))
    sel = arr[in_x & in_y]
    n = sel.shape[0]
    sentinel = region.diagonal
    out = {"n_disks": float(n)}
    if n == 0:
        out["radius_moment_05"] = 0.0
        out["radius_moment_1"] = 0.0
    else:
        out["radius_moment_05"] = float(np.mean(sel[:, 2] ** 0.5))
        out["radius_moment_1"] = float(np.mean(sel[:, 2]))
    if n < 2:
        out.update(
            mean_center_distance=sentinel,
            min_center_distance=sentinel,
            mean_edge_distance=sentinel,
            min_edge_distance=sentinel,
        )
    else:
        dx = sel[:, None, 0] - sel[None, :, 0]
        dy = sel[:, None, 1] - sel[None, :, 1]
        cdist = np.hypot(dx, dy)
        edist = cdist - sel[:, None, 2] - sel[None, :, 2]
        iu = np.triu_indices(n, k=1)
        out["mean_center_distance"] = float(cdist[iu].mean())
        out["min_center_distance"] = float(cdist[iu].min())
        out["mean_edge_distance"] = float(edist[iu].mean())
        out["min_edge_distance"] = float(edist[iu].min())
    for key in list(out):
        if key != "n_disks":
            out[f"log_{key}"] = float(np.log(max(out[key], LOG_CLAMP)))
    return out


def clamped_log(x: float) -> float:
    return float(np.log(max(x, LOG_CLAMP)))
