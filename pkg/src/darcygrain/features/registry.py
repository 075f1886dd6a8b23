"""Declarative feature registry and feature-matrix assembly.

A FeatureSpec names a base statistic plus an optional scalar transform; the
registry is an ordered list of specs (constant column first, then global
columns shared by all cells, then per-cell columns).  Specs are plain data so
registries round-trip through JSON for the CLI.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

import numpy as np

from ..errors import ValidationError
from ..microgen import Microstructure
from . import ops
from .ops import Region

log = logging.getLogger("darcygrain.features")

VALUE_CLAMP = 1e12

# default chord-length bin edges (domain units), documented in the column map
CHORD_EDGES = (0.0, 1.0 / 32.0, 1.0 / 16.0, 1.0 / 8.0)
LINEAL_DISTANCES = (0.025, 0.01, 0.005, 0.002)
TWO_POINT_DISTANCES = (1.0 / 32.0, 1.0 / 16.0)


@dataclass(frozen=True)
class FeatureSpec:
    id: str
    scope: str  # "constant" | "global" | "cell"
    kind: str
    params: dict = field(default_factory=dict)
    transform: str | None = None  # None | "log" | "exp" | "pow:<p>"

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "scope": self.scope,
            "kind": self.kind,
            "params": dict(self.params),
            "transform": self.transform,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FeatureSpec":
        return cls(
            id=d["id"],
            scope=d["scope"],
            kind=d["kind"],
            params=dict(d.get("params") or {}),
            transform=d.get("transform"),
        )


def _apply_transform(value: float, transform: str | None) -> float:
    if transform is None:
        return value
    if transform == "log":
        return ops.clamped_log(value)
    if transform == "exp":
        return float(np.exp(value))
    if transform.startswith("pow:"):
        p = float(transform.split(":", 1)[1])
        return float(np.abs(value) ** p) if p != round(p) else float(value**p)
    raise ValidationError(f"unknown transform {transform!r}")


def _base_value(spec: FeatureSpec, micro: Microstructure, region: Region) -> float:
    kind = spec.kind
    p = spec.params
    px = micro.pixels
    if kind == "constant":
        return 1.0
    if kind == "pore_fraction":
        return ops.pore_fraction(px, region)
    if kind == "interface_area":
        return ops.interface_area(px, region)
    if kind == "effective_medium":
        return ops.effective_medium(px, region, kind=p["kind"])
    if kind == "lineal_path":
        return ops.lineal_path(px, region, p.get("phase", "pore"), p["d"])
    if kind == "chord_density":
        dens = ops.chord_length_density(
            px, region, p.get("phase", "pore"), p.get("edges", CHORD_EDGES)
        )
        return float(dens[p["bin"]])
    if kind == "two_point":
        return ops.two_point_correlation(px, region, p.get("phase", "pore"), p["d"])
    if kind == "dt_stat":
        mean, var, mx = ops.distance_transform_stats(px, region, p.get("metric", "euclidean"))
        return {"mean": mean, "var": var, "max": mx}[p["stat"]]
    if kind == "pore_size_density":
        return ops.pore_size_density(px, region, p.get("d", 0.0))
    if kind == "exclusion_stat":
        stats = ops.exclusion_statistics(micro.disks, region)
        return stats[p["stat"]]
    raise ValidationError(f"unknown feature kind {spec.kind!r}")


def evaluate(spec: FeatureSpec, micro: Microstructure, region: Region) -> float:
    return _apply_transform(_base_value(spec, micro, region), spec.transform)


def default_registry() -> list[FeatureSpec]:
    """Exactly specified default feature set.

    One constant column, a small global trio, and the per-cell families that
    carry the spatial permeability signal.  The remainder of the classical
    morphological catalog stays out of scope; the registry is extensible
    through FeatureSpec entries.
    """
    F = FeatureSpec
    specs = [F("const", "constant", "constant")]
    specs += [
        F("g_pore_fraction", "global", "pore_fraction"),
        F("g_log_sca", "global", "effective_medium", {"kind": "sca"}, "log"),
        F("g_interface_area", "global", "interface_area"),
    ]
    specs += [
        F("pf", "cell", "pore_fraction"),
        F("pf_log", "cell", "pore_fraction", transform="log"),
        F("pf_p05", "cell", "pore_fraction", transform="pow:0.5"),
        F("pf_p15", "cell", "pore_fraction", transform="pow:1.5"),
        F("pf_p2", "cell", "pore_fraction", transform="pow:2"),
        F("pf_exp", "cell", "pore_fraction", transform="exp"),
        F("ia", "cell", "interface_area"),
        F("ia_log", "cell", "interface_area", transform="log"),
        F("ia_p2", "cell", "interface_area", transform="pow:2"),
        F("ia_p05", "cell", "interface_area", transform="pow:0.5"),
        F("maxwell", "cell", "effective_medium", {"kind": "maxwell"}),
        F("maxwell_log", "cell", "effective_medium", {"kind": "maxwell"}, "log"),
        F("sca_log", "cell", "effective_medium", {"kind": "sca"}, "log"),
    ]
    for d in LINEAL_DISTANCES:
        specs.append(F(f"lp_{d:g}", "cell", "lineal_path", {"d": d, "phase": "pore"}))
    for d in LINEAL_DISTANCES:
        specs.append(F(f"lp_log_{d:g}", "cell", "lineal_path", {"d": d, "phase": "pore"}, "log"))
    for b in range(len(CHORD_EDGES) - 1):
        specs.append(
            F(f"cld_log_b{b}", "cell", "chord_density",
              {"bin": b, "phase": "pore", "edges": list(CHORD_EDGES)}, "log")
        )
    for d in TWO_POINT_DISTANCES:
        specs.append(F(f"s2_{d:g}", "cell", "two_point", {"d": d, "phase": "pore"}))
    specs += [
        F("dt_mean", "cell", "dt_stat", {"stat": "mean", "metric": "euclidean"}),
        F("dt_var", "cell", "dt_stat", {"stat": "var", "metric": "euclidean"}),
        F("dt_max", "cell", "dt_stat", {"stat": "max", "metric": "euclidean"}),
        F("r_m05", "cell", "exclusion_stat", {"stat": "radius_moment_05"}),
        F("r_m1", "cell", "exclusion_stat", {"stat": "radius_moment_1"}),
        F("edge_mean", "cell", "exclusion_stat", {"stat": "mean_edge_distance"}),
        F("edge_mean_log", "cell", "exclusion_stat", {"stat": "log_mean_edge_distance"}),
    ]
    _check_registry(specs)
    return specs


def _check_registry(specs) -> None:
    ids = [s.id for s in specs]
    if len(set(ids)) != len(ids):
        raise ValidationError("feature ids must be unique within a registry")
    for s in specs:
        if s.scope not in ("constant", "global", "cell"):
            raise ValidationError(f"unknown scope {s.scope!r} for feature {s.id}")
        d = s.params.get("d")
        if d is not None and not (0 < d < 1) and s.kind == "lineal_path":
            raise ValidationError(f"feature {s.id}: distance must lie in (0, 1)")


@dataclass
class FeatureMatrix:
    """Per-cell feature rows for one sample: row m = [const, global, local_m]."""

    values: np.ndarray  # (n_cells, n_features)
    column_ids: list

    @property
    def n_cells(self) -> int:
        return self.values.shape[0]

    @property
    def n_features(self) -> int:
        return self.values.shape[1]


def _order_specs(registry) -> list[FeatureSpec]:
    const = [s for s in registry if s.scope == "constant"]
    glob = [s for s in registry if s.scope == "global"]
    cell = [s for s in registry if s.scope == "cell"]
    if len(const) != 1:
        raise ValidationError("registry must contain exactly one constant feature")
    return const + glob + cell


def assemble_feature_matrix(micro: Microstructure, partition, registry) -> FeatureMatrix:
    """Evaluate the registry on every partition cell of one microstructure."""
    _check_registry(registry)
    specs = _order_specs(registry)
    res = micro.resolution
    boxes = partition.cell_boxes()
    full = Region.full(res)

    head = []
    for s in specs:
        if s.scope == "constant":
            head.append(1.0)
        elif s.scope == "global":
            head.append(evaluate(s, micro, full))
    cell_specs = [s for s in specs if s.scope == "cell"]

    rows = np.empty((len(boxes), len(head) + len(cell_specs)))
    for m, box in enumerate(boxes):
        region = Region.from_domain(box, res)
        vals = [evaluate(s, micro, region) for s in cell_specs]
        rows[m] = head + vals

    bad = ~np.isfinite(rows)
    if bad.any():
        log.warning("feature matrix: clamping %d non-finite entries", int(bad.sum()))
        rows = np.nan_to_num(rows, nan=0.0, posinf=VALUE_CLAMP, neginf=-VALUE_CLAMP)
    np.clip(rows, -VALUE_CLAMP, VALUE_CLAMP, out=rows)
    return FeatureMatrix(values=rows, column_ids=[s.id for s in specs])


def save_registry(specs, path) -> None:
    with open(path, "w") as fh:
        json.dump([s.to_dict() for s in specs], fh, indent=1)


def load_registry(path) -> list[FeatureSpec]:
    with open(path) as fh:
        data = json.load(fh)
    specs = [FeatureSpec.from_dict(d) for d in data]
    _check_registry(specs)
    return specs
