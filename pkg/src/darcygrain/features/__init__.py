from .ops import (
    Region,
    chord_length_density,
    distance_transform_stats,
    effective_medium,
    exclusion_statistics,
    interface_area,
    lineal_path,
    pore_fraction,
    pore_size_density,
    two_point_correlation,
    void_nearest_neighbor,
)
from .registry import (
    FeatureMatrix,
    FeatureSpec,
    assemble_feature_matrix,
    default_registry,
    evaluate,
    load_registry,
    save_registry,
)

__all__ = [
    "Region",
    "pore_fraction",
    "interface_area",
    "lineal_path",
    "chord_length_density",
    "pore_size_density",
    "void_nearest_neighbor",
    "distance_transform_stats",
    "two_point_correlation",
    "effective_medium",
    "exclusion_statistics",
    "FeatureSpec",
    "FeatureMatrix",
    "assemble_feature_matrix",
    "default_registry",
    "evaluate",
    "load_registry",
    "save_registry",
]
