"""Topology optimization of flow on offset surfaces."""

from ._mto import (
    ConfigError,
    GeometryError,
    Mesh,
    Problem,
    SolverError,
    __version__,
    area_factor,
    build_case,
    impermeability,
    line_factor,
    load_config,
    normalize_config,
    optimize,
    project,
    projection_derivative,
    transformed_normal,
)

__all__ = [
    "ConfigError",
    "GeometryError",
    "Mesh",
    "Problem",
    "SolverError",
    "__version__",
    "area_factor",
    "build_case",
    "impermeability",
    "line_factor",
    "load_config",
    "normalize_config",
    "optimize",
    "project",
    "projection_derivative",
    "transformed_normal",
]
