"""Damped wave equation laboratory on triangulated closed surfaces."""

from .mesh import (
    MeshError,
    SurfaceMesh,
    assemble_operators,
    build_flat_pillow,
    build_icosphere,
    build_torus,
    divergence,
    geodesic_distance,
    gradient,
    integrate,
    wavefront_distance,
)

__all__ = [
    "MeshError",
    "SurfaceMesh",
    "assemble_operators",
    "build_flat_pillow",
    "build_icosphere",
    "build_torus",
    "divergence",
    "geodesic_distance",
    "gradient",
    "integrate",
    "wavefront_distance",
]

__version__ = "0.1.0"
