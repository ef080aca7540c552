"""Deterministic multipath tracing over prism scenes and radiomap assembly."""

from .channel import DEFAULT_MAX_PATHS, assemble_channel, path_gammas
from .coefficients import fresnel_reflection, pseudo_brewster_angle, utd_diffraction
from .geometry import SceneGeometry, build_geometry, occluded
from .paths import Diffraction, Path, PathKind, PathSet, Reflection, dump_paths, trace_paths
from .radiomap import RadiomapOptions, compute_radiomap, radiomap_from_trace
from .tracer import TraceResult, trace_grid

__all__ = [
    "DEFAULT_MAX_PATHS", "Diffraction", "Path", "PathKind", "PathSet", "RadiomapOptions",
    "Reflection", "SceneGeometry", "TraceResult", "assemble_channel", "build_geometry",
    "compute_radiomap", "dump_paths", "fresnel_reflection", "occluded", "path_gammas",
    "pseudo_brewster_angle", "radiomap_from_trace", "trace_grid", "trace_paths",
    "utd_diffraction",
]
