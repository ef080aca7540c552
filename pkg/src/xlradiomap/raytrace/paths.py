"""Path objects for single receivers.

The grid tracer works on flat records; this module turns the records of one
receiver into ``Path`` objects with explicit vertices and interactions, for
inspection, per-receiver channel assembly and JSON path dumps.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass
from pathlib import Path as FsPath

import numpy as np

from ..scene import Material, Scene
from ._trace import (KIND_DIFFRACTED, KIND_LOS, KIND_MIXED, KIND_REFLECTED, R_EDGE, R_KIND, R_NODE,
                     R_NPTS, R_PHI, R_PHIP, R_POST, R_PTS, R_R0, R_RN, R_SINB, R_SPOST,
                     R_SPRE, R_TOTAL, R_WEDGE_N)
from .channel import DEFAULT_MAX_PATHS
from .coefficients import diffraction_gamma, fresnel_reflection, utd_diffraction
from .geometry import GROUND, ROOF, SceneGeometry
from .tracer import TraceResult, trace_grid


class PathKind(str, enum.Enum):
    LOS = "LoS"
    REFLECTED = "Reflected"
    DIFFRACTED = "Diffracted"
    MIXED = "Mixed"


_KIND_FROM_CODE = {
    KIND_LOS: PathKind.LOS,
    KIND_REFLECTED: PathKind.REFLECTED,
    KIND_DIFFRACTED: PathKind.DIFFRACTED,
    KIND_MIXED: PathKind.MIXED,
}


@dataclass(frozen=True)
class Reflection:
    surface_id: int
    surface: str  # readable label such as "b3.wall1"
    theta_i: float  # incidence angle from the surface normal
    material: Material | None
    coefficient: float


@dataclass(frozen=True)
class Diffraction:
    edge_id: int
    wedge_index: float  # exterior angle / pi
    phi_incident: float
    phi_diffracted: float
    s_pre: float
    s_post: float
    sin_beta0: float
    face0_coefficient: float
    facen_coefficient: float

    def gamma(self, wavelength: float) -> complex:
        d = utd_diffraction(self.wedge_index, self.phi_diffracted, self.phi_incident,
                            self.s_pre, self.s_post, wavelength, self.sin_beta0,
                            self.face0_coefficient, self.facen_coefficient)
        return complex(diffraction_gamma(d, self.s_pre, self.s_post))


@dataclass(frozen=True, eq=False)
class Path:
    kind: PathKind
    vertices: np.ndarray  # (m, 3): source, interaction points, receiver
    interactions: tuple
    total_length: float
    key: tuple  # canonical sort key

    @property
    def first_point(self) -> np.ndarray:
        return self.vertices[1]

    @property
    def rest_length(self) -> float:
        """Length beyond the first point; zero for line-of-sight."""
        if len(self.vertices) == 2:
            return 0.0
        seg = np.linalg.norm(np.diff(self.vertices[1:], axis=0), axis=1)
        return float(seg.sum())

    def gamma(self, wavelength: float) -> complex:
        """Product of all interaction coefficients."""
        out = 1.0 + 0.0j
        for it in self.interactions:
            out *= it.coefficient if isinstance(it, Reflection) else it.gamma(wavelength)
        return out

    def power_gain(self, wavelength: float) -> float:
        """Equivalent power path gain |Gamma|^2."""
        return abs(self.gamma(wavelength)) ** 2

    def to_json(self, wavelength: float) -> dict:
        g = self.gamma(wavelength)
        inter = []
        for it in self.interactions:
            if isinstance(it, Reflection):
                inter.append({"type": "reflection", "surface": it.surface, "surface_id": it.surface_id,
                              "theta_i_rad": it.theta_i, "coefficient": it.coefficient})
            else:
                inter.append({"type": "diffraction", "edge_id": it.edge_id,
                              "wedge_index": it.wedge_index, "phi_incident_rad": it.phi_incident,
                              "phi_diffracted_rad": it.phi_diffracted})
        return {
            "kind": self.kind.value,
            "vertices_m": self.vertices.tolist(),
            "interactions": inter,
            "total_length_m": self.total_length,
            "gamma": [g.real, g.imag],
        }


@dataclass(frozen=True, eq=False)
class PathSet:
    """All paths found between one source point and one receiver."""

    source: np.ndarray
    rx: np.ndarray
    paths: tuple
    max_paths: int = DEFAULT_MAX_PATHS
    invalid: bool = False  # receiver inside a building
    element_paths: tuple | None = None  # per-element PathSets (strict mode)

    def __len__(self):
        return len(self.paths)

    def selected(self, wavelength: float) -> list:
        """The ``max_paths`` strongest paths by |Gamma|/r, in canonical order."""
        if len(self.paths) <= self.max_paths:
            return list(self.paths)
        score = [-abs(p.gamma(wavelength)) / p.total_length for p in self.paths]
        idx = sorted(sorted(range(len(self.paths)), key=lambda i: score[i])[: self.max_paths])
        return [self.paths[i] for i in idx]


def _material(scene: Scene, geom: SceneGeometry, s: int) -> Material | None:
    kind = geom.s_kind[s]
    if kind == GROUND:
        return scene.ground_material
    b = scene.buildings[geom.s_building[s]]
    return b.roof_material if kind == ROOF else b.wall_material


def _edge_tree_sequence(trace: TraceResult, q: int) -> list[int]:
    et = trace.edge_trees
    seq = []
    while et.parent[q] >= 0:
        seq.append(int(et.surface[q]))
        q = int(et.parent[q])
    return seq[::-1]


def path_from_record(trace: TraceResult, rec: np.ndarray, rx) -> Path:
    """Rebuild a ``Path`` from one trace record."""
    geom = trace.geometry
    scene = geom.scene
    kind = int(rec[R_KIND])
    npts = int(rec[R_NPTS])
    pts = rec[R_PTS:R_PTS + 3 * npts].reshape(npts, 3)
    vertices = np.vstack([trace.source, pts, np.asarray(rx, dtype=float)])
    node = int(rec[R_NODE])
    pre = list(trace.tree.sequence(node))
    if kind in (KIND_DIFFRACTED, KIND_MIXED):
        post = _edge_tree_sequence(trace, int(rec[R_POST]))
        slots = pre + [None] + post
    else:
        slots = pre
    inter = []
    for i, s in enumerate(slots):
        if s is None:
            inter.append(Diffraction(
                int(rec[R_EDGE]), float(rec[R_WEDGE_N]), float(rec[R_PHIP]), float(rec[R_PHI]),
                float(rec[R_SPRE]), float(rec[R_SPOST]), float(rec[R_SINB]),
                float(rec[R_R0]), float(rec[R_RN]),
            ))
            continue
        d = vertices[i + 1] - vertices[i]
        cos_t = min(abs(float(d @ geom.s_normal[s])) / float(np.linalg.norm(d)), 1.0)
        theta = math.acos(cos_t)
        if geom.s_kind[s] == ROOF:
            coef = -1.0
        else:
            coef = float(fresnel_reflection(geom.s_eps[s], min(theta, math.pi / 2)))
        inter.append(Reflection(int(s), geom.surface_label(s), theta, _material(scene, geom, s), coef))
    key = (kind, len(slots), node, int(rec[R_EDGE]), int(rec[R_POST]))
    return Path(_KIND_FROM_CODE[kind], vertices, tuple(inter), float(rec[R_TOTAL]), key)


def path_set_from_trace(trace: TraceResult, cell: int, max_paths: int = DEFAULT_MAX_PATHS) -> PathSet:
    rx = trace.receivers[cell]
    paths = tuple(path_from_record(trace, rec, rx) for rec in trace.cell_records(cell))
    return PathSet(trace.source.copy(), rx.copy(), paths, max_paths, bool(trace.invalid[cell]))


def trace_paths(
    scene: Scene,
    element_pos,
    rx,
    max_depth: int = 3,
    enable_diffraction: bool = False,
    max_paths: int = DEFAULT_MAX_PATHS,
    cell_capacity: int = 256,
) -> PathSet:
    """Every path from ``element_pos`` to ``rx`` up to ``max_depth`` interactions."""
    trace = trace_grid(scene, element_pos, np.asarray(rx, dtype=float).reshape(1, 3), max_depth,
                       enable_diffraction, threads=1, cell_capacity=cell_capacity)
    return path_set_from_trace(trace, 0, max_paths)


def dump_paths(trace: TraceResult, cells, wavelength: float, path, labels=None) -> FsPath:
    """Write the paths of selected cells to a JSON debug file.

    ``labels`` replaces the trace-local cell indices in the output, e.g. with
    grid indices when only a few receivers were traced.
    """
    out = []
    labels = list(cells) if labels is None else list(labels)
    for c, label in zip(cells, labels, strict=True):
        ps = path_set_from_trace(trace, int(c))
        out.append({
            "cell": int(label),
            "rx_m": ps.rx.tolist(),
            "invalid": ps.invalid,
            "paths": [p.to_json(wavelength) for p in ps.paths],
        })
    path = FsPath(path)
    path.write_text(json.dumps({"source_m": trace.source.tolist(), "cells": out}, indent=1))
    return path
