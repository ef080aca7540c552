"""Grid-wide path tracing.

``trace_grid`` runs the compiled validator over all receivers in fixed-size
chunks and returns a ``TraceResult``: a compressed per-cell list of path
records in canonical order. Geometry does not depend on the carrier, so one
trace serves every array configuration that shares the source point.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .._kernels import run_chunked
from ..errors import ValidationError
from ..scene import Scene
from . import _trace
from ._trace import (KIND_DIFFRACTED, KIND_LOS, KIND_MIXED, KIND_REFLECTED, R_DEPTH, R_EDGE,
                     R_KIND, R_NODE, R_POST, RECORD_WIDTH)
from .geometry import SceneGeometry, build_geometry
from .imagetree import EdgeTrees, ImageTree, build_edge_trees, build_image_tree, edge_source_pairs

DEFAULT_CELL_CAPACITY = 64
TRACE_CHUNK = 256

_EMPTY_I = np.zeros(0, dtype=np.int64)


@dataclass(frozen=True, eq=False)
class TraceResult:
    geometry: SceneGeometry
    source: np.ndarray
    receivers: np.ndarray  # (n, 3)
    tree: ImageTree
    max_depth: int
    diffraction: bool
    offsets: np.ndarray  # (n+1,) CSR into records
    records: np.ndarray  # (m, RECORD_WIDTH)
    invalid: np.ndarray  # receivers inside a building
    edge_trees: EdgeTrees | None = None

    @property
    def n_cells(self) -> int:
        return self.receivers.shape[0]

    def cell_records(self, i: int) -> np.ndarray:
        return self.records[self.offsets[i]:self.offsets[i + 1]]

    def path_counts(self) -> np.ndarray:
        return np.diff(self.offsets)


def canonical_order(cells: np.ndarray, records: np.ndarray) -> np.ndarray:
    """Sort key: cell, kind, depth, image node, edge, edge-tree node."""
    return np.lexsort((
        records[:, R_POST], records[:, R_EDGE], records[:, R_NODE],
        records[:, R_DEPTH], records[:, R_KIND], cells,
    ))


def trace_grid(
    scene: Scene,
    source,
    receivers,
    max_depth: int = 3,
    enable_diffraction: bool = False,
    threads: int | None = None,
    cell_capacity: int = DEFAULT_CELL_CAPACITY,
    geometry: SceneGeometry | None = None,
) -> TraceResult:
    if not 0 <= max_depth <= 3:
        raise ValidationError(f"max_depth must be in [0, 3], got {max_depth}")
    source = np.asarray(source, dtype=np.float64).reshape(3)
    rxs = np.ascontiguousarray(np.asarray(receivers, dtype=np.float64).reshape(-1, 3))
    geom = geometry if geometry is not None else build_geometry(scene)
    max_rx_z = float(rxs[:, 2].max()) if rxs.size else 0.0
    tree = build_image_tree(geom, source, max_depth, max_rx_z)

    if enable_diffraction and geom.n_edges and max_depth >= 1:
        pre_start, pre_nodes = edge_source_pairs(geom, tree, max_depth - 1)
        et = build_edge_trees(geom, max_depth - 1, max_rx_z)
        et_args = (et.start, et.parent, et.surface, et.depth, et.image_xy, et.z_sign, et.z_shift)
        diffraction = True
    else:
        et = None
        pre_start, pre_nodes = np.zeros(geom.n_edges + 1, dtype=np.int64), _EMPTY_I
        et_args = (np.zeros(geom.n_edges + 1, dtype=np.int64), _EMPTY_I, _EMPTY_I, _EMPTY_I,
                   np.zeros((0, 2)), np.zeros(0), np.zeros(0))
        diffraction = False

    quick = _trace.prefilter_table(tree.parent, tree.surface, tree.image, geom.s_kind,
                                   geom.s_normal, geom.s_offset, geom.s_a, geom.s_b,
                                   geom.s_height, geom.s_building, geom.b_bbox)
    n = rxs.shape[0]
    cap = int(cell_capacity)
    n_chunks = -(-n // TRACE_CHUNK) if n else 0
    chunk_out: list = [None] * n_chunks
    invalid = np.zeros(n, dtype=bool)
    counts = np.zeros(n, dtype=np.int64)

    def work(s, e):
        out = np.empty(((e - s) * cap, RECORD_WIDTH))
        _trace.trace_cells(
            rxs[s:e], source, max_depth, cap,
            tree.parent, tree.surface, tree.depth, tree.image, quick,
            geom.s_kind, geom.s_normal, geom.s_offset, geom.s_a, geom.s_b, geom.s_height,
            geom.s_building, geom.s_eps,
            geom.b_start, geom.vx, geom.vy, geom.b_height, geom.b_bbox,
            diffraction,
            geom.e_xy, geom.e_height, geom.e_n, geom.e_face0_angle, geom.e_face0_surf,
            geom.e_facen_surf,
            pre_start, pre_nodes, *et_args,
            out, counts[s:e], invalid[s:e],
        )
        c = counts[s:e]
        keep = (np.arange(cap)[None, :] < c[:, None]).ravel()
        chunk_out[s // TRACE_CHUNK] = out[keep]

    run_chunked(work, n, threads, chunk=TRACE_CHUNK)
    records = (np.concatenate(chunk_out) if chunk_out else np.zeros((0, RECORD_WIDTH)))
    cells = np.repeat(np.arange(n), counts)
    order = canonical_order(cells, records)
    records = records[order]
    offsets = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(counts, out=offsets[1:])
    return TraceResult(geom, source, rxs, tree, max_depth, diffraction, offsets, records, invalid, et)


KIND_NAMES = {
    KIND_LOS: "LoS",
    KIND_REFLECTED: "Reflected",
    KIND_DIFFRACTED: "Diffracted",
    KIND_MIXED: "Mixed",
}


def record_kind(record) -> int:
    return int(record[R_KIND])
