"""Radiomaps from traced paths and a beamformed array.

Per cell the beamformed sum is ``g = sum_p sum_n conj(w_n) h_{n,p}`` over
the retained paths, and the power ``lambda^2/(4 pi)^2 * P_t * |g|^2``. Paths
are traced once from the array center. Each element reaches a path's first
interaction point directly and then shares the remaining geometry, which
keeps the per-element phase exact along the path's first leg. A strict mode
traces from every element instead; it is meant for validating small arrays.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace

import numpy as np

from .._kernels import beamformed_rays
from ..array import ArrayConfig, element_positions, precoding_vector
from ..beammap import ObservationPlane, apply_singularity_rule, near_element_mask, power_scale, to_dbm
from ..errors import ValidationError
from ..gridmap import GridMap, Unit
from ..scene import Scene
from ._trace import R_P1, R_REST, R_TOTAL
from .channel import DEFAULT_MAX_PATHS, accumulate_cells, cell_slots, path_gammas, select_strongest
from .tracer import DEFAULT_CELL_CAPACITY, TraceResult, trace_grid

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class RadiomapOptions:
    max_depth: int = 3
    enable_diffraction: bool = False
    max_paths: int = DEFAULT_MAX_PATHS
    p_t_mw: float = 1.0
    per_element: bool = False
    threads: int | None = None
    cell_capacity: int = DEFAULT_CELL_CAPACITY

    def __post_init__(self):
        if not 0 <= self.max_depth <= 3:
            raise ValidationError(f"max_depth must be in [0, 3], got {self.max_depth}")
        if self.max_paths < 1:
            raise ValidationError(f"max_paths must be >= 1, got {self.max_paths}")
        if self.cell_capacity < self.max_paths:
            raise ValidationError("cell_capacity must be at least max_paths")
        if not self.p_t_mw > 0:
            raise ValidationError(f"p_t_mw must be positive, got {self.p_t_mw}")


def beamformed_sums(trace: TraceResult, config: ArrayConfig, weights, center,
                    max_paths: int, threads=None) -> np.ndarray:
    """Per-cell complex sums over the strongest ``max_paths`` paths of ``trace``."""
    recs = trace.records
    gamma = path_gammas(recs, config.wavelength)
    sel = select_strongest(trace.offsets, np.abs(gamma) / recs[:, R_TOTAL], max_paths)
    cells, slot = cell_slots(trace.offsets, sel)
    r = recs[sel]
    g = beamformed_rays(config, weights, center, r[:, R_P1], r[:, R_P1 + 1], r[:, R_P1 + 2],
                        extra=r[:, R_REST], threads=threads)
    gsel = gamma[sel]
    contrib = g if np.all(gsel == 1) else g * gsel
    return accumulate_cells(trace.n_cells, cells, slot, contrib)


def _finish(acc, trace_invalid, config, options, pts, tx, k, cell_size, origin) -> GridMap:
    power = power_scale(config, options.p_t_mw) * (acc.real * acc.real + acc.imag * acc.imag)
    dbm = to_dbm(power)
    dbm[trace_invalid] = np.nan
    flagged = near_element_mask(config, pts, tx) & ~trace_invalid
    dbm = apply_singularity_rule(dbm, flagged)
    return GridMap(dbm.reshape(k, k), cell_size, origin, Unit.DBM, flagged=flagged.reshape(k, k))


def radiomap_from_trace(trace: TraceResult, config: ArrayConfig, plane: ObservationPlane,
                        options: RadiomapOptions = RadiomapOptions()) -> GridMap:
    """Radiomap of ``config`` from a trace made at the array center.

    The same trace serves every configuration placed at that center.
    """
    if trace.n_cells != plane.k * plane.k:
        raise ValidationError("trace receivers do not match the observation plane")
    w = precoding_vector(config).weights
    acc = beamformed_sums(trace, config, w, trace.source, options.max_paths, options.threads)
    return _finish(acc, trace.invalid, config, options, trace.receivers, trace.source,
                   plane.k, plane.cell_size, plane.origin)


def compute_radiomap(
    scene: Scene,
    config: ArrayConfig,
    plane: ObservationPlane,
    options: RadiomapOptions = RadiomapOptions(),
    tx=None,
) -> GridMap:
    """Radiomap in dBm over ``plane``; cells inside buildings are NaN."""
    tx = np.asarray(scene.tx_position if tx is None else tx, dtype=float)
    if not plane.height < tx[2]:
        raise ValidationError("observation plane must lie below the transmitter")
    log.info("radiomap %s: depth %d, diffraction %s, N_p cap %d, %s geometry",
             config.config_id, options.max_depth, options.enable_diffraction, options.max_paths,
             "per-element" if options.per_element else "shared")
    pts = plane.points()
    if not options.per_element:
        trace = trace_grid(scene, tx, pts, options.max_depth, options.enable_diffraction,
                           options.threads, options.cell_capacity)
        return radiomap_from_trace(trace, config, plane, options)

    w = precoding_vector(config).weights
    single = replace(config, n_rows=1, n_cols=1, beam_azimuth=0.0)
    acc = np.zeros(pts.shape[0], dtype=complex)
    invalid = None
    for n, pos in enumerate(element_positions(config, tx)):
        trace = trace_grid(scene, pos, pts, options.max_depth, options.enable_diffraction,
                           options.threads, options.cell_capacity)
        acc += beamformed_sums(trace, single, w[n:n + 1], pos, options.max_paths, options.threads)
        invalid = trace.invalid
    return _finish(acc, invalid, config, options, pts, tx, plane.k, plane.cell_size, plane.origin)
