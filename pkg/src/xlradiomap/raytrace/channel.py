"""Per-path interaction coefficients, path selection and channel matrices."""

from __future__ import annotations

import numpy as np

from ..antenna import element_gain_linear
from ..array import ArrayConfig, element_positions
from ..beammap import departure_angles
from ..errors import SingularityError
from ._trace import (KIND_DIFFRACTED, KIND_MIXED, R_GAMMA, R_KIND, R_PHI, R_PHIP, R_R0, R_RN,
                     R_SINB, R_SPOST, R_SPRE, R_WEDGE_N)
from .coefficients import diffraction_gamma, utd_diffraction

DEFAULT_MAX_PATHS = 16


def path_gammas(records: np.ndarray, wavelength: float) -> np.ndarray:
    """Complex interaction coefficient of every record at ``wavelength``."""
    gamma = records[:, R_GAMMA].astype(complex)
    kinds = records[:, R_KIND]
    diff = np.flatnonzero((kinds == KIND_DIFFRACTED) | (kinds == KIND_MIXED))
    if diff.size:
        r = records[diff]
        d = utd_diffraction(r[:, R_WEDGE_N], r[:, R_PHI], r[:, R_PHIP], r[:, R_SPRE],
                            r[:, R_SPOST], wavelength, r[:, R_SINB], r[:, R_R0], r[:, R_RN])
        gamma[diff] *= diffraction_gamma(d, r[:, R_SPRE], r[:, R_SPOST])
    return gamma


def select_strongest(offsets: np.ndarray, strength: np.ndarray, max_paths: int) -> np.ndarray:
    """Indices of the ``max_paths`` strongest records per cell, in record order.

    ``offsets`` is the CSR row pointer over cells. Ties keep the earlier
    (canonical) record.
    """
    n = strength.size
    if n == 0:
        return np.zeros(0, dtype=np.int64)
    counts = np.diff(offsets)
    cells = np.repeat(np.arange(counts.size), counts)
    if counts.max() <= max_paths:
        return np.arange(n)
    order = np.lexsort((np.arange(n), -strength, cells))
    rank = np.arange(n) - np.repeat(offsets[:-1], counts)
    keep = order[rank < max_paths]
    return np.sort(keep)


def cell_slots(offsets: np.ndarray, selected: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Owning cell and position within the cell for each selected record."""
    cells = np.searchsorted(offsets, selected, side="right") - 1
    slot = np.zeros(selected.size, dtype=np.int64)
    if selected.size:
        first = np.r_[True, cells[1:] != cells[:-1]]
        start = np.maximum.accumulate(np.where(first, np.arange(selected.size), 0))
        slot = np.arange(selected.size) - start
    return cells, slot


def accumulate_cells(n_cells: int, cells: np.ndarray, slot: np.ndarray, contrib: np.ndarray) -> np.ndarray:
    """Per-cell sums that start from zero and add paths in slot order."""
    acc = np.zeros(n_cells, dtype=complex)
    for j in range(int(slot.max()) + 1 if slot.size else 0):
        sel = slot == j
        acc[cells[sel]] += contrib[sel]
    return acc


def assemble_channel(path_set, config: ArrayConfig) -> np.ndarray:
    """Channel matrix H (N x N_p): one column per retained path, zero-padded.

    Element ``n`` reaches each path's first interaction point directly and
    then shares the rest of the path, unless the path set carries paths
    traced from every element separately.
    """
    lam = config.wavelength
    h = np.zeros((config.n_elements, path_set.max_paths), dtype=complex)
    pos = element_positions(config, path_set.source)
    if path_set.element_paths is None:
        groups = [(np.arange(config.n_elements), path_set.selected(lam))]
    else:
        groups = [(np.array([n]), ps.selected(lam)) for n, ps in enumerate(path_set.element_paths)]
    for rows, plist in groups:
        for p, path in enumerate(plist):
            delta = path.first_point[None, :] - pos[rows]
            r = np.linalg.norm(delta, axis=1)
            if np.any(r == 0):
                raise SingularityError("an interaction point coincides with an array element")
            r = r + path.rest_length
            theta, phi = departure_angles(delta)
            g = element_gain_linear(config.element_pattern, theta, phi)
            col = np.sqrt(g) * np.exp(2j * np.pi * r / lam) / r
            gamma = path.gamma(lam)
            h[rows, p] = col if gamma == 1 else col * gamma
    return h
