"""Analytical line-of-sight beam maps.

A beam map is the received power of one precoded beam over the observation
plane with no environment at all: per-element directional gain, exact
per-element distances and free-space spreading. It doubles as the spatial
input feature for learned radiomap models.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._kernels import beamformed_rays
from .antenna import element_gain_linear
from .array import ArrayConfig, element_positions, precoding_vector
from .errors import SingularityError, ValidationError
from .gridmap import GridMap, Unit

# dBm written for cells that receive no energy at all
NO_SIGNAL_DBM = -250.0


@dataclass(frozen=True)
class ObservationPlane:
    k: int = 128
    cell_size: float = 10.0
    height: float = 1.5
    center: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if self.k < 1 or not self.cell_size > 0:
            raise ValidationError(f"need k >= 1 and cell_size > 0, got {self.k}, {self.cell_size}")
        object.__setattr__(self, "center", (float(self.center[0]), float(self.center[1])))

    @property
    def origin(self) -> tuple[float, float]:
        half = 0.5 * self.k * self.cell_size
        return self.center[0] - half, self.center[1] - half

    def cell_centers(self) -> tuple[np.ndarray, np.ndarray]:
        c = (np.arange(self.k) + 0.5) * self.cell_size
        ox, oy = self.origin
        return np.meshgrid(ox + c, oy + c)

    def points(self) -> np.ndarray:
        """(K*K, 3) receiver positions, row-major."""
        x, y = self.cell_centers()
        return np.column_stack([x.ravel(), y.ravel(), np.full(x.size, self.height)])

    def empty_grid(self, unit=Unit.DBM) -> GridMap:
        return GridMap(np.zeros((self.k, self.k)), self.cell_size, self.origin, unit)


def departure_angles(delta: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Zenith and azimuth of offsets ``delta`` (..., 3) in the array frame."""
    dx, dy, dz = delta[..., 0], delta[..., 1], delta[..., 2]
    theta = math.pi / 2 - np.arctan2(dz, np.hypot(dx, dy))
    # adding 0.0 turns -0.0 into +0.0, so a point straight above or below
    # an element gets phi = 0 regardless of the sign of its zero offsets
    phi = np.arctan2(-dy + 0.0, dx + 0.0)
    return theta, phi


def los_channel(config: ArrayConfig, rx, tx=(0.0, 0.0, 40.0)) -> np.ndarray:
    """Per-element free-space coefficients toward ``rx`` (length N, row-major)."""
    pos = element_positions(config, tx)
    delta = np.asarray(rx, dtype=float)[None, :] - pos
    r = np.linalg.norm(delta, axis=1)
    if np.any(r == 0):
        raise SingularityError("receiver coincides with an array element")
    theta, phi = departure_angles(delta)
    g = element_gain_linear(config.element_pattern, theta, phi)
    return np.sqrt(g) * np.exp(2j * np.pi * r / config.wavelength) / r


def power_scale(config: ArrayConfig, p_t_mw: float) -> float:
    lam = config.wavelength
    return lam * lam / (4 * math.pi) ** 2 * p_t_mw


def to_dbm(power_mw: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        out = 10.0 * np.log10(power_mw)
    return np.where(power_mw > 0, out, NO_SIGNAL_DBM)


def beam_map_value(config: ArrayConfig, rx, p_t_mw: float = 1.0, tx=(0.0, 0.0, 40.0)) -> float:
    """Received power in linear mW for one receiver point."""
    h = los_channel(config, rx, tx)
    w = precoding_vector(config).weights
    g = np.vdot(w, h)
    return power_scale(config, p_t_mw) * abs(g) ** 2


def near_element_mask(config: ArrayConfig, pts: np.ndarray, tx) -> np.ndarray:
    """Receivers closer than one wavelength to any element."""
    lam = config.wavelength
    reach = lam + 0.5 * config.aperture_diagonal
    tx = np.asarray(tx, dtype=float)
    cand = np.flatnonzero(np.all(np.abs(pts - tx) <= reach, axis=1))
    mask = np.zeros(len(pts), dtype=bool)
    if cand.size:
        pos = element_positions(config, tx)
        d = np.linalg.norm(pts[cand, None, :] - pos[None, :, :], axis=2).min(axis=1)
        mask[cand[d < lam]] = True
    return mask


def apply_singularity_rule(dbm: np.ndarray, flagged: np.ndarray) -> np.ndarray:
    if flagged.any():
        ok = ~flagged & np.isfinite(dbm)
        dbm = dbm.copy()
        dbm[flagged] = dbm[ok].max() if ok.any() else NO_SIGNAL_DBM
    return dbm


def compute_beam_map(
    config: ArrayConfig,
    plane: ObservationPlane,
    tx=(0.0, 0.0, 40.0),
    p_t_mw: float = 1.0,
    threads: int | None = None,
) -> GridMap:
    """Beam map in dBm over ``plane`` for an array centred at ``tx``."""
    if not plane.height < tx[2]:
        raise ValidationError("observation plane must lie below the transmitter")
    pts = plane.points()
    w = precoding_vector(config).weights
    g = beamformed_rays(config, w, tx, pts[:, 0], pts[:, 1], pts[:, 2], threads=threads)
    power = power_scale(config, p_t_mw) * (g.real * g.real + g.imag * g.imag)
    flagged = near_element_mask(config, pts, tx)
    dbm = apply_singularity_rule(to_dbm(power), flagged)
    k = plane.k
    return GridMap(dbm.reshape(k, k), plane.cell_size, plane.origin, Unit.DBM,
                   flagged=flagged.reshape(k, k))
