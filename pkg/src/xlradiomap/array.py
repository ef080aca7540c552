"""Uniform planar array geometry, far-field precoding and the band plan.

The array face is the vertical plane ``x = tx_x`` with boresight along +x.
Elements are ordered row-major: ``n = row * n_cols + col``. Column offsets
run along +y, and row 0 is the top row (row offsets run along -z).

Local departure angles toward a point at offset ``(dx, dy, dz)`` from an
element are::

    phi   = atan2(-dy, dx)        # positive = clockwise seen from above
    theta = pi/2 - atan2(dz, hypot(dx, dy))
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

import numpy as np

from .antenna import TR38901, ElementPattern
from .errors import ConfigurationError, DomainError, ValidationError

SPEED_OF_LIGHT = 3.0e8


@dataclass(frozen=True)
class ArrayConfig:
    carrier_hz: float
    n_rows: int
    n_cols: int
    beam_azimuth: float = 0.0  # radians
    beam_zenith: float = math.pi / 2
    element_pattern: ElementPattern = TR38901
    spacing_wavelengths: float = 0.5

    def __post_init__(self):
        if not self.carrier_hz > 0:
            raise ValidationError(f"carrier_hz must be positive, got {self.carrier_hz}")
        if self.n_rows < 1 or self.n_cols < 1:
            raise ValidationError(f"array needs >= 1 row and column, got {self.n_rows}x{self.n_cols}")
        if self.spacing_wavelengths != 0.5:
            raise ValidationError("element spacing is fixed at half a wavelength")

    @property
    def n_elements(self) -> int:
        return self.n_rows * self.n_cols

    @property
    def wavelength(self) -> float:
        return SPEED_OF_LIGHT / self.carrier_hz

    @property
    def spacing(self) -> float:
        return self.spacing_wavelengths * self.wavelength

    @property
    def aperture_diagonal(self) -> float:
        d = self.spacing
        return math.hypot((self.n_rows - 1) * d, (self.n_cols - 1) * d)

    @property
    def config_id(self) -> str:
        az = round(math.degrees(self.beam_azimuth), 6)
        cid = f"{self.carrier_hz / 1e9:g}GHz_{self.n_rows}x{self.n_cols}_az{az:+g}"
        if abs(self.beam_zenith - math.pi / 2) > 1e-12:
            cid += f"_ze{round(math.degrees(self.beam_zenith), 6):g}"
        if self.element_pattern != TR38901:
            cid += f"_{self.element_pattern.kind.value}"
        return cid

    def with_beam(self, azimuth_rad: float) -> "ArrayConfig":
        return replace(self, beam_azimuth=azimuth_rad)


@dataclass(frozen=True, eq=False)
class PrecodingVector:
    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=complex)
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    def __len__(self):
        return self.weights.size


def index_offsets(config: ArrayConfig) -> tuple[np.ndarray, np.ndarray]:
    """Per-element (vertical, horizontal) index offsets from the array center."""
    rows, cols = np.divmod(np.arange(config.n_elements), config.n_cols)
    return rows - (config.n_rows - 1) / 2.0, cols - (config.n_cols - 1) / 2.0


def element_positions(config: ArrayConfig, center=(0.0, 0.0, 40.0)) -> np.ndarray:
    """(N, 3) element coordinates in meters, row-major."""
    p_v, p_h = index_offsets(config)
    d = config.spacing
    cx, cy, cz = (float(v) for v in center)
    out = np.empty((config.n_elements, 3))
    out[:, 0] = cx
    out[:, 1] = cy + p_h * d
    out[:, 2] = cz - p_v * d
    return out


def precoding_vector(config: ArrayConfig) -> PrecodingVector:
    if not abs(config.beam_azimuth) < math.pi / 2:
        raise DomainError("beam azimuth must lie in the front hemisphere (|phi| < pi/2)")
    p_v, p_h = index_offsets(config)
    st = math.sin(config.beam_zenith)
    phase = 2 * math.pi * config.spacing_wavelengths * (
        p_h * st * math.sin(config.beam_azimuth) + p_v * math.cos(config.beam_zenith)
    )
    return PrecodingVector(np.exp(1j * phase) / math.sqrt(config.n_elements))


# --------------------------------------------------------------------------
# band plan


@dataclass(frozen=True)
class BandPlanEntry:
    carrier_hz: float
    rows: int
    cols: int
    beams_deg: tuple[float, ...] = (0.0,)

    def __post_init__(self):
        object.__setattr__(self, "beams_deg", tuple(float(b) for b in self.beams_deg))
        if not self.carrier_hz > 0 or self.rows < 1 or self.cols < 1:
            raise ConfigurationError(f"invalid band-plan entry {self}")
        if not self.beams_deg:
            raise ConfigurationError("band-plan entry needs at least one beam")
        if any(not abs(b) < 90 for b in self.beams_deg):
            raise ConfigurationError("beam angles must lie in (-90, 90) degrees")

    @property
    def label(self) -> str:
        return f"{self.carrier_hz / 1e9:g}GHz_{self.rows}x{self.cols}"

    @property
    def beam_spacing_deg(self) -> float | None:
        if len(self.beams_deg) < 2:
            return None
        return self.beams_deg[1] - self.beams_deg[0]


def _entry_from_json(obj, i) -> BandPlanEntry:
    if not isinstance(obj, dict):
        raise ConfigurationError(f"band plan entry {i}: expected an object")
    try:
        return BandPlanEntry(
            float(obj["carrier_hz"]), int(obj["rows"]), int(obj["cols"]),
            tuple(obj.get("beams_deg", [0.0])),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigurationError(f"band plan entry {i}: {exc}") from exc


def parse_band_plan(data) -> tuple[BandPlanEntry, ...]:
    if not isinstance(data, list) or not data:
        raise ConfigurationError("band plan must be a non-empty list")
    return tuple(_entry_from_json(obj, i) for i, obj in enumerate(data))


def load_band_plan(path=None) -> tuple[BandPlanEntry, ...]:
    """Load a band plan; ``None`` returns the shipped default."""
    if path is None:
        text = resources.files("xlradiomap").joinpath("data", "band_plan.json").read_text()
    else:
        text = Path(path).read_text()
    try:
        return parse_band_plan(json.loads(text))
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"band plan is not valid JSON ({exc})") from exc


def default_band_plan() -> tuple[BandPlanEntry, ...]:
    return load_band_plan(None)


def codebook(entry: BandPlanEntry, pattern: ElementPattern = TR38901) -> list[ArrayConfig]:
    if not isinstance(entry, BandPlanEntry):
        raise ConfigurationError(f"not a band-plan entry: {entry!r}")
    return [
        ArrayConfig(entry.carrier_hz, entry.rows, entry.cols, math.radians(b),
                    element_pattern=pattern)
        for b in entry.beams_deg
    ]


def find_entry(plan, carrier_hz: float, rows: int, cols: int) -> BandPlanEntry:
    for e in plan:
        if math.isclose(e.carrier_hz, carrier_hz, rel_tol=1e-9) and (e.rows, e.cols) == (rows, cols):
            return e
    raise ConfigurationError(
        f"no band-plan entry for {carrier_hz / 1e9:g} GHz {rows}x{cols}"
    )


_PLAN_SPEC = re.compile(r"^\s*([0-9.]+)\s*GHz\s*:\s*(\d+)x(\d+)\s*(?::\s*(-?\d+))?\s*$", re.I)


def parse_config_spec(text: str, plan=None) -> ArrayConfig:
    """Parse a CLI configuration string.

    Two forms are accepted: a band-plan reference ``"6.7GHz:32x32:5"`` (the
    trailing beam index defaults to 0) or explicit parameters
    ``"carrier_hz=3.5e9,rows=8,cols=8,az_deg=10,pattern=isotropic"``.
    """
    m = _PLAN_SPEC.match(text)
    if m:
        plan = plan if plan is not None else default_band_plan()
        entry = find_entry(plan, float(m.group(1)) * 1e9, int(m.group(2)), int(m.group(3)))
        idx = int(m.group(4) or 0)
        beams = codebook(entry)
        if not -len(beams) <= idx < len(beams):
            raise ConfigurationError(f"beam index {idx} out of range for {entry.label}")
        return beams[idx]
    fields = {}
    for part in text.split(","):
        if "=" not in part:
            raise ConfigurationError(f"cannot parse config spec {text!r}")
        k, v = part.split("=", 1)
        fields[k.strip()] = v.strip()
    unknown = set(fields) - {"carrier_hz", "rows", "cols", "az_deg", "zenith_deg", "pattern"}
    if unknown:
        raise ConfigurationError(f"unknown config fields {sorted(unknown)}")
    try:
        pattern = ElementPattern(fields.get("pattern", "tr38901"))
        return ArrayConfig(
            float(fields["carrier_hz"]), int(fields["rows"]), int(fields["cols"]),
            math.radians(float(fields.get("az_deg", 0.0))),
            math.radians(float(fields.get("zenith_deg", 90.0))),
            element_pattern=pattern,
        )
    except (KeyError, ValueError) as exc:
        raise ConfigurationError(f"invalid config spec {text!r} ({exc})") from exc
