"""K x K scalar fields with geo-referencing, plus their on-disk format.

A map is stored as two files: a little-endian float32 raster in row-major
order (row 0 is the southernmost row) and a JSON sidecar with the
geo-referencing metadata. Invalid cells (building interiors) are NaN.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ValidationError


class Unit(str, enum.Enum):
    DBM = "dBm"
    DB = "dB"
    METERS = "meters"
    LINEAR_MW = "linear_mW"


@dataclass(frozen=True, eq=False)
class GridMap:
    values: np.ndarray
    cell_size: float
    origin: tuple[float, float]
    unit: Unit
    # cells whose value was substituted (e.g. receiver closer than one wavelength)
    flagged: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2 or values.shape[0] != values.shape[1] or values.shape[0] < 1:
            raise ValidationError(f"grid map must be K x K with K >= 1, got {values.shape}")
        if not self.cell_size > 0:
            raise ValidationError(f"cell_size must be positive, got {self.cell_size}")
        if np.isinf(values).any():
            raise ValidationError("grid map values must be finite or NaN")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "origin", (float(self.origin[0]), float(self.origin[1])))
        object.__setattr__(self, "unit", Unit(self.unit))

    @property
    def k(self) -> int:
        return self.values.shape[0]

    @property
    def extent(self) -> float:
        return self.k * self.cell_size

    def valid_mask(self) -> np.ndarray:
        return np.isfinite(self.values)

    def cell_centers(self) -> tuple[np.ndarray, np.ndarray]:
        """Return (x, y) arrays of shape (K, K); ``x`` varies along columns."""
        c = (np.arange(self.k) + 0.5) * self.cell_size
        return np.meshgrid(self.origin[0] + c, self.origin[1] + c)

    def with_values(self, values, unit=None) -> "GridMap":
        return GridMap(values, self.cell_size, self.origin, unit or self.unit)

    def same_grid(self, other: "GridMap") -> bool:
        return (
            self.k == other.k
            and self.cell_size == other.cell_size
            and self.origin == other.origin
        )

    def __eq__(self, other):
        if not isinstance(other, GridMap):
            return NotImplemented
        return (
            self.same_grid(other)
            and self.unit == other.unit
            and np.array_equal(self.values, other.values, equal_nan=True)
        )


def sidecar_path(path) -> Path:
    return Path(path).with_suffix(".json")


def save_gridmap(grid: GridMap, path) -> Path:
    """Write ``grid`` to ``path`` (float32 raster) and its JSON sidecar."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if path.suffix == ".json":
        raise ValidationError("grid raster path must not use the .json suffix")
    path.write_bytes(grid.values.astype("<f4").tobytes(order="C"))
    meta = {
        "k": grid.k,
        "cell_size_m": grid.cell_size,
        "origin_m": list(grid.origin),
        "unit": grid.unit.value,
    }
    if grid.flagged is not None and grid.flagged.any():
        meta["flagged_cells"] = np.flatnonzero(grid.flagged).tolist()
    sidecar_path(path).write_text(json.dumps(meta, indent=2) + "\n")
    return path


def load_gridmap(path) -> GridMap:
    path = Path(path)
    meta_file = sidecar_path(path)
    try:
        meta = json.loads(meta_file.read_text())
        k = int(meta["k"])
        cell = float(meta["cell_size_m"])
        origin = tuple(float(v) for v in meta["origin_m"])
        unit = Unit(meta["unit"])
        flagged_cells = [int(i) for i in meta.get("flagged_cells", [])]
    except FileNotFoundError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ValidationError(f"{meta_file}: malformed grid sidecar ({exc})") from exc
    raw = np.frombuffer(path.read_bytes(), dtype="<f4")
    if raw.size != k * k:
        raise ValidationError(f"{path}: expected {k * k} float32 values, found {raw.size}")
    flagged = None
    if flagged_cells:
        if min(flagged_cells) < 0 or max(flagged_cells) >= k * k:
            raise ValidationError(f"{meta_file}: flagged cell index out of range")
        flagged = np.zeros(k * k, dtype=bool)
        flagged[flagged_cells] = True
        flagged = flagged.reshape(k, k)
    return GridMap(raw.reshape(k, k).astype(np.float64), cell, origin, unit, flagged=flagged)
