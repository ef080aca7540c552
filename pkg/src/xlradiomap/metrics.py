"""Coverage statistics and prediction-error metrics for dBm grid maps.

All metrics act on a boolean mask of valid cells. By default that is every
finite cell that was not flagged (building interiors are NaN; flagged cells
hold a substituted value).
"""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .errors import ValidationError
from .gridmap import GridMap, Unit

COVERAGE_THRESHOLD_DBM = -120.0
REPORT_COLUMNS = ("scene_id", "config_id", "mae_db", "rmse_db", "coverage_ratio_120", "pmr_db", "c5")


def default_mask(*maps: GridMap) -> np.ndarray:
    """Cells that are finite and unflagged in every map."""
    mask = np.ones(maps[0].values.shape, dtype=bool)
    for m in maps:
        mask &= np.isfinite(m.values)
        if m.flagged is not None:
            mask &= ~m.flagged
    return mask


def _masked(grid: GridMap, mask) -> np.ndarray:
    if grid.unit != Unit.DBM:
        raise ValidationError(f"expected a dBm map, got {grid.unit.value}")
    mask = default_mask(grid) if mask is None else np.asarray(mask, dtype=bool)
    if mask.shape != grid.values.shape:
        raise ValidationError(f"mask shape {mask.shape} does not match map {grid.values.shape}")
    vals = grid.values[mask]
    if vals.size == 0:
        raise ValidationError("mask selects no cells")
    if not np.isfinite(vals).all():
        raise ValidationError("mask selects non-finite cells")
    return vals


def _linear(dbm: np.ndarray) -> np.ndarray:
    return np.power(10.0, dbm / 10.0)


def mae_rmse(pred: GridMap, truth: GridMap, mask=None) -> tuple[float, float]:
    """Mean absolute and root-mean-square dB error over masked cells."""
    if pred.values.shape != truth.values.shape:
        raise ValidationError(f"shape mismatch: {pred.values.shape} vs {truth.values.shape}")
    if pred.unit != truth.unit:
        raise ValidationError(f"unit mismatch: {pred.unit.value} vs {truth.unit.value}")
    if mask is None:
        mask = default_mask(pred, truth)
    diff = _masked(pred, mask) - _masked(truth, mask)
    mae = float(np.mean(np.abs(diff)))
    rmse = float(math.sqrt(np.mean(diff * diff)))
    return mae, max(rmse, mae)  # guard the last-ulp ordering of the two means


def coverage_ratio(grid: GridMap, threshold_dbm: float = COVERAGE_THRESHOLD_DBM, mask=None) -> float:
    vals = _masked(grid, mask)
    return float(np.count_nonzero(vals >= threshold_dbm) / vals.size)


def peak_to_mean_ratio(grid: GridMap, mask=None) -> float:
    """10 log10(max P / mean P) over linear powers, in dB."""
    vals = _masked(grid, mask)
    # shift by the peak so the ratio is exact under uniform dB offsets
    p = _linear(vals - vals.max())
    return float(-10.0 * math.log10(p.mean()))


def top_fraction_concentration(grid: GridMap, fraction: float = 0.05, mask=None) -> float:
    """Share of total linear power held by the top ``ceil(fraction * N)`` cells."""
    if not 0.0 < fraction <= 1.0:
        raise ValidationError(f"fraction must lie in (0, 1], got {fraction}")
    vals = _masked(grid, mask)
    p = _linear(vals - vals.max())
    m = math.ceil(fraction * vals.size)
    # stable sort keeps row-major order among equal values
    order = np.argsort(-p, kind="stable")
    return float(p[order[:m]].sum() / p.sum())


@dataclass(frozen=True)
class MetricsRow:
    scene_id: str
    config_id: str
    mae_db: float
    rmse_db: float
    coverage_ratio_120: float
    pmr_db: float
    c5: float


def evaluate(pred: GridMap, truth: GridMap, mask=None, scene_id: str = "", config_id: str = "") -> MetricsRow:
    """Error metrics against ``truth`` plus coverage statistics of ``pred``."""
    if mask is None:
        mask = default_mask(pred, truth)
    mae, rmse = mae_rmse(pred, truth, mask)
    return MetricsRow(scene_id, config_id, mae, rmse, coverage_ratio(pred, COVERAGE_THRESHOLD_DBM, mask),
                      peak_to_mean_ratio(pred, mask), top_fraction_concentration(pred, 0.05, mask))


def write_report(rows, path, append: bool = False) -> Path:
    """Write metric rows as CSV with a fixed column order."""
    path = Path(path)
    new = not (append and path.exists())
    with path.open("a" if append else "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=REPORT_COLUMNS)
        if new:
            writer.writeheader()
        for row in rows:
            d = asdict(row)
            writer.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in d.items()})
    return path


def read_report(path) -> list[MetricsRow]:
    with Path(path).open(newline="") as f:
        out = []
        for rec in csv.DictReader(f):
            out.append(MetricsRow(rec["scene_id"], rec["config_id"],
                                  *(float(rec[c]) for c in REPORT_COLUMNS[2:])))
    return out
