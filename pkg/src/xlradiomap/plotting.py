"""Map figures rendered to image files."""

from __future__ import annotations

from pathlib import Path

import numpy as np
from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure

from .errors import ValidationError
from .gridmap import GridMap, Unit

DEFAULT_DBM_RANGE = (-140.0, -60.0)
DIFF_DB_LIMIT = 40.0

_STYLE = {
    "cmap": "viridis",
    "building": "#b0b0b0",
    "dpi": 120,
}


def parse_range(text: str) -> tuple[float, float]:
    """Parse ``"lo:hi"`` into a float pair with lo < hi."""
    try:
        lo, hi = (float(v) for v in text.split(":"))
    except ValueError as exc:
        raise ValidationError(f"range must look like '-140:-60', got {text!r}") from exc
    if not lo < hi:
        raise ValidationError(f"range lower bound must be below upper bound, got {text!r}")
    return lo, hi


def _imshow(ax, grid: GridMap, vrange):
    x0, y0 = grid.origin
    ext = (x0, x0 + grid.extent, y0, y0 + grid.extent)
    cmap = _cmap()
    vals = np.ma.masked_invalid(grid.values)
    im = ax.imshow(vals, origin="lower", extent=ext, cmap=cmap,
                   vmin=vrange[0] if vrange else None, vmax=vrange[1] if vrange else None,
                   interpolation="nearest")
    ax.set_xlabel("x [m]")
    ax.set_ylabel("y [m]")
    ax.set_aspect("equal")
    return im


def _cmap():
    from matplotlib import colormaps

    cmap = colormaps[_STYLE["cmap"]].copy()
    cmap.set_bad(_STYLE["building"])
    return cmap


def _save(fig: Figure, path) -> Path:
    path = Path(path)
    FigureCanvasAgg(fig)
    fig.savefig(path, dpi=_STYLE["dpi"], metadata={"Software": None})
    return path


def render_map(grid: GridMap, path, vrange=None, title: str | None = None) -> Path:
    """Render one map; NaN cells (building interiors) are drawn in grey."""
    if vrange is None and grid.unit == Unit.DBM:
        vrange = DEFAULT_DBM_RANGE
    fig = Figure(figsize=(5.0, 4.2))
    ax = fig.add_subplot()
    im = _imshow(ax, grid, vrange)
    fig.colorbar(im, ax=ax, label=grid.unit.value)
    if title:
        ax.set_title(title)
    fig.tight_layout()
    return _save(fig, path)


def render_comparison(pred: GridMap, truth: GridMap, path, vrange=DEFAULT_DBM_RANGE,
                      title: str | None = None) -> Path:
    """Prediction, reference and their dB difference side by side."""
    fig = Figure(figsize=(13.0, 4.2))
    axes = fig.subplots(1, 3)
    for ax, grid, name in ((axes[0], pred, "prediction"), (axes[1], truth, "reference")):
        im = _imshow(ax, grid, vrange)
        ax.set_title(name)
    fig.colorbar(im, ax=axes[:2].tolist(), label="dBm", shrink=0.9)
    diff = pred.with_values(pred.values - truth.values, Unit.DB)
    lim = np.nanmax(np.abs(diff.values)) if np.isfinite(diff.values).any() else 1.0
    # floor cells (-250 dBm) would otherwise swamp the colour scale
    lim = min(max(float(lim), 1e-3), DIFF_DB_LIMIT)
    x0, y0 = diff.origin
    ext = (x0, x0 + diff.extent, y0, y0 + diff.extent)
    im = axes[2].imshow(np.ma.masked_invalid(diff.values), origin="lower", extent=ext,
                        cmap="RdBu_r", vmin=-lim, vmax=lim, interpolation="nearest")
    axes[2].set_title("prediction - reference")
    axes[2].set_xlabel("x [m]")
    axes[2].set_aspect("equal")
    fig.colorbar(im, ax=axes[2], label="dB", shrink=0.9)
    if title:
        fig.suptitle(title)
    return _save(fig, path)
