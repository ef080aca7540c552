"""Urban scenes made of extruded building footprints.

Coordinates are meters in a local frame centred on the scene: x east, y north,
z up. A scene covers the square ``[-extent/2, extent/2]^2``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import shapely
from shapely.geometry import LinearRing, Polygon

from .errors import DomainError, PlacementError, SceneParseError, ValidationError
from .gridmap import GridMap, Unit

DEFAULT_TX_POSITION = (0.0, 0.0, 40.0)
DEFAULT_MAP_HEIGHT = 1.5


@dataclass(frozen=True)
class Material:
    name: str
    relative_permittivity: float
    conductivity: float = 0.0  # S/m; carried for the file format, unused by the lossless Fresnel model

    def __post_init__(self):
        if not self.relative_permittivity > 1.0:
            raise ValidationError(
                f"material {self.name!r}: relative_permittivity must be > 1, "
                f"got {self.relative_permittivity}"
            )
        if not self.conductivity >= 0.0:
            raise ValidationError(
                f"material {self.name!r}: conductivity must be >= 0, got {self.conductivity}"
            )


# ITU-R P.2040 style defaults evaluated at 6.7 GHz. Roofs always reflect as a
# perfect conductor, so the metal permittivity is a placeholder.
MARBLE = Material("marble", 7.0, 0.032)
CONCRETE = Material("concrete", 5.24, 0.205)
METAL = Material("metal", 1.0e7, 1.0e7)


def signed_area(vertices) -> float:
    a = 0.0
    n = len(vertices)
    for i in range(n):
        x0, y0 = vertices[i]
        x1, y1 = vertices[(i + 1) % n]
        a += x0 * y1 - x1 * y0
    return 0.5 * a


@dataclass(frozen=True)
class Building:
    footprint: tuple[tuple[float, float], ...]
    height: float
    wall_material: Material = MARBLE
    roof_material: Material = METAL

    def __post_init__(self):
        fp = tuple((float(x), float(y)) for x, y in self.footprint)
        object.__setattr__(self, "footprint", fp)
        if len(fp) < 3:
            raise ValidationError(f"footprint needs at least 3 vertices, got {len(fp)}")
        if not self.height > 0:
            raise ValidationError(f"building height must be > 0, got {self.height}")
        if not LinearRing(fp).is_simple or len(set(fp)) != len(fp):
            raise ValidationError("footprint is self-intersecting")
        if signed_area(fp) <= 0:
            raise ValidationError("footprint winding must be counter-clockwise")

    @property
    def polygon(self) -> Polygon:
        return Polygon(self.footprint)

    def bounds(self) -> tuple[float, float, float, float]:
        xs = [p[0] for p in self.footprint]
        ys = [p[1] for p in self.footprint]
        return min(xs), min(ys), max(xs), max(ys)


@dataclass(frozen=True)
class Scene:
    extent: float
    buildings: tuple[Building, ...] = ()
    # None means free space: no ground reflection at all
    ground_material: Material | None = CONCRETE
    tx_position: tuple[float, float, float] = DEFAULT_TX_POSITION
    map_height: float = DEFAULT_MAP_HEIGHT

    def __post_init__(self):
        object.__setattr__(self, "buildings", tuple(self.buildings))
        object.__setattr__(self, "tx_position", tuple(float(v) for v in self.tx_position))
        if not self.extent > 0:
            raise ValidationError(f"extent must be positive, got {self.extent}")
        if len(self.tx_position) != 3:
            raise ValidationError("tx_position must have three coordinates")
        if not self.tx_position[2] > self.map_height:
            raise ValidationError("transmitter must be above the observation plane")
        half = 0.5 * self.extent
        for i, b in enumerate(self.buildings):
            x0, y0, x1, y1 = b.bounds()
            if x0 < -half or y0 < -half or x1 > half or y1 > half:
                raise ValidationError(f"building {i} lies outside the scene extent")

    def with_buildings(self, buildings) -> "Scene":
        return Scene(self.extent, tuple(buildings), self.ground_material,
                     self.tx_position, self.map_height)


def empty_scene(extent=1280.0, ground=False, **kw) -> Scene:
    return Scene(extent, (), CONCRETE if ground else None, **kw)


# --------------------------------------------------------------------------
# rasterization


def rasterize_heights(scene: Scene, k: int, cell_size: float, origin=None) -> GridMap:
    """Maximum building height over each cell of a K x K raster.

    A building contributes to a cell when its footprint intersects the cell's
    closed square, so a shared edge or corner counts.
    """
    if k < 1 or not cell_size > 0:
        raise DomainError(f"need k >= 1 and cell_size > 0, got k={k}, cell_size={cell_size}")
    if k * cell_size > scene.extent + cell_size:
        raise DomainError(
            f"raster coverage {k * cell_size} m exceeds scene extent {scene.extent} m"
        )
    if origin is None:
        origin = (-0.5 * k * cell_size, -0.5 * k * cell_size)
    ox, oy = origin
    heights = np.zeros((k, k))
    for b in scene.buildings:
        x0, y0, x1, y1 = b.bounds()
        c0 = max(int(math.floor((x0 - ox) / cell_size)) - 1, 0)
        c1 = min(int(math.floor((x1 - ox) / cell_size)) + 1, k - 1)
        r0 = max(int(math.floor((y0 - oy) / cell_size)) - 1, 0)
        r1 = min(int(math.floor((y1 - oy) / cell_size)) + 1, k - 1)
        if c0 > c1 or r0 > r1:
            continue
        cols, rows = np.meshgrid(np.arange(c0, c1 + 1), np.arange(r0, r1 + 1))
        boxes = shapely.box(
            ox + cols * cell_size, oy + rows * cell_size,
            ox + (cols + 1) * cell_size, oy + (rows + 1) * cell_size,
        )
        hit = shapely.intersects(b.polygon, boxes)
        block = heights[r0:r1 + 1, c0:c1 + 1]
        block[hit] = np.maximum(block[hit], b.height)
    return GridMap(heights, cell_size, origin, Unit.METERS)


# --------------------------------------------------------------------------
# synthetic scenes


def generate_synthetic_scene(
    seed: int,
    n_buildings: int,
    extent: float = 1280.0,
    height_range=(10.0, 60.0),
    *,
    size_range=None,
    ground: bool = True,
    tx_position=DEFAULT_TX_POSITION,
    map_height: float = DEFAULT_MAP_HEIGHT,
    gap: float = 2.0,
    max_attempts: int | None = None,
) -> Scene:
    """Random axis-aligned rectangular buildings on integer-meter coordinates.

    Buildings keep ``gap`` meters from each other and stay clear of the
    transmitter's horizontal position. Raises ``PlacementError`` when the
    attempt budget runs out before ``n_buildings`` are placed.
    """
    if n_buildings < 0:
        raise ValidationError("n_buildings must be >= 0")
    hmin, hmax = (float(v) for v in height_range)
    if not 0 < hmin <= hmax:
        raise ValidationError(f"invalid height range {height_range}")
    if size_range is None:
        scale = extent / 1280.0
        size_range = (max(2, round(20 * scale)), max(3, round(80 * scale)))
    smin, smax = (int(v) for v in size_range)
    rng = np.random.default_rng(seed)
    half = int(math.floor(extent / 2))
    tx_x, tx_y = float(tx_position[0]), float(tx_position[1])
    clearance = 5.0
    placed: list[tuple[int, int, int, int]] = []
    buildings = []
    attempts = max_attempts if max_attempts is not None else 200 * n_buildings + 100
    while len(placed) < n_buildings and attempts > 0:
        attempts -= 1
        w = int(rng.integers(smin, smax + 1))
        d = int(rng.integers(smin, smax + 1))
        if w >= 2 * half or d >= 2 * half:
            continue
        x0 = int(rng.integers(-half, half - w + 1))
        y0 = int(rng.integers(-half, half - d + 1))
        x1, y1 = x0 + w, y0 + d
        if (x0 - clearance <= tx_x <= x1 + clearance) and (y0 - clearance <= tx_y <= y1 + clearance):
            continue
        if any(x0 < bx1 + gap and bx0 < x1 + gap and y0 < by1 + gap and by0 < y1 + gap
               for bx0, by0, bx1, by1 in placed):
            continue
        height = float(rng.uniform(hmin, hmax))
        placed.append((x0, y0, x1, y1))
        buildings.append(Building(
            ((x0, y0), (x1, y0), (x1, y1), (x0, y1)), height,
        ))
    if len(placed) < n_buildings:
        raise PlacementError(n_buildings, len(placed))
    return Scene(
        float(extent), tuple(buildings), CONCRETE if ground else None,
        tuple(tx_position), map_height,
    )


# --------------------------------------------------------------------------
# JSON format


def _material_to_json(m: Material | None):
    if m is None:
        return None
    return {
        "name": m.name,
        "relative_permittivity": m.relative_permittivity,
        "conductivity_s_per_m": m.conductivity,
    }


def scene_to_json(scene: Scene) -> dict:
    return {
        "extent_m": scene.extent,
        "tx_position_m": list(scene.tx_position),
        "map_height_m": scene.map_height,
        "ground_material": _material_to_json(scene.ground_material),
        "buildings": [
            {
                "footprint_m": [list(p) for p in b.footprint],
                "height_m": b.height,
                "wall_material": _material_to_json(b.wall_material),
                "roof_material": _material_to_json(b.roof_material),
            }
            for b in scene.buildings
        ],
    }


def save_scene(scene: Scene, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(scene_to_json(scene), indent=1) + "\n")
    return path


def _number(obj, key, where):
    if key not in obj:
        raise SceneParseError(f"{where}{key}", "missing")
    v = obj[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise SceneParseError(f"{where}{key}", f"expected a number, got {type(v).__name__}")
    return float(v)


def _point(v, n, where):
    if (not isinstance(v, list) or len(v) != n
            or any(isinstance(c, bool) or not isinstance(c, (int, float)) for c in v)):
        raise SceneParseError(where, f"expected a list of {n} numbers")
    return tuple(float(c) for c in v)


def _material(obj, where, allow_null=False):
    if obj is None and allow_null:
        return None
    if not isinstance(obj, dict):
        raise SceneParseError(where, "expected a material object")
    name = obj.get("name")
    if not isinstance(name, str):
        raise SceneParseError(f"{where}.name", "expected a string")
    eps = _number(obj, "relative_permittivity", f"{where}.")
    sigma = _number(obj, "conductivity_s_per_m", f"{where}.")
    try:
        return Material(name, eps, sigma)
    except ValidationError as exc:
        raise ValidationError(f"{where}: {exc}") from exc


def scene_from_json(data) -> Scene:
    if not isinstance(data, dict):
        raise SceneParseError("<root>", "expected an object")
    extent = _number(data, "extent_m", "")
    tx = _point(data.get("tx_position_m", list(DEFAULT_TX_POSITION)), 3, "tx_position_m")
    map_height = (_number(data, "map_height_m", "")
                  if "map_height_m" in data else DEFAULT_MAP_HEIGHT)
    if "ground_material" not in data:
        raise SceneParseError("ground_material", "missing (use null for free space)")
    ground = _material(data["ground_material"], "ground_material", allow_null=True)
    raw = data.get("buildings")
    if not isinstance(raw, list):
        raise SceneParseError("buildings", "expected a list")
    buildings = []
    for i, b in enumerate(raw):
        where = f"buildings[{i}]"
        if not isinstance(b, dict):
            raise SceneParseError(where, "expected an object")
        fp = b.get("footprint_m")
        if not isinstance(fp, list):
            raise SceneParseError(f"{where}.footprint_m", "expected a list of [x, y] points")
        pts = [_point(p, 2, f"{where}.footprint_m[{j}]") for j, p in enumerate(fp)]
        height = _number(b, "height_m", f"{where}.")
        wall = _material(b.get("wall_material"), f"{where}.wall_material")
        roof = _material(b.get("roof_material"), f"{where}.roof_material")
        try:
            buildings.append(Building(tuple(pts), height, wall, roof))
        except ValidationError as exc:
            raise ValidationError(f"{where}: {exc}") from exc
    return Scene(extent, tuple(buildings), ground, tx, map_height)


def load_scene(path) -> Scene:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise SceneParseError("<root>", f"invalid JSON ({exc})") from exc
    return scene_from_json(data)
