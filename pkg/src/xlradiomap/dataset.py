"""Configuration enumeration, dataset manifests, task splits and sparse sampling.

A manifest lists one instance per (scene, configuration) pair with the
relative paths of its radiomap, beam map and height map, plus named splits
per task:

* ``"1"`` and ``"2"``: random 7:1:2 split over instances,
* ``"3a"``: configuration-disjoint split,
* ``"3b"``: scene-disjoint split.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .antenna import TR38901, ElementPattern
from .array import ArrayConfig, codebook, default_band_plan
from .beammap import ObservationPlane, compute_beam_map
from .errors import ConfigurationError, ValidationError
from .gridmap import GridMap, save_gridmap
from .metrics import default_mask
from .raytrace.radiomap import RadiomapOptions, radiomap_from_trace
from .raytrace.tracer import trace_grid
from .scene import load_scene, rasterize_heights

log = logging.getLogger(__name__)

MANIFEST_VERSION = 1
TASKS = ("1", "2", "3a", "3b")
SPLIT_NAMES = ("train", "val", "test")
# share of configurations per split in the configuration-disjoint task
CONFIG_SPLIT = (68, 9, 21)


def published_seeds() -> dict:
    """Seeds shipped with the package for reproducible splits and samples."""
    text = resources.files("xlradiomap").joinpath("data", "seeds.json").read_text()
    return json.loads(text)


def enumerate_configs(band_plan=None, pattern: ElementPattern = TR38901) -> list[ArrayConfig]:
    """Every (array, beam) configuration of a band plan, in plan order."""
    plan = default_band_plan() if band_plan is None else band_plan
    if not plan:
        raise ConfigurationError("band plan is empty")
    configs = [cfg for entry in plan for cfg in codebook(entry, pattern)]
    ids = [c.config_id for c in configs]
    if len(set(ids)) != len(ids):
        raise ConfigurationError("band plan yields duplicate configurations")
    return configs


@dataclass(frozen=True)
class Instance:
    scene_id: str
    config_id: str
    radiomap: str
    beammap: str
    heightmap: str

    @property
    def instance_id(self) -> str:
        return f"{self.scene_id}/{self.config_id}"


@dataclass
class DatasetManifest:
    instances: list[Instance]
    seed: int = 0
    splits: dict[str, dict[str, list[str]]] = field(default_factory=dict)
    grid: dict = field(default_factory=dict)

    def __post_init__(self):
        ids = [i.instance_id for i in self.instances]
        if len(set(ids)) != len(ids):
            raise ValidationError("manifest contains duplicate instances")

    @property
    def instance_ids(self) -> list[str]:
        return [i.instance_id for i in self.instances]

    @property
    def scene_ids(self) -> list[str]:
        return list(dict.fromkeys(i.scene_id for i in self.instances))

    @property
    def config_ids(self) -> list[str]:
        return list(dict.fromkeys(i.config_id for i in self.instances))

    def to_json(self) -> dict:
        return {
            "version": MANIFEST_VERSION,
            "seed": self.seed,
            "grid": self.grid,
            "instances": [
                {"scene_id": i.scene_id, "config_id": i.config_id, "radiomap": i.radiomap,
                 "beammap": i.beammap, "heightmap": i.heightmap}
                for i in self.instances
            ],
            "splits": self.splits,
        }

    @classmethod
    def from_json(cls, data) -> "DatasetManifest":
        try:
            inst = [Instance(d["scene_id"], d["config_id"], d["radiomap"], d["beammap"], d["heightmap"])
                    for d in data["instances"]]
            return cls(inst, int(data.get("seed", 0)), dict(data.get("splits", {})),
                       dict(data.get("grid", {})))
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"malformed manifest: {exc}") from exc

    def save(self, path) -> Path:
        path = Path(path)
        path.write_text(json.dumps(self.to_json(), indent=1))
        return path

    @classmethod
    def load(cls, path) -> "DatasetManifest":
        try:
            data = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ValidationError(f"manifest is not valid JSON: {exc}") from exc
        return cls.from_json(data)


# --------------------------------------------------------------------------
# splits


def _rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def _ratio_sizes(n: int, ratios) -> tuple[int, int, int]:
    """Floor-rounded val/test sizes with the remainder going to train."""
    total = sum(ratios)
    val = n * ratios[1] // total
    test = n * ratios[2] // total
    return n - val - test, val, test


def _partition(items: list, sizes, seed: int) -> dict[str, list]:
    perm = _rng(seed).permutation(len(items))
    shuffled = [items[i] for i in perm]
    n_train, n_val, _ = sizes
    return {
        "train": shuffled[:n_train],
        "val": shuffled[n_train:n_train + n_val],
        "test": shuffled[n_train + n_val:],
    }


def split_random(manifest: DatasetManifest, ratios=(7, 1, 2), seed: int = 0) -> dict[str, list[str]]:
    """Instance-level random split."""
    ids = manifest.instance_ids
    return _partition(ids, _ratio_sizes(len(ids), ratios), seed)


def _group_split(manifest: DatasetManifest, attr: str, groups: list[str], sizes, seed) -> dict[str, list[str]]:
    part = _partition(groups, sizes, seed)
    where = {g: name for name, gs in part.items() for g in gs}
    out = {name: [] for name in SPLIT_NAMES}
    for inst in manifest.instances:
        out[where[getattr(inst, attr)]].append(inst.instance_id)
    return out


def config_split_sizes(n: int) -> tuple[int, int, int]:
    """68:9:21 shares of ``n`` configurations (exact for 98)."""
    total = sum(CONFIG_SPLIT)
    val = (n * CONFIG_SPLIT[1] + total // 2) // total
    test = (n * CONFIG_SPLIT[2] + total // 2) // total
    return n - val - test, val, test


def split_config_disjoint(manifest: DatasetManifest, seed: int = 0) -> dict[str, list[str]]:
    configs = manifest.config_ids
    return _group_split(manifest, "config_id", configs, config_split_sizes(len(configs)), seed)


def split_scene_disjoint(manifest: DatasetManifest, seed: int = 0, ratios=(7, 1, 2)) -> dict[str, list[str]]:
    scenes = manifest.scene_ids
    return _group_split(manifest, "scene_id", scenes, _ratio_sizes(len(scenes), ratios), seed)


def split_for_task(manifest: DatasetManifest, task: str, seed: int) -> dict[str, list[str]]:
    if task in ("1", "2"):
        return split_random(manifest, seed=seed)
    if task == "3a":
        return split_config_disjoint(manifest, seed)
    if task == "3b":
        return split_scene_disjoint(manifest, seed)
    raise ValidationError(f"unknown task {task!r}; expected one of {', '.join(TASKS)}")


# --------------------------------------------------------------------------
# sparse sampling


@dataclass(frozen=True, eq=False)
class SparseSample:
    indices: np.ndarray  # (m, 2) row, col in row-major order
    values: np.ndarray  # dBm
    rate: float
    mode: str
    seed: int

    def __len__(self):
        return self.values.size

    def to_csv(self, path) -> Path:
        path = Path(path)
        with path.open("w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["row", "col", "dbm"])
            for (r, c), v in zip(self.indices.tolist(), self.values.tolist()):
                w.writerow([r, c, repr(v)])
        return path


def read_sparse_csv(path) -> tuple[np.ndarray, np.ndarray]:
    with Path(path).open(newline="") as f:
        rows = list(csv.DictReader(f))
    idx = np.array([[int(r["row"]), int(r["col"])] for r in rows], dtype=np.int64).reshape(-1, 2)
    return idx, np.array([float(r["dbm"]) for r in rows])


SAMPLING_MODES = ("uniform", "imbalanced")


def sample_sparse(grid: GridMap, rate: float, mode: str = "uniform", seed: int = 0,
                  tx_xy=(0.0, 0.0), mask=None) -> SparseSample:
    """Draw ``round(rate * valid cells)`` distinct valid cells.

    ``uniform`` picks valid cells with equal probability. ``imbalanced``
    weights each cell by its horizontal distance to the transmitter at
    ``tx_xy``, so far-away cells are over-represented.
    """
    if not 0.0 < rate <= 1.0:
        raise ValidationError(f"rate must lie in (0, 1], got {rate}")
    if mode not in SAMPLING_MODES:
        raise ValidationError(f"mode must be one of {SAMPLING_MODES}, got {mode!r}")
    valid = default_mask(grid) if mask is None else np.asarray(mask, dtype=bool)
    flat = np.flatnonzero(valid.ravel())
    n = flat.size
    m = int(math.floor(rate * n + 0.5))
    rng = _rng(seed)
    p = None
    if mode == "imbalanced" and n:
        x, y = grid.cell_centers()
        d = np.hypot(x.ravel()[flat] - tx_xy[0], y.ravel()[flat] - tx_xy[1])
        if d.sum() > 0 and np.count_nonzero(d) >= m:
            p = d / d.sum()
    pick = np.sort(rng.choice(n, size=m, replace=False, p=p)) if m else np.zeros(0, dtype=np.int64)
    cells = flat[pick]
    idx = np.column_stack(np.divmod(cells, grid.k)).astype(np.int64).reshape(-1, 2)
    return SparseSample(idx, grid.values.ravel()[cells].copy(), float(rate), mode, int(seed))


# --------------------------------------------------------------------------
# generation


@dataclass(frozen=True)
class GenerationOptions:
    k: int = 128
    cell_size: float = 10.0
    radiomap: RadiomapOptions = RadiomapOptions()


def generate_dataset(scene_paths, out_dir, band_plan=None, options: GenerationOptions = GenerationOptions(),
                     seed: int = 0) -> DatasetManifest:
    """Write height maps, beam maps and radiomaps for every scene and configuration.

    Each scene is traced once; all configurations reuse that trace.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    configs = enumerate_configs(band_plan)
    instances = []
    ro = options.radiomap
    for scene_path in sorted(Path(p) for p in scene_paths):
        scene_id = scene_path.stem
        scene = load_scene(scene_path)
        sdir = out_dir / scene_id
        sdir.mkdir(exist_ok=True)
        plane = ObservationPlane(options.k, options.cell_size, scene.map_height)
        heights = rasterize_heights(scene, options.k, options.cell_size, plane.origin)
        hpath = save_gridmap(heights, sdir / "heightmap.bin")
        trace = trace_grid(scene, scene.tx_position, plane.points(), ro.max_depth,
                           ro.enable_diffraction, ro.threads, ro.cell_capacity)
        log.info("scene %s: %d paths over %d cells", scene_id, trace.records.shape[0], trace.n_cells)
        for cfg in configs:
            rm = radiomap_from_trace(trace, cfg, plane, ro)
            bm = compute_beam_map(cfg, plane, scene.tx_position, ro.p_t_mw, ro.threads)
            rpath = save_gridmap(rm, sdir / f"{cfg.config_id}.radiomap.bin")
            bpath = save_gridmap(bm, sdir / f"{cfg.config_id}.beammap.bin")
            rel = lambda p: p.relative_to(out_dir).as_posix()  # noqa: E731
            instances.append(Instance(scene_id, cfg.config_id, rel(rpath), rel(bpath), rel(hpath)))
    grid = {"k": options.k, "cell_size_m": options.cell_size, "max_depth": ro.max_depth,
            "diffraction": ro.enable_diffraction, "max_paths": ro.max_paths}
    manifest = DatasetManifest(instances, seed, {}, grid)
    manifest.save(out_dir / "manifest.json")
    return manifest
