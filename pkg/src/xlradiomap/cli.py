"""Command-line interface.

Exit codes: 0 success, 2 usage error, 3 invalid input, 4 computation error.
Errors are reported as one line on stderr::

    xlradiomap: error: <category>: <ErrorType>: <message>
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from ._kernels import THREADS_ENV
from .array import load_band_plan, parse_config_spec
from .beammap import ObservationPlane, compute_beam_map
from .errors import ComputeError, ValidationError
from .gridmap import Unit, load_gridmap, save_gridmap

EXIT_OK, EXIT_USAGE, EXIT_VALIDATION, EXIT_COMPUTE = 0, 2, 3, 4

log = logging.getLogger("xlradiomap")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.exit(EXIT_USAGE, f"{self.prog}: error: usage: {message}\n")


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return v


def _positive_float(text):
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text}")
    return v


def _load_scene_or_empty(path):
    from .scene import empty_scene, load_scene

    return load_scene(path) if path else empty_scene()


def _plane(scene, k, cell):
    return ObservationPlane(k, cell, scene.map_height)


def _config(args):
    plan = load_band_plan(args.band_plan) if getattr(args, "band_plan", None) else None
    return parse_config_spec(args.config, plan)


# --------------------------------------------------------------------------
# subcommands


def cmd_scene_gen(args):
    from .scene import generate_synthetic_scene, save_scene

    scene = generate_synthetic_scene(args.seed, args.buildings, args.extent, ground=not args.no_ground)
    save_scene(scene, args.out)
    print(args.out)


def cmd_scene_rasterize(args):
    from .scene import load_scene, rasterize_heights

    scene = load_scene(args.scene)
    grid = rasterize_heights(scene, args.k, args.cell)
    save_gridmap(grid, args.out)
    print(args.out)


def cmd_beammap(args):
    scene = _load_scene_or_empty(args.scene)
    cfg = _config(args)
    grid = compute_beam_map(cfg, _plane(scene, args.k, args.cell), scene.tx_position,
                            args.p_t_mw, args.threads)
    save_gridmap(grid, args.out)
    print(args.out)


def cmd_radiomap(args):
    from .raytrace import RadiomapOptions, compute_radiomap, dump_paths, trace_grid

    scene = _load_scene_or_empty(args.scene)
    cfg = _config(args)
    plane = _plane(scene, args.k, args.cell)
    opts = RadiomapOptions(args.depth, args.diffraction, args.max_paths, args.p_t_mw,
                           args.per_element, args.threads)
    grid = compute_radiomap(scene, cfg, plane, opts)
    save_gridmap(grid, args.out)
    if args.dump_paths:
        cells = [int(c) for c in args.dump_cells.split(",")] if args.dump_cells else [plane.k * plane.k // 2]
        if any(not 0 <= c < plane.k * plane.k for c in cells):
            raise ValidationError("--dump-cells indices out of range")
        trace = trace_grid(scene, scene.tx_position, plane.points()[cells], args.depth,
                           args.diffraction, args.threads)
        dump_paths(trace, range(len(cells)), cfg.wavelength, args.dump_paths, labels=cells)
    print(args.out)


def cmd_dataset_gen(args):
    from .dataset import GenerationOptions, generate_dataset
    from .raytrace import RadiomapOptions

    scenes = sorted(Path(args.scenes_dir).glob("*.json"))
    if not scenes:
        raise ValidationError(f"no scene JSON files in {args.scenes_dir}")
    plan = load_band_plan(args.band_plan)
    opts = GenerationOptions(args.k, args.cell, RadiomapOptions(
        args.depth, args.diffraction, args.max_paths, threads=args.threads))
    manifest = generate_dataset(scenes, args.out_dir, plan, opts, args.seed)
    print(f"{len(manifest.instances)} instances -> {Path(args.out_dir) / 'manifest.json'}")


def cmd_dataset_split(args):
    from .dataset import DatasetManifest, published_seeds, split_for_task

    manifest = DatasetManifest.load(args.manifest)
    seed = args.seed if args.seed is not None else published_seeds()["split"][args.task]
    manifest.splits[args.task] = split_for_task(manifest, args.task, seed)
    manifest.splits.setdefault("_seeds", {})[args.task] = seed
    manifest.save(args.manifest)
    sizes = {k: len(v) for k, v in manifest.splits[args.task].items()}
    print(json.dumps({"task": args.task, "seed": seed, **sizes}))


def cmd_sample(args):
    from .dataset import published_seeds, sample_sparse

    grid = load_gridmap(args.map)
    seed = args.seed if args.seed is not None else published_seeds()["sample"]
    tx_xy = (0.0, 0.0)
    if args.scene:
        from .scene import load_scene

        tx_xy = load_scene(args.scene).tx_position[:2]
    sample = sample_sparse(grid, args.rate, args.mode, seed, tx_xy)
    sample.to_csv(args.out)
    print(f"{len(sample)} samples -> {args.out}")


def _mask_from_file(path, shape):
    grid = load_gridmap(path)
    if grid.values.shape != shape:
        raise ValidationError(f"mask shape {grid.values.shape} does not match maps {shape}")
    if grid.unit == Unit.METERS:
        # height map: open ground is valid
        return grid.values == 0
    return np.isfinite(grid.values) & (grid.values != 0)


def cmd_eval(args):
    from .metrics import default_mask, evaluate, write_report
    from .plotting import render_comparison

    pred, truth = load_gridmap(args.pred), load_gridmap(args.truth)
    if pred.values.shape != truth.values.shape:
        raise ValidationError(f"shape mismatch: {pred.values.shape} vs {truth.values.shape}")
    mask = default_mask(pred, truth)
    if args.mask:
        mask &= _mask_from_file(args.mask, pred.values.shape)
    scene_id = args.scene_id if args.scene_id is not None else Path(args.pred).resolve().parent.name
    config_id = args.config_id if args.config_id is not None else Path(args.pred).stem.split(".")[0]
    row = evaluate(pred, truth, mask, scene_id, config_id)
    out = write_report([row], args.out, append=args.append)
    if not args.no_plot:
        shown = pred.with_values(np.where(mask, pred.values, np.nan))
        ref = truth.with_values(np.where(mask, truth.values, np.nan))
        render_comparison(shown, ref, out.with_suffix(".png"), title=f"{scene_id} {config_id}")
    print(f"mae_db={row.mae_db:.6g} rmse_db={row.rmse_db:.6g} -> {out}")


def cmd_render(args):
    from .plotting import parse_range, render_map

    grid = load_gridmap(args.map)
    vrange = parse_range(args.range) if args.range else None
    render_map(grid, args.out, vrange, title=args.title)
    print(args.out)


# --------------------------------------------------------------------------
# parser


def _add_grid(p, k, cell):
    p.add_argument("--k", type=_positive_int, default=k, help=f"cells per side (default {k})")
    p.add_argument("--cell", type=_positive_float, default=cell, help=f"cell size in m (default {cell:g})")


def _add_config(p):
    p.add_argument("--config", required=True,
                   help='band-plan entry and beam index ("6.7GHz:32x32:5") or '
                        '"carrier_hz=...,rows=...,cols=...,az_deg=...,pattern=..."')
    p.add_argument("--band-plan", help="band plan JSON (default: shipped plan)")
    p.add_argument("--p-t-mw", type=_positive_float, default=1.0, help="transmit power in mW")


def _add_trace(p):
    p.add_argument("--depth", type=int, choices=range(4), default=3, help="max interactions per path")
    p.add_argument("--diffraction", action="store_true", help="add single-edge diffraction paths")
    p.add_argument("--max-paths", type=_positive_int, default=16, help="paths kept per cell")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="xlradiomap", description="Beam maps, ray-traced radiomaps and datasets.")
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("--threads", type=_positive_int, default=None,
                        help=f"worker threads (default: ${THREADS_ENV} or CPU count)")
    parser.add_argument("--log-level", default="WARNING", help="logging level")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    scene = sub.add_parser("scene", help="scene generation and rasterization")
    ssub = scene.add_subparsers(dest="scene_command", required=True, parser_class=_Parser)
    p = ssub.add_parser("gen", help="random synthetic scene")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--buildings", type=int, default=20)
    p.add_argument("--extent", type=_positive_float, default=1280.0)
    p.add_argument("--no-ground", action="store_true", help="omit the ground plane")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_scene_gen)
    p = ssub.add_parser("rasterize", help="building height map")
    p.add_argument("--scene", required=True)
    _add_grid(p, 256, 5.0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_scene_rasterize)

    p = sub.add_parser("beammap", help="analytical line-of-sight beam map")
    p.add_argument("--scene", help="scene JSON for transmitter and map height (default: empty scene)")
    _add_config(p)
    _add_grid(p, 128, 10.0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_beammap)

    p = sub.add_parser("radiomap", help="ray-traced radiomap")
    p.add_argument("--scene", help="scene JSON (default: empty scene)")
    _add_config(p)
    _add_trace(p)
    _add_grid(p, 128, 10.0)
    p.add_argument("--per-element", action="store_true", help="trace from every element (slow)")
    p.add_argument("--dump-paths", help="write a JSON path dump for some cells")
    p.add_argument("--dump-cells", help="comma-separated row-major cell indices for --dump-paths")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_radiomap)

    ds = sub.add_parser("dataset", help="dataset generation and splits")
    dsub = ds.add_subparsers(dest="dataset_command", required=True, parser_class=_Parser)
    p = dsub.add_parser("gen", help="grids for every scene and configuration, plus a manifest")
    p.add_argument("--scenes-dir", required=True)
    p.add_argument("--band-plan", help="band plan JSON (default: shipped plan)")
    p.add_argument("--out-dir", required=True)
    _add_trace(p)
    _add_grid(p, 128, 10.0)
    p.add_argument("--seed", type=int, default=0, help="recorded in the manifest")
    p.set_defaults(func=cmd_dataset_gen)
    p = dsub.add_parser("split", help="write task splits into a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--task", required=True, choices=("1", "2", "3a", "3b"))
    p.add_argument("--seed", type=int, default=None, help="default: published seed for the task")
    p.set_defaults(func=cmd_dataset_split)

    p = sub.add_parser("sample", help="sparse measurements from a map")
    p.add_argument("--map", required=True)
    p.add_argument("--rate", type=float, default=0.05)
    p.add_argument("--mode", choices=("uniform", "imbalanced"), default="uniform")
    p.add_argument("--seed", type=int, default=None, help="default: published sampling seed")
    p.add_argument("--scene", help="scene JSON giving the transmitter for imbalanced sampling")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("eval", help="metrics CSV row plus a comparison figure")
    p.add_argument("--pred", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--mask", help="mask grid: height map (open ground valid) or nonzero cells")
    p.add_argument("--scene-id")
    p.add_argument("--config-id")
    p.add_argument("--append", action="store_true", help="append to an existing CSV")
    p.add_argument("--no-plot", action="store_true", help="skip the PNG next to the CSV")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("render", help="render a map to PNG")
    p.add_argument("--map", required=True)
    p.add_argument("--range", help='colour range "lo:hi"; pass negative bounds as --range=-140:-60')
    p.add_argument("--title")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_render)
    return parser


def _fail(category: str, exc: BaseException) -> None:
    msg = " ".join(str(exc).split())
    print(f"xlradiomap: error: {category}: {type(exc).__name__}: {msg}", file=sys.stderr)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=getattr(logging, str(args.log_level).upper(), logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except ValidationError as exc:
        _fail("validation", exc)
        return EXIT_VALIDATION
    except (FileNotFoundError, IsADirectoryError, PermissionError) as exc:
        _fail("validation", exc)
        return EXIT_VALIDATION
    except ComputeError as exc:
        _fail("compute", exc)
        return EXIT_COMPUTE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
