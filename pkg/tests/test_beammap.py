import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from xlradiomap._kernels import beamformed_rays
from xlradiomap.antenna import ISOTROPIC
from xlradiomap.array import ArrayConfig, precoding_vector
from xlradiomap.beammap import (ObservationPlane, beam_map_value, compute_beam_map, los_channel,
                                near_element_mask, power_scale)
from xlradiomap.errors import SingularityError, ValidationError

from oracles import array_field, friis_dbm, power_dbm


def dbm(x):
    return 10 * math.log10(x)


def test_unit_distance_isotropic():
    cfg = ArrayConfig(3e9, 1, 1, element_pattern=ISOTROPIC)
    h = los_channel(cfg, (1.0, 0.0, 40.0))
    assert abs(h[0]) == pytest.approx(1.0, abs=1e-15)
    assert h[0] == pytest.approx(np.exp(2j * math.pi / cfg.wavelength), abs=1e-12)


def test_inverse_distance():
    cfg = ArrayConfig(3e9, 1, 1, element_pattern=ISOTROPIC)
    a = abs(los_channel(cfg, (100.0, 0, 40))[0])
    b = abs(los_channel(cfg, (200.0, 0, 40))[0])
    assert a / b == pytest.approx(2.0, rel=1e-12)


def test_far_field_phases_flat():
    cfg = ArrayConfig(6.7e9, 8, 8)
    h = los_channel(cfg, (500.0, 0.0, 40.0))
    ph = np.angle(h * np.exp(-1j * np.angle(h[0])))
    assert np.ptp(ph) < 0.05


def test_coincident_rx_raises():
    with pytest.raises(SingularityError):
        los_channel(ArrayConfig(3e9, 1, 1), (0.0, 0.0, 40.0))


def test_friis():
    cfg = ArrayConfig(3.5e9, 1, 1, element_pattern=ISOTROPIC)
    v = dbm(beam_map_value(cfg, (1000.0, 0, 40)))
    assert v == pytest.approx(friis_dbm(1.0, 0.0, 1000.0, 3.5e9), abs=1e-9)
    assert v == pytest.approx(-103.33, abs=0.01)


def test_directional_adds_8db():
    iso = ArrayConfig(3.5e9, 1, 1, element_pattern=ISOTROPIC)
    tr = ArrayConfig(3.5e9, 1, 1)
    rx = (1000.0, 0, 40)
    assert dbm(beam_map_value(tr, rx)) - dbm(beam_map_value(iso, rx)) == pytest.approx(8.0, abs=1e-9)


@pytest.mark.parametrize("rows,cols", [(2, 2), (8, 8), (32, 32)])
def test_coherent_gain(rows, cols):
    cfg = ArrayConfig(6.7e9, rows, cols)
    single = ArrayConfig(6.7e9, 1, 1)
    r = max(2 * cfg.aperture_diagonal ** 2 / cfg.wavelength, 10.0)
    rx = (r, 0.0, 40.0)
    gain = dbm(beam_map_value(cfg, rx)) - dbm(beam_map_value(single, rx))
    assert gain == pytest.approx(10 * math.log10(rows * cols), abs=0.1)


@given(st.floats(-300, 300), st.floats(-300, 300), st.sampled_from([(1, 1), (2, 3), (4, 4)]),
       st.floats(-1.2, 1.2))
def test_kernel_matches_loop_oracle(x, y, shape, az):
    rx = (x, y, 1.5)
    cfg = ArrayConfig(3.5e9, *shape, beam_azimuth=az)
    w = precoding_vector(cfg).weights
    g = beamformed_rays(cfg, w, (0, 0, 40), [x], [y], [1.5])[0]
    ref = array_field(*shape, 3.5e9, az, rx, (0, 0, 40))
    # error bound relative to the magnitude of the summed terms, so that
    # cells inside interference nulls are not held to a relative bound
    scale = np.abs(w * los_channel(cfg, rx)).sum()
    # phases of ~1e4 rad carry ~1e-12 rad rounding on either side
    assert abs(g - ref) <= 1e-10 * scale
    if abs(ref) > 1e-3 * scale:
        assert power_dbm(g, 3.5e9) == pytest.approx(power_dbm(ref, 3.5e9), abs=1e-9)


def test_map_matches_numpy_reference():
    cfg = ArrayConfig(6.7e9, 4, 8, beam_azimuth=math.radians(14))
    plane = ObservationPlane(16, 40.0)
    bm = compute_beam_map(cfg, plane)
    w = precoding_vector(cfg).weights
    h = [los_channel(cfg, p) for p in plane.points()]
    ref = np.array([dbm(power_scale(cfg, 1) * abs(np.vdot(w, hk)) ** 2) for hk in h])
    incoherent = np.array([dbm(power_scale(cfg, 1) * np.abs(w * hk).sum() ** 2) for hk in h])
    err = np.abs(bm.values.ravel() - ref)
    # 1e-9 dB away from deep nulls; inside a null the dB error grows as the
    # cancellation depth, so the bound is scaled accordingly
    depth = incoherent - ref
    assert np.all(err <= 1e-9 * np.maximum(1.0, 10 ** (depth / 10)))
    assert np.median(err) < 1e-10


def test_power_shift():
    cfg = ArrayConfig(3.5e9, 8, 8)
    plane = ObservationPlane(16, 40.0)
    a = compute_beam_map(cfg, plane, p_t_mw=1.0).values
    b = compute_beam_map(cfg, plane, p_t_mw=20.0).values
    assert np.allclose(b - a, 10 * math.log10(20.0), atol=1e-9)


@pytest.mark.parametrize("az", [7, 21, 28])
def test_mirror_symmetry(az):
    plane = ObservationPlane(32, 20.0)
    a = compute_beam_map(ArrayConfig(6.7e9, 8, 8, beam_azimuth=math.radians(az)), plane).values
    b = compute_beam_map(ArrayConfig(6.7e9, 8, 8, beam_azimuth=math.radians(-az)), plane).values
    # rows run along y, so mirroring y flips the row order
    assert np.abs(a - b[::-1]).max() < 1e-9


def test_element_permutation_invariance():
    cfg = ArrayConfig(3.5e9, 4, 4, beam_azimuth=0.3)
    rx = (120.0, -40.0, 1.5)
    h = los_channel(cfg, rx)
    w = precoding_vector(cfg).weights
    perm = np.random.default_rng(0).permutation(h.size)
    assert np.vdot(w[perm], h[perm]) == pytest.approx(np.vdot(w, h), rel=1e-12)


def test_flagged_singularity():
    cfg = ArrayConfig(1.8e9, 1, 1)
    # a plane whose one cell centre sits 0.1 m below the element
    plane = ObservationPlane(3, 1.0, height=39.9, center=(0.0, 0.0))
    bm = compute_beam_map(cfg, plane)
    assert bm.flagged[1, 1]
    assert bm.values[1, 1] == np.max(bm.values[~bm.flagged])
    assert near_element_mask(cfg, plane.points(), (0, 0, 40)).sum() == 1


def test_plane_above_tx_rejected():
    with pytest.raises(ValidationError):
        compute_beam_map(ArrayConfig(3e9, 1, 1), ObservationPlane(4, 1.0, height=50.0))


def test_threads_bitwise():
    cfg = ArrayConfig(6.7e9, 16, 16, beam_azimuth=0.2)
    plane = ObservationPlane(48, 20.0)
    maps = [compute_beam_map(cfg, plane, threads=t).values for t in (1, 3, 8)]
    assert all(np.array_equal(maps[0], m) for m in maps[1:])


def test_plane_geometry():
    plane = ObservationPlane(128, 10.0)
    assert plane.origin == (-640.0, -640.0)
    pts = plane.points()
    assert pts[0].tolist() == [-635.0, -635.0, 1.5]
    assert pts[1, 0] == -625.0 and pts[128, 1] == -625.0


@pytest.mark.parametrize("x,y", [(0.0, 0.0), (-0.0, 0.0), (0.0, -0.0), (-0.0, -0.0)])
def test_nadir_azimuth_convention(x, y):
    cfg = ArrayConfig(3.5e9, 1, 1)
    rx = (x, y, 1.5)
    g = beamformed_rays(cfg, precoding_vector(cfg).weights, (0, 0, 40), [x], [y], [1.5])[0]
    h = los_channel(cfg, rx)[0]
    assert g == pytest.approx(h, rel=1e-13)
    assert g == pytest.approx(array_field(1, 1, 3.5e9, 0.0, rx, (0, 0, 40)), rel=1e-13)
