import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.special import j1

from midair_texture.field import (
    CALIBRATED_SOURCE_STRENGTH, PISTON_RADIUS, FieldMap, GridSpec, calibrate_source_strength, coherent_sum,
    field_map, focal_metrics, local_maxima, piston_directivity, pressure_at, pressures, radiation_force,
    read_pgm, spot_force,
)
from midair_texture.geometry import ArrayConfig, ArrayGeometry, Medium, UnitLayout, build_array
from midair_texture.stimulus import FociFrame
from midair_texture.synthesis import DriveFrame, SingularityError, drive_for_frame, phases_for_focus

K = 2 * math.pi / (346.0 / 40e3)


def pair(sep=0.02):
    pos = np.array([[-sep / 2, 0, 0], [sep / 2, 0, 0]])
    return ArrayGeometry(pos, np.tile([0.0, 1.0, 0.0], (2, 1)), Medium(), 0.01)


def lone(at=(0.0, 0.0, 0.0)):
    return ArrayGeometry(np.array([at], float), np.array([[0.0, 1.0, 0.0]]), Medium(), 0.01)


@pytest.fixture(scope="module")
def small():
    return build_array(ArrayConfig(pitch=0.01, layout=UnitLayout(8, 8, ()), unit_poses=(np.eye(4),)))


def test_directivity_on_axis_and_series_continuity():
    assert piston_directivity(0.0) == 1.0
    x = np.array([0.5e-4, 0.99e-4, 1.01e-4, 0.3, 2.0, 5.0])
    assert np.allclose(piston_directivity(x), 2 * j1(x) / x, rtol=1e-12)


def test_single_transducer_closed_form():
    # on-axis: p = e^{jkd} / d exactly
    p = pressure_at(lone(), np.array([1.0]), (0, 0.2, 0))
    assert p == pytest.approx(np.exp(1j * K * 0.2) / 0.2, rel=1e-12)


def test_zero_drive_zero_field(small):
    p = pressures(small, np.zeros(64, complex), GridSpec.plane((0, 0.2, 0), 0.02, 0.005).points())
    assert np.all(p == 0)


def test_equidistant_pair_doubles():
    g = pair()
    one = pressure_at(lone((-0.01, 0, 0)), np.ones(1), (0, 0.15, 0))
    two = pressure_at(g, np.ones(2), (0, 0.15, 0))
    assert two == pytest.approx(2 * one, rel=1e-12)


def test_inverse_distance_decay():
    a = abs(pressure_at(lone(), np.ones(1), (0, 0.1, 0)))
    b = abs(pressure_at(lone(), np.ones(1), (0, 0.2, 0)))
    assert a / b == pytest.approx(2.0, rel=1e-12)


def test_off_axis_directivity():
    pt = np.array([0.1, 0.1, 0.0])
    d = np.linalg.norm(pt)
    x = K * PISTON_RADIUS * math.sin(math.pi / 4)
    assert abs(pressure_at(lone(), np.ones(1), pt)) == pytest.approx(2 * j1(x) / x / d, rel=1e-12)


def test_absorption_attenuates():
    a = abs(pressure_at(lone(), np.ones(1), (0, 0.2, 0), absorption=0.1))
    assert a == pytest.approx(math.exp(-0.02) / 0.2, rel=1e-12)


def test_singular_point(small):
    with pytest.raises(SingularityError):
        pressures(small, np.ones(64), small.positions[:1])


@settings(max_examples=20, deadline=None)
@given(st.floats(-2, 2), st.floats(-2, 2))
def test_superposition_linearity(alpha, beta):
    g = pair()
    rng = np.random.default_rng(0)
    pts = rng.uniform([-0.05, 0.05, -0.05], [0.05, 0.25, 0.05], (16, 3))
    q1 = np.array([1.0, 0.3j])
    q2 = np.array([0.2 - 0.5j, 0.7])
    lhs = pressures(g, alpha * q1 + beta * q2, pts)
    rhs = alpha * pressures(g, q1, pts) + beta * pressures(g, q2, pts)
    assert np.allclose(lhs, rhs, rtol=1e-12, atol=1e-12)


def test_translation_equivariance(small):
    shift = np.array([0.013, 0.0, -0.021])
    q = np.exp(1j * np.linspace(0, 3, 64))
    pts = np.array([[0.0, 0.15, 0.0], [0.02, 0.2, 0.01]])
    moved = small.translated(shift)
    assert np.allclose(pressures(moved, q, pts + shift), pressures(small, q, pts), rtol=1e-10)


def test_workers_do_not_change_result(small):
    grid = GridSpec.plane((0, 0.2, 0), 0.05, 0.001)
    q = np.exp(1j * phases_for_focus(small, (0, 0.2, 0)))
    a = field_map(small, q, grid, workers=1)
    b = field_map(small, q, grid, workers=4)
    assert np.array_equal(a.pressure, b.pressure)


def test_two_by_two_map_matches_pointwise(small):
    grid = GridSpec((0, 0.2, 0), extent=(0.01, 0.02), resolution=(2, 2))
    q = np.ones(64)
    fmap = field_map(small, q, grid)
    for i in range(2):
        for j in range(2):
            assert fmap.pressure[i, j] == pytest.approx(pressure_at(small, q, fmap.point(i, j)), rel=1e-14)
    assert np.allclose(fmap.point(1, 0), [0.005, 0.2, -0.01])


def test_focus_reaches_coherent_sum(small):
    focus = (0.01, 0.18, -0.005)
    drive = DriveFrame(0.0, np.ones(64), phases_for_focus(small, focus))
    assert abs(pressure_at(small, drive, focus)) == pytest.approx(coherent_sum(small, drive, focus), rel=1e-12)


def test_grid_validation():
    with pytest.raises(ValueError):
        GridSpec(axes=((1, 0, 0), (1, 0, 0)))
    with pytest.raises(ValueError):
        GridSpec(resolution=(1, 5))


def test_local_maxima_order():
    m = np.zeros((7, 7))
    m[1, 1], m[5, 5], m[1, 5] = 1.0, 3.0, 2.0
    assert local_maxima(m).tolist() == [[5, 5], [1, 5], [1, 1]]
    assert len(local_maxima(np.zeros((4, 4)))) == 0


def test_focal_metrics_zero_field_not_focused():
    fmap = FieldMap(GridSpec.plane((0, 0.2, 0), 0.02, 0.001), np.zeros((21, 21), complex))
    (m,) = focal_metrics(fmap, [(0, 0.2, 0)])
    assert not m.focused


def test_focal_metrics_far_target_not_focused(small):
    q = np.exp(1j * phases_for_focus(small, (0, 0.2, 0)))
    fmap = field_map(small, q, GridSpec.plane((0, 0.2, 0), 0.02, 0.001))
    near, far = focal_metrics(fmap, [(0, 0.2, 0), (0.5, 0.2, 0)])
    assert near.focused and near.offset <= 1e-3
    assert not far.focused


def test_five_well_separated_foci_resolved(array):
    # a pentagon of 20 mm radius is far above the diffraction limit; each vertex gets its own peak
    c = np.array([0.0, 0.2, 0.0])
    ang = 2 * np.pi * np.arange(5) / 5
    foci = c + 0.02 * np.column_stack([np.cos(ang), np.zeros(5), np.sin(ang)])
    drive = drive_for_frame(array, FociFrame(0.0, foci, 1.0))
    fmap = field_map(array, drive, GridSpec.plane(c, 0.06, 0.001))
    metrics = focal_metrics(fmap, foci)
    lam = 346.0 / 40e3
    assert all(m.focused and m.offset <= lam for m in metrics)
    assert len({m.peak_index for m in metrics}) == 5


def test_pgm_and_csv(tmp_path, small):
    q = np.exp(1j * phases_for_focus(small, (0.005, 0.2, 0)))
    fmap = field_map(small, q, GridSpec((0, 0.2, 0), extent=(0.03, 0.02), resolution=(31, 21)))
    fmap.to_pgm(tmp_path / "f.pgm")
    img = read_pgm(tmp_path / "f.pgm")
    assert img.shape == (21, 31) and img.max() == 65535
    r, c = np.unravel_index(np.argmax(img), img.shape)
    assert abs(fmap.grid.u[c] - 0.005) <= 346 / 40e3
    fmap.to_csv(tmp_path / "f.csv")
    lines = (tmp_path / "f.csv").read_text().splitlines()
    assert lines[0] == "u,v,re,im,abs" and len(lines) == 1 + 31 * 21


def test_radiation_force_formula():
    # 2 p^2 S / (rho c^2) by hand for p = 1000 Pa, S = 1 cm^2
    assert radiation_force(1000.0, 1e-4) == pytest.approx(2 * 1e6 * 1e-4 / (1.18 * 346 ** 2), rel=1e-15)
    assert radiation_force(0.0, 1e-4) == 0.0
    with pytest.raises(ValueError):
        radiation_force(-1.0, 1e-4)


@given(st.floats(0, 1e4), st.floats(1e-6, 1e-2))
def test_radiation_force_quadratic(p, s):
    assert radiation_force(2 * p, s) == pytest.approx(4 * radiation_force(p, s), rel=1e-12)


def test_calibration_reproduces_reference_anchor():
    # 18 x 18 grid at 10 mm pitch, 16 mN over a 20 mm disc at 0.2 m
    layout = UnitLayout(18, 18, ())
    m = np.eye(4)
    m[0, 3] = m[2, 3] = -0.085
    g = build_array(ArrayConfig(pitch=0.01, layout=layout, unit_poses=(m,)))
    s = calibrate_source_strength(g, (0, 0.2, 0), 16e-3, 0.02)
    assert s == pytest.approx(CALIBRATED_SOURCE_STRENGTH, rel=1e-3)


def test_spot_force_zero_drive(small):
    assert spot_force(small, np.zeros(64), (0, 0.2, 0)) == 0.0
