import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tableturn.geometry import TableSpec, place_batch
from tableturn.ground import Bumps, Cliff, Flat, Ground, Plane, parse_ground
from tableturn.verify import (SUITES, FrameAngles, coplanar_residual, coplanar_rotation,
                              critical_constant, critical_slopes, d_monotone_check,
                              dense_scan_agrees, frame_identity_residuals, frame_slopes,
                              random_frames, run_suite, sign_changes, tripod_frame,
                              uniqueness_scan)

K = 1 / math.sqrt(2)


# --- frames

def test_standard_basis():
    angles, slopes = frame_slopes(np.eye(3))
    assert (angles.beta1, angles.beta2) == (0.0, 0.0)
    assert angles.beta3 == pytest.approx(math.pi / 2)
    assert angles.sin_squares == pytest.approx(1.0, abs=1e-15)
    assert slopes[2] == math.inf


def test_tripod():
    angles, slopes = frame_slopes(tripod_frame())
    np.testing.assert_allclose(slopes, K, atol=1e-12)
    for b in (angles.beta1, angles.beta2, angles.beta3):
        assert math.sin(b) == pytest.approx(1 / math.sqrt(3), abs=1e-12)
        assert math.degrees(b) == pytest.approx(35.26, abs=5e-3)


def test_frame_slopes_rejects_non_orthonormal():
    with pytest.raises(ValueError):
        frame_slopes([[1, 0, 0], [0, 1, 0], [0, 1e-9, 1]])
    with pytest.raises(ValueError):
        frame_slopes(np.eye(3)[:2])


@settings(max_examples=50)
@given(st.integers(0, 2**32 - 1))
def test_random_rotation_identity(seed):
    F = random_frames(1, seed)[0]
    angles, _ = frame_slopes(F)
    assert abs(angles.sin_squares - 1) <= 1e-12


def test_identity_on_many_frames():
    assert frame_identity_residuals(random_frames(100_000, 1)).max() <= 1e-12


def test_frame_angles_in_range():
    for F in random_frames(200, 2):
        a, _ = frame_slopes(F)
        assert all(0 <= b <= math.pi / 2 for b in (a.beta1, a.beta2, a.beta3))
        assert isinstance(a, FrameAngles)


def test_some_slope_is_at_least_critical():
    # one of the sin^2 is >= 1/3, so one slope is >= 1/sqrt(2)
    F = random_frames(10_000, 3)
    s = np.abs(F[..., 2])
    slopes = s / np.sqrt(1 - s * s)
    assert np.all(slopes.max(axis=1) >= K - 1e-12)


# --- critical constant

@pytest.mark.parametrize("r", [1.0, 0.5])
def test_critical_constant_value(r):
    res = critical_constant(r, grid=256)
    assert res.k == pytest.approx(0.7071068, abs=1e-4)


def test_critical_grid_lower_bound():
    for r in (0.25, 1.0):
        phi = np.linspace(-math.pi / 4, math.pi / 4, 256)
        theta = np.linspace(-math.pi / 2, math.pi / 2, 256)
        P, T = np.meshgrid(phi, theta, indexing="ij")
        worst = np.maximum.reduce(critical_slopes(r, P, T))
        assert worst.min() >= K - 1e-9


@pytest.mark.parametrize("r", [0.25, 0.5, 0.75, 1.0])
def test_tripod_configuration_at_minimizer(r):
    res = critical_constant(r)
    assert abs(res.k - K) <= 1e-9
    np.testing.assert_allclose(res.slopes, K, atol=1e-3)
    assert abs(res.phi) <= math.pi / 4
    # the diagonal is flatter than the tripod's edges
    assert math.tan(abs(res.phi)) < K


def test_tangent_is_orthogonal_to_sides():
    A, B, C, _, u, _, _ = place_batch(TableSpec(0.6).half_angle, 0.0, math.cos(0.2), 0.4,
                                      math.sin(0.2), -math.sin(0.2))
    tangent = np.cross(u, B)
    assert abs(tangent @ (B - A)) <= 1e-12 and abs(tangent @ (C - B)) <= 1e-12


def test_critical_constant_rejects():
    with pytest.raises(ValueError):
        critical_constant(0.0)
    with pytest.raises(ValueError):
        critical_constant(1.0, grid=10)


# --- uniqueness

def test_uniqueness_flat():
    for gamma in (0.0, 1.0, 2.9):
        assert uniqueness_scan(Flat(), TableSpec(1.0), gamma, 10_000) == 1


def test_uniqueness_bumps_census():
    rng = np.random.default_rng(5)
    for i in range(50):
        g = Bumps(seed=4000 + i, target=0.7)
        r = (0.3, 0.6, 1.0)[i % 3]
        assert uniqueness_scan(g, TableSpec(r), rng.uniform(0, math.pi), 10_000) == 1


def test_sign_changes_ignores_zeros():
    assert sign_changes([1, 0, 0, -1, 0, -2]) == 1
    assert sign_changes([0, 0]) == 0
    assert sign_changes([1, -1, 1]) == 2


# --- coplanar rotation

def test_coplanar_plane():
    res = coplanar_rotation(Plane(0.5, 0), TableSpec(1.0))
    assert res.alpha == 0.0 and res.found
    assert abs(res.residual) <= 1e-12


def test_coplanar_bumps_dense_scan():
    g = Bumps(seed=3, target=0.7)
    spec = TableSpec(1.0)
    res = coplanar_rotation(g, spec)
    assert res.found and abs(res.residual) <= 1e-9
    assert dense_scan_agrees(g, spec, res.alpha, 10_000)


def test_coplanar_rectangle():
    g = Bumps(seed=6, target=0.7)
    res = coplanar_rotation(g, TableSpec(0.5))
    assert res.found and abs(res.residual) <= 1e-9
    assert abs(float(coplanar_residual(g, TableSpec(0.5), res.alpha))) <= 1e-9


def test_coplanar_cliff_may_report_no_root():
    # a root claim must be genuine; a bracket that closes on a cliff is not one
    res = coplanar_rotation(Cliff(), TableSpec(1.0))
    assert (abs(res.residual) <= 1e-9) == res.found


def test_coplanar_square_residual_flips_on_quarter_turn():
    g = Bumps(seed=3, target=0.7)
    a = np.linspace(0, 1, 7)
    r0 = coplanar_residual(g, TableSpec(1.0), a)
    r1 = coplanar_residual(g, TableSpec(1.0), a + math.pi / 2)
    np.testing.assert_allclose(r1, -r0, atol=1e-12)


# --- D monotonicity

def test_d_monotone():
    assert d_monotone_check(Flat(), 0.0, 1000)
    assert d_monotone_check(Plane(0.5, 0), 0.0, 1000)
    assert d_monotone_check(parse_ground("plane:sx=1,sy=0"), 0.0, 1000)


class Wavy(Ground):
    kind = "wavy"

    def _eval(self, x, y):
        return 2 * np.sin(6 * x)


def test_d_monotone_detects_oscillation():
    # k = 12: the height difference across the diagonal swings faster than 4t^2 grows
    assert not d_monotone_check(Wavy(), 0.0, 1000)
    assert d_monotone_check(Wavy(), math.pi / 2, 1000)


# --- suites

def test_suite_registry():
    assert set(SUITES) == {"frames", "critical-k", "uniqueness", "d-monotone", "coplanar", "sharpness"}
    with pytest.raises(KeyError):
        run_suite("nope")


@pytest.mark.parametrize("name", ["frames", "critical-k", "d-monotone", "coplanar", "sharpness"])
def test_suites_pass(name):
    checks = run_suite(name)
    assert checks and all(c.passed for c in checks), [c.line() for c in checks if not c.passed]
