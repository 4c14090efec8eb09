import math

import numpy as np
import pytest

from rmslam.extent import (
    MIN_SEMI_AXIS,
    EfaTracker,
    ExtentState,
    MeasurementBatch,
    efa_baseline_step,
    efa_fit,
    init_extent,
    predict_extent,
    update_extent,
)
from rmslam.geometry import EllipseParams, params_to_spd
from rmslam.simulator import sample_ellipse

import properties
from oracles import ALPHA_AFTER_ONE_SECOND, random_spd, rma_update, rot

CORNERS = np.array([[2.0, 0.0], [-2.0, 0.0], [0.0, 1.0], [0.0, -1.0]])


def test_efa_corners():
    p = efa_fit(CORNERS)
    assert p.as_tuple() == pytest.approx((2.0, 1.0, 0.0), abs=1e-12)


def test_efa_rotation_equivariance():
    p = efa_fit(CORNERS @ rot(math.pi / 6).T + [4.0, -1.0])
    assert p.as_tuple() == pytest.approx((2.0, 1.0, math.pi / 6), abs=1e-12)


def test_efa_axis_swap():
    # tall cloud: the major axis is vertical
    p = efa_fit(CORNERS[:, ::-1])
    assert p.semi_major == pytest.approx(2.0)
    assert abs(abs(p.orientation) - math.pi / 2) < 1e-12


def test_efa_monte_carlo(rng):
    truth = EllipseParams(2.25, 0.9, 0.6)
    p = efa_fit(sample_ellipse(rng, [3.0, 4.0], truth, 10_000))
    assert abs(math.degrees(p.orientation - truth.orientation)) < 5.0
    assert p.semi_major == pytest.approx(truth.semi_major, rel=0.1)
    assert p.semi_minor == pytest.approx(truth.semi_minor, rel=0.1)


def test_efa_collinear_floor():
    pts = np.column_stack((np.linspace(-1, 1, 20), np.zeros(20)))
    p = efa_fit(pts)
    assert p.semi_major == pytest.approx(1.0)
    assert p.semi_minor == MIN_SEMI_AXIS
    coincident = efa_fit(np.ones((5, 2)))
    assert coincident.as_tuple() == (MIN_SEMI_AXIS, MIN_SEMI_AXIS, 0.0)


def test_efa_rejects_bad_input():
    with pytest.raises(ValueError):
        efa_fit(np.zeros((1, 2)))
    with pytest.raises(ValueError):
        efa_fit(np.zeros((5, 3)))


def test_init_extent():
    e = init_extent(CORNERS, 50)
    np.testing.assert_allclose(e.X, np.diag([4.0, 1.0]), atol=1e-12)
    assert e.alpha == 50.0
    line = init_extent(np.column_stack((np.linspace(0, 2, 20), np.linspace(0, 2, 20))), 50)
    assert np.linalg.eigvalsh(line.X)[0] == pytest.approx(MIN_SEMI_AXIS**2)


def test_predict_extent_examples():
    e = ExtentState(np.diag([4.0, 1.0]), 50.0)
    assert predict_extent(e, 0.0, 100.0).alpha == 50.0
    assert predict_extent(e, 1e6, 100.0).alpha == pytest.approx(2.0, abs=1e-12)
    assert abs(predict_extent(e, 1.0, 100.0).alpha - ALPHA_AFTER_ONE_SECOND) < 1e-12
    assert predict_extent(e, 1.0, 100.0).X is e.X
    with pytest.raises(ValueError):
        predict_extent(e, -1.0, 100.0)
    with pytest.raises(ValueError):
        predict_extent(e, 1.0, 0.0)


def test_alpha_recursion(rng):
    assert properties.alpha_recursion_error(rng, 2000) <= 1e-12


def test_shrinkage_identity(rng):
    assert properties.shrinkage_error(rng, 2000) <= 1e-12


def test_single_measurement_uses_offset_only():
    X = np.diag([4.0, 1.0])
    e = ExtentState(X, 10.0)
    c = np.array([0.0, 0.0])
    z = np.array([[0.5, 0.0]])
    out = update_extent(e, MeasurementBatch(z, np.zeros((2, 2))), c, np.zeros((2, 2)), 0.25)
    # S = Y = X/4, A = X^1/2 S^-1/2 = 2 I, so M_hat = 4 M
    expected = (10.0 * X + 4.0 * np.outer(z[0], z[0])) / 11.0
    np.testing.assert_allclose(out.X, expected, atol=1e-8)
    assert out.alpha == 11.0


def test_update_matches_generic_oracle(rng):
    for _ in range(300):
        X = random_spd(rng)
        alpha = float(rng.uniform(3, 80))
        m = int(rng.integers(1, 8))
        c = rng.normal(size=2)
        Z = c + rng.normal(size=(m, 2))
        W = random_spd(rng, 0.01, 0.5)
        P = random_spd(rng, 0.01, 0.5)
        gamma = float(rng.uniform(0.1, 1.0))
        out = update_extent(ExtentState(X, alpha), MeasurementBatch(Z, W), c, P, gamma)
        X_ref, a_ref = rma_update(X, alpha, Z, W, c, P, gamma)
        np.testing.assert_allclose(out.X, X_ref, rtol=1e-7, atol=1e-9)
        assert out.alpha == a_ref


def test_update_rejects_empty_batch():
    with pytest.raises(ValueError):
        update_extent(ExtentState(np.eye(2), 10.0), MeasurementBatch(np.zeros((0, 2)), np.eye(2)), [0, 0], np.eye(2))


def test_spd_preserved(rng):
    assert properties.spd_preservation(rng, 10_000) > 0.0


def test_rotation_equivariance(rng):
    assert properties.rotation_equivariance_error(rng, 500) <= 1e-8


def test_convergence_uniform_stream():
    assert properties.rma_convergence_error(seed=11, n_points=10_000) <= 0.05


def test_convergence_rotated_truth():
    assert properties.rma_convergence_error(seed=12, n_points=10_000, truth=(2.25, 0.9, 0.7)) <= 0.05


def test_efa_tracker_window_and_order(rng):
    t = EfaTracker(window=10)
    pts = rng.normal(size=(25, 2))
    t.extend(pts[:7])
    np.testing.assert_array_equal(t.points(), pts[:7])
    t.extend(pts[7:13])
    assert len(t) == 10
    np.testing.assert_array_equal(t.points(), pts[3:13])
    t.extend(pts[13:])
    np.testing.assert_array_equal(t.points(), pts[15:])
    assert t.fit() == efa_fit(pts[15:])


def test_efa_baseline_step():
    assert efa_baseline_step(CORNERS) == efa_fit(CORNERS)
    long = np.vstack((100.0 * CORNERS, CORNERS))
    # only the trailing window counts
    assert efa_baseline_step(long, window=4) == efa_fit(CORNERS)


def test_efa_baseline_equivariance(rng):
    hist = rng.normal(size=(150, 2)) * [2.0, 0.7]
    R = rot(0.9)
    a = efa_baseline_step(hist)
    b = efa_baseline_step(hist @ R.T)
    np.testing.assert_allclose(params_to_spd(b), R @ params_to_spd(a) @ R.T, atol=1e-10)
