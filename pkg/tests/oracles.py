"""Independent reference implementations used as test oracles.

Everything here is written from the textbook formulas with generic linear
algebra (``scipy.linalg.sqrtm``, ``numpy.linalg.inv``, explicit full-size
measurement matrices) so it shares no code path with the package.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.linalg import sqrtm

# Frozen reference values, computed once with the formulas below and checked
# in test_oracles.py.
# 2 + exp(-1/100) * (50 - 2)
ALPHA_AFTER_ONE_SECOND = 49.522392019960066
# R(pi/4) diag(4, 1) R(pi/4)^T
ROTATED_2_1 = np.array([[2.5, 1.5], [1.5, 2.5]])
# GWD between concentric circles of radii 2 and 1
GWD_CIRCLES_2_1 = math.sqrt(2.0)


def rot(a: float) -> np.ndarray:
    return np.array([[math.cos(a), -math.sin(a)], [math.sin(a), math.cos(a)]])


def extent_matrix(a: float, b: float, o: float) -> np.ndarray:
    R = rot(o)
    return R @ np.diag([a * a, b * b]) @ R.T


def polar_point(pose, r: float, phi: float) -> tuple[float, float]:
    x, y, th = (float(v) for v in pose)
    return x + r * math.cos(th + phi), y + r * math.sin(th + phi)


def central_diff(f, x: np.ndarray, h: float = 1e-6) -> np.ndarray:
    """Jacobian of ``f`` at ``x`` by central differences."""
    x = np.asarray(x, dtype=float)
    f0 = np.asarray(f(x), dtype=float)
    J = np.zeros((f0.size, x.size))
    for k in range(x.size):
        e = np.zeros_like(x)
        e[k] = h
        J[:, k] = (np.asarray(f(x + e)) - np.asarray(f(x - e))) / (2.0 * h)
    return J


def random_spd(rng: np.random.Generator, lo: float = 0.05, hi: float = 5.0) -> np.ndarray:
    a, b = np.sort(rng.uniform(lo, hi, 2))[::-1]
    return extent_matrix(a, b, rng.uniform(-math.pi, math.pi))


def gwd_sqrtm(c1, X1, c2, X2) -> float:
    r1 = np.real(sqrtm(X1))
    cross = np.real(sqrtm(r1 @ X2 @ r1))
    d = np.asarray(c1, float) - np.asarray(c2, float)
    shape = np.trace(X1) + np.trace(X2) - 2.0 * np.trace(cross)
    return math.sqrt(float(d @ d) + max(float(shape), 0.0))


def rma_update(X, alpha, Z, W, centroid, P, gamma):
    """Random-matrix extent update with generic matrix functions."""
    Z = np.asarray(Z, float)
    m = Z.shape[0]
    zbar = Z.mean(axis=0)
    Zbar = sum(np.outer(z - zbar, z - zbar) for z in Z)
    Y = gamma * X + W
    off = zbar - np.asarray(centroid, float)
    M = np.outer(off, off)
    S = P + Y / m
    Xh = np.real(sqrtm(X))
    A = Xh @ np.linalg.inv(np.real(sqrtm(S)))
    B = Xh @ np.linalg.inv(np.real(sqrtm(Y)))
    alpha_new = alpha + m
    X_new = (alpha * X + A @ M @ A.T + B @ Zbar @ B.T) / alpha_new
    return X_new, alpha_new


def ekf_mean_update(mean, P, slot, r, phi, R_meas):
    """EKF update with the batch-mean pseudo-measurement, full-size H."""
    n = mean.shape[0]
    x, y, th = mean[:3]
    pts = np.array([polar_point(mean[:3], ri, pi) for ri, pi in zip(r, phi)])
    zbar = pts.mean(axis=0)
    H = np.zeros((2, n))
    # derivative of the mean of the converted points w.r.t. the pose
    H[:, :3] = -np.array(
        [[1.0, 0.0, -np.mean([ri * math.sin(th + pi) for ri, pi in zip(r, phi)])],
         [0.0, 1.0, np.mean([ri * math.cos(th + pi) for ri, pi in zip(r, phi)])]]
    )
    i = 3 + 2 * slot
    H[:, i : i + 2] = np.eye(2)
    nu = zbar - mean[i : i + 2]
    S = H @ P @ H.T + R_meas
    K = P @ H.T @ np.linalg.inv(S)
    new_mean = mean + K @ nu
    new_P = (np.eye(n) - K @ H) @ P @ (np.eye(n) - K @ H).T + K @ R_meas @ K.T
    return new_mean, new_P, float(nu @ np.linalg.solve(S, nu))
