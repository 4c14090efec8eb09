"""Landmark extent estimation.

Two estimators share one initializer:

* a model-free ellipse fit (EFA) from a point set, used to seed the extent and,
  run over a sliding window, as the baseline estimator;
* the Bayesian random-matrix filter (RMA): constant-extent prediction with a
  confidence decay toward 2, and a batch update that weighs the spread of the
  detections and their mean offset against the prior extent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import (
    EllipseParams,
    params_to_spd,
    spd_inv_sqrt,
    spd_sqrt,
    sym_eig,
)

# floor on fitted semi-axes; collinear clusters collapse to this width (m)
MIN_SEMI_AXIS = 0.05
# sliding window of the EFA baseline (points)
EFA_WINDOW = 100
# regularization added before inverse square roots
REG_EPS = 1e-9


@dataclass(frozen=True)
class ExtentState:
    """Extent matrix ``X`` (m^2) and its confidence ``alpha`` (> 2)."""

    X: np.ndarray
    alpha: float


@dataclass(frozen=True)
class MeasurementBatch:
    """Converted detections of one landmark in one scan and their noise."""

    points: np.ndarray
    W: np.ndarray

    @property
    def count(self) -> int:
        return self.points.shape[0]


def efa_fit(points, min_axis: float = MIN_SEMI_AXIS) -> EllipseParams:
    """Coarse ellipse fit of a point cloud.

    The orientation is the major principal direction of the scatter matrix and
    each semi-axis is half the spread of the projections onto its principal
    direction, floored at ``min_axis``.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 2:
        raise ValueError(f"efa_fit needs an (n>=2, 2) point array, got shape {pts.shape}")
    d = pts - pts.sum(axis=0) / pts.shape[0]
    scatter = d.T @ d / pts.shape[0]
    _, _, angle = sym_eig(scatter)
    c, s = math.cos(angle), math.sin(angle)
    u = d @ np.array([c, s])
    v = d @ np.array([-s, c])
    a = max(0.5 * float(u.max() - u.min()), min_axis)
    b = max(0.5 * float(v.max() - v.min()), min_axis)
    if b > a:
        a, b = b, a
        angle += 0.5 * math.pi
    return EllipseParams(a, b, angle)


def init_extent(points, alpha0: float = 50.0) -> ExtentState:
    return ExtentState(params_to_spd(efa_fit(points)), float(alpha0))


def predict_extent(e: ExtentState, dt: float, tau: float) -> ExtentState:
    """Keep the extent; let the confidence decay toward 2."""
    if dt < 0.0 or tau <= 0.0:
        raise ValueError(f"need dt >= 0 and tau > 0, got dt={dt}, tau={tau}")
    return ExtentState(e.X, 2.0 + math.exp(-dt / tau) * (e.alpha - 2.0))


def update_extent(
    e: ExtentState,
    batch: MeasurementBatch,
    centroid,
    P_centroid: np.ndarray,
    gamma_z: float = 0.25,
) -> ExtentState:
    """Random-matrix measurement update of one landmark's extent.

    Parameters
    ----------
    e:
        Predicted extent state.
    batch:
        Detections associated to the landmark this scan (global frame) and the
        aggregated Cartesian noise ``W``.
    centroid, P_centroid:
        Predicted landmark position and its 2x2 covariance.
    gamma_z:
        Ratio between the detection spread and the extent matrix (1/4 for a
        uniform distribution over the solid ellipse).
    """
    Z = np.asarray(batch.points, dtype=float)
    m = Z.shape[0]
    if m < 1:
        raise ValueError("update_extent needs at least one detection")
    X = e.X
    z_mean = Z.sum(axis=0) / m
    d = Z - z_mean
    spread = d.T @ d
    Y = gamma_z * X + batch.W
    off = z_mean - np.asarray(centroid, dtype=float)
    M = np.outer(off, off)
    S = P_centroid + Y / m

    X_half = spd_sqrt(X)
    A = X_half @ spd_inv_sqrt(S, shift=REG_EPS)
    B = X_half @ spd_inv_sqrt(Y, shift=REG_EPS)
    M_hat = A @ M @ A.T
    Y_hat = B @ spread @ B.T

    alpha_new = e.alpha + m
    X_new = (e.alpha * X + M_hat + Y_hat) / alpha_new
    return ExtentState(0.5 * (X_new + X_new.T), alpha_new)


class EfaTracker:
    """Sliding-window EFA baseline for one landmark.

    Points are stored as offsets from the landmark centroid estimate at the
    time they were observed, so centroid corrections do not smear the window.
    """

    def __init__(self, window: int = EFA_WINDOW):
        self.window = window
        self._buf = np.zeros((window, 2))
        self._n = 0
        self._head = 0

    def extend(self, offsets) -> None:
        pts = np.asarray(offsets, dtype=float).reshape(-1, 2)
        if pts.shape[0] >= self.window:
            pts = pts[-self.window :]
            self._buf[:] = pts
            self._head = 0
            self._n = self.window
            return
        for p in pts:
            self._buf[self._head] = p
            self._head = (self._head + 1) % self.window
        self._n = min(self._n + pts.shape[0], self.window)

    def __len__(self) -> int:
        return self._n

    def points(self) -> np.ndarray:
        """Stored offsets, oldest first."""
        if self._n < self.window:
            return self._buf[: self._n].copy()
        return np.roll(self._buf, -self._head, axis=0)

    def fit(self) -> EllipseParams:
        # the fit is order-independent, so the raw ring is fine
        return efa_fit(self._buf[: self._n])


def efa_baseline_step(history, window: int = EFA_WINDOW) -> EllipseParams:
    """Re-fit the ellipse from the most recent ``window`` associated points."""
    pts = np.asarray(history, dtype=float)
    if pts.shape[0] > window:
        pts = pts[-window:]
    return efa_fit(pts)

