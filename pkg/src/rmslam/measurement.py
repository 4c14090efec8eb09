"""Radar polar -> global Cartesian conversion and its noise model."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np


@dataclass(frozen=True)
class PolarDetection:
    """Range (m) and azimuth relative to the platform heading (rad)."""

    r: float
    phi: float


def polar_to_cartesian(pose, s: PolarDetection) -> np.ndarray:
    """Global position of a detection seen from ``pose = [x, y, theta]``."""
    x, y, th = pose[0], pose[1], pose[2]
    a = th + s.phi
    return np.array([x + s.r * math.cos(a), y + s.r * math.sin(a)])


def jacobian_wrt_pose(pose, s: PolarDetection) -> np.ndarray:
    a = pose[2] + s.phi
    return np.array([[1.0, 0.0, -s.r * math.sin(a)], [0.0, 1.0, s.r * math.cos(a)]])


def jacobian_wrt_meas(pose, s: PolarDetection) -> np.ndarray:
    a = pose[2] + s.phi
    c, sn = math.cos(a), math.sin(a)
    return np.array([[c, -s.r * sn], [sn, s.r * c]])


def cartesian_noise(pose, P_pose: np.ndarray, s: PolarDetection, R: np.ndarray) -> np.ndarray:
    """Covariance of one converted detection from pose and sensor uncertainty."""
    Jx = jacobian_wrt_pose(pose, s)
    Js = jacobian_wrt_meas(pose, s)
    W = Jx @ P_pose @ Jx.T + Js @ R @ Js.T
    return 0.5 * (W + W.T)


def aggregate_noise(W_list: Sequence[np.ndarray]) -> np.ndarray:
    """Pick the most conservative member (largest trace) of a set of covariances."""
    if len(W_list) == 0:
        raise ValueError("aggregate_noise needs at least one covariance")
    traces = [float(W[0, 0] + W[1, 1]) for W in W_list]
    return W_list[int(np.argmax(traces))]


# Batched forms used by the filter; one row per detection.


def polar_to_cartesian_batch(pose, r: np.ndarray, phi: np.ndarray) -> np.ndarray:
    a = pose[2] + phi
    return np.column_stack((pose[0] + r * np.cos(a), pose[1] + r * np.sin(a)))


def cartesian_noise_batch(
    pose, P_pose: np.ndarray, r: np.ndarray, phi: np.ndarray, R: np.ndarray
) -> np.ndarray:
    """Stack of per-detection covariances, shape ``(n, 2, 2)``."""
    a = pose[2] + phi
    c, s = np.cos(a), np.sin(a)
    n = r.shape[0]
    Jx = np.zeros((n, 2, 3))
    Jx[:, 0, 0] = 1.0
    Jx[:, 1, 1] = 1.0
    Jx[:, 0, 2] = -r * s
    Jx[:, 1, 2] = r * c
    Js = np.empty((n, 2, 2))
    Js[:, 0, 0] = c
    Js[:, 0, 1] = -r * s
    Js[:, 1, 0] = s
    Js[:, 1, 1] = r * c
    W = Jx @ P_pose @ Jx.transpose(0, 2, 1) + Js @ R @ Js.transpose(0, 2, 1)
    return 0.5 * (W + W.transpose(0, 2, 1))


def aggregate_noise_batch(W: np.ndarray) -> np.ndarray:
    return W[int(np.argmax(W[:, 0, 0] + W[:, 1, 1]))]
