"""Augmented-state EKF-SLAM with extended landmarks.

The EKF state holds the platform pose followed by the landmark centroids.
Landmark extents live beside the state (one :class:`ExtentState` per
landmark) and couple back into the filter in two places when extent
exploitation is on: detections are sifted by the landmark contour instead of
a distance threshold, and the centroid update uses the extent-implied spread
of the detection mean as its measurement covariance.

Each scan the centroid is updated with a single pseudo-measurement, the mean
of the associated detections. The detections are converted to the global
frame with the current pose estimate, so the innovation depends on the pose
through the conversion Jacobian and the update corrects pose and map jointly.
"""

from __future__ import annotations

import copy
import enum
import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .extent import (
    EFA_WINDOW,
    EfaTracker,
    ExtentState,
    MeasurementBatch,
    efa_fit,
    init_extent,
    predict_extent,
    update_extent,
)
from .geometry import EllipseParams, params_to_spd, quad_form, wrap_angle
from .measurement import (
    aggregate_noise_batch,
    cartesian_noise_batch,
    polar_to_cartesian_batch,
)
from .simulator import OdometryInput

POSE_DIM = 3


class Status(str, enum.Enum):
    CANDIDATE = "candidate"
    CONFIRMED = "confirmed"
    REMOVED = "removed"


class Estimator(str, enum.Enum):
    RMA = "rma"
    EFA = "efa"
    BOTH = "both"


@dataclass(frozen=True)
class SlamConfig:
    """Filter, association and landmark-management parameters."""

    # extent filter
    n_init: int = 20
    tau: float = 100.0
    alpha0: float = 50.0
    gamma_z: float = 0.25
    efa_window: int = EFA_WINDOW
    estimator: str = "both"
    # exploitation of the extent for sifting and centroid updates
    exploit_extent: bool = True
    containment_scale: float = 2.0
    # association
    gate: float = 3.0
    chi2_prob: float = 0.99
    # spread assumed for the detection mean when no extent is used (m^2)
    default_spread: float = 0.01
    # spread assumed when a confirmed landmark enters the state (m^2)
    init_spread: float = 1.0
    # lifecycle
    r_cluster: float = 1.5
    m_new: int = 3
    confirm_m: int = 3
    confirm_n: int = 5
    k_remove: int = 10
    # noise models (filter side)
    sigma_range: float = 0.15
    sigma_azimuth_deg: float = 1.0
    sigma_v: float = 0.1
    sigma_omega_deg: float = 2.0
    max_range: float = 50.0
    fov_deg: float = 360.0

    def __post_init__(self) -> None:
        if self.n_init < 3:
            raise ValueError(f"n_init must be >= 3, got {self.n_init}")
        Estimator(self.estimator)

    @property
    def R(self) -> np.ndarray:
        return np.diag([self.sigma_range**2, math.radians(self.sigma_azimuth_deg) ** 2])

    @property
    def Q(self) -> np.ndarray:
        return np.diag([self.sigma_v**2, math.radians(self.sigma_omega_deg) ** 2])

    @property
    def chi2_gate(self) -> float:
        # chi-square quantile with 2 degrees of freedom has a closed form
        return -2.0 * math.log1p(-self.chi2_prob)

    @property
    def uses_rma(self) -> bool:
        return self.estimator in ("rma", "both")

    @property
    def uses_efa(self) -> bool:
        return self.estimator in ("efa", "both")


@dataclass
class AugmentedBelief:
    """Platform pose followed by landmark centroids, with joint covariance."""

    mean: np.ndarray
    cov: np.ndarray

    @classmethod
    def from_pose(cls, pose, P_pose=None) -> "AugmentedBelief":
        P = np.zeros((3, 3)) if P_pose is None else np.array(P_pose, dtype=float)
        return cls(np.array(pose, dtype=float), P)

    @property
    def n_landmarks(self) -> int:
        return (self.mean.shape[0] - POSE_DIM) // 2

    @property
    def pose(self) -> np.ndarray:
        return self.mean[:POSE_DIM]

    def landmark(self, slot: int) -> tuple[np.ndarray, np.ndarray]:
        i = POSE_DIM + 2 * slot
        return self.mean[i : i + 2], self.cov[i : i + 2, i : i + 2]

    def copy(self) -> "AugmentedBelief":
        return AugmentedBelief(self.mean.copy(), self.cov.copy())


@dataclass
class LandmarkRecord:
    """Bookkeeping for one landmark or landmark candidate.

    Candidates are tracked outside the EKF state by a running mean position;
    ``slot`` is assigned when the landmark is confirmed and enters the state.
    """

    id: int
    status: Status = Status.CANDIDATE
    slot: int | None = None
    position: np.ndarray = field(default_factory=lambda: np.zeros(2))
    n_points: int = 0
    hits: deque = field(default_factory=deque)
    age: int = 0
    misses: int = 0
    buffer: list = field(default_factory=list)
    extent: ExtentState | None = None
    efa: EfaTracker | None = None
    efa_params: EllipseParams | None = None
    last_r: np.ndarray | None = None
    last_phi: np.ndarray | None = None

    @property
    def has_extent(self) -> bool:
        return self.extent is not None or self.efa_params is not None

    def extent_matrix(self, estimator: str = "both") -> np.ndarray | None:
        """Extent used for exploitation: RMA when it runs, else the EFA fit."""
        if self.extent is not None and estimator in ("rma", "both"):
            return self.extent.X
        if self.efa_params is not None:
            return params_to_spd(self.efa_params)
        return None


@dataclass
class SlamState:
    belief: AugmentedBelief
    landmarks: list[LandmarkRecord] = field(default_factory=list)
    next_id: int = 0

    @classmethod
    def initial(cls, pose, P_pose=None) -> "SlamState":
        return cls(AugmentedBelief.from_pose(pose, P_pose))

    def confirmed(self) -> list[LandmarkRecord]:
        return sorted(
            (lm for lm in self.landmarks if lm.status is Status.CONFIRMED), key=lambda lm: lm.slot
        )

    def candidates(self) -> list[LandmarkRecord]:
        return [lm for lm in self.landmarks if lm.status is Status.CANDIDATE]


# ---------------------------------------------------------------------------
# prediction


def motion_model(pose, u: OdometryInput) -> np.ndarray:
    v = u.v + u.bias[0]
    w = u.omega + u.bias[1]
    x, y, th = pose
    return np.array([x + v * u.dt * math.cos(th), y + v * u.dt * math.sin(th), th + w * u.dt])


def motion_jacobians(pose, u: OdometryInput) -> tuple[np.ndarray, np.ndarray]:
    """Jacobians of :func:`motion_model` w.r.t. the pose and w.r.t. ``(v, omega)``."""
    v = u.v + u.bias[0]
    th = pose[2]
    c, s = math.cos(th), math.sin(th)
    F = np.array([[1.0, 0.0, -v * u.dt * s], [0.0, 1.0, v * u.dt * c], [0.0, 0.0, 1.0]])
    G = np.array([[u.dt * c, 0.0], [u.dt * s, 0.0], [0.0, u.dt]])
    return F, G


def predict(belief: AugmentedBelief, u: OdometryInput, Q: np.ndarray) -> AugmentedBelief:
    """Propagate the pose with the unicycle model; landmarks are static."""
    mean = belief.mean.copy()
    cov = belief.cov.copy()
    pose = mean[:3]
    F, G = motion_jacobians(pose, u)
    new_pose = motion_model(pose, u)
    new_pose[2] = wrap_angle(new_pose[2])
    mean[:3] = new_pose
    cov[:3, :] = F @ cov[:3, :]
    cov[:, :3] = cov[:, :3] @ F.T
    cov[:3, :3] += G @ Q @ G.T
    return AugmentedBelief(mean, 0.5 * (cov + cov.T))


# ---------------------------------------------------------------------------
# association


def sift(
    points: np.ndarray,
    centroids: np.ndarray,
    extents: list[np.ndarray | None],
    mode: str,
    gate: float,
    scale: float = 1.0,
) -> np.ndarray:
    """Assign each detection to at most one landmark.

    Parameters
    ----------
    points:
        ``(n, 2)`` detections in the global frame.
    centroids:
        ``(L, 2)`` landmark centroids.
    extents:
        Per-landmark extent matrix, or ``None`` when not yet initialized.
    mode:
        ``"threshold"``: accept a detection within ``gate`` meters.
        ``"extent"``: accept a detection inside the ``scale``-scaled contour of
        landmarks with an extent; landmarks without one fall back to the gate.

    Returns
    -------
    ``(n,)`` integer array of landmark indices, ``-1`` for unassociated. Among
    accepting landmarks the nearest centroid wins.
    """
    n = points.shape[0]
    L = centroids.shape[0]
    if n == 0 or L == 0:
        return np.full(n, -1, dtype=int)
    diff = points[:, None, :] - centroids[None, :, :]
    dist = np.hypot(diff[..., 0], diff[..., 1])
    accept = dist <= gate
    if mode == "extent":
        for j, X in enumerate(extents):
            if X is not None:
                accept[:, j] = quad_form(diff[:, j, :], X) <= scale
    elif mode != "threshold":
        raise ValueError(f"unknown sifting mode {mode!r}")
    masked = np.where(accept, dist, np.inf)
    best = np.argmin(masked, axis=1)
    return np.where(np.isfinite(masked[np.arange(n), best]), best, -1)


def cluster_points(points: np.ndarray, radius: float) -> list[np.ndarray]:
    """Single-linkage clusters (index arrays) with link distance ``radius``."""
    n = points.shape[0]
    if n == 0:
        return []
    diff = points[:, None, :] - points[None, :, :]
    adj = np.hypot(diff[..., 0], diff[..., 1]) <= radius
    n_comp, labels = connected_components(csr_matrix(adj), directed=False)
    return [np.flatnonzero(labels == c) for c in range(n_comp)]


# ---------------------------------------------------------------------------
# centroid update


def measurement_covariance(
    lm: LandmarkRecord, W: np.ndarray, m: int, config: SlamConfig
) -> np.ndarray:
    """Covariance of the detection-mean pseudo-measurement."""
    X = lm.extent_matrix(config.estimator) if config.exploit_extent else None
    if X is not None:
        return (config.gamma_z * X + W) / m
    return W / m + config.default_spread * np.eye(2)


def update_landmark(
    belief: AugmentedBelief,
    slot: int,
    r: np.ndarray,
    phi: np.ndarray,
    R_meas: np.ndarray,
    chi2_gate: float = math.inf,
) -> tuple[AugmentedBelief, bool]:
    """EKF update of pose and one centroid with the mean of a detection batch.

    ``R_meas`` is the covariance of the detection mean (see
    :func:`measurement_covariance`). Returns the updated belief and whether
    the innovation passed the chi-square gate; a rejected batch leaves the
    belief untouched.
    """
    mean, P = belief.mean, belief.cov
    pose = mean[:3]
    a = pose[2] + phi
    zbar = np.array([pose[0] + np.dot(r, np.cos(a)) / r.shape[0], pose[1] + np.dot(r, np.sin(a)) / r.shape[0]])
    # d zbar / d pose, the conversion Jacobian averaged over the batch
    J = np.array([[1.0, 0.0, -(zbar[1] - pose[1])], [0.0, 1.0, zbar[0] - pose[0]]])
    i = POSE_DIM + 2 * slot
    nu = zbar - mean[i : i + 2]
    # H = [-J, 0, ..., I (landmark), ..., 0]
    PHt = P[:, i : i + 2] - P[:, :3] @ J.T
    S = PHt[i : i + 2] - J @ PHt[:3] + R_meas
    s01 = 0.5 * (S[0, 1] + S[1, 0])
    det = S[0, 0] * S[1, 1] - s01 * s01
    S_inv = np.array([[S[1, 1], -s01], [-s01, S[0, 0]]]) / det
    S = np.array([[S[0, 0], s01], [s01, S[1, 1]]])
    if float(nu @ S_inv @ nu) > chi2_gate:
        return belief, False
    K = PHt @ S_inv
    new_mean = mean + K @ nu
    new_mean[2] = wrap_angle(new_mean[2])
    new_cov = P - K @ S @ K.T
    return AugmentedBelief(new_mean, 0.5 * (new_cov + new_cov.T)), True


def augment(
    belief: AugmentedBelief, r: np.ndarray, phi: np.ndarray, R_meas: np.ndarray
) -> AugmentedBelief:
    """Append a landmark initialized at the mean of a detection batch."""
    mean, P = belief.mean, belief.cov
    pose = mean[:3]
    zbar = polar_to_cartesian_batch(pose, r, phi).mean(axis=0)
    J = np.array([[1.0, 0.0, -(zbar[1] - pose[1])], [0.0, 1.0, zbar[0] - pose[0]]])
    n = mean.shape[0]
    new_mean = np.concatenate((mean, zbar))
    new_cov = np.zeros((n + 2, n + 2))
    new_cov[:n, :n] = P
    cross = J @ P[:3, :]
    new_cov[n:, :n] = cross
    new_cov[:n, n:] = cross.T
    new_cov[n:, n:] = J @ P[:3, :3] @ J.T + R_meas
    return AugmentedBelief(new_mean, 0.5 * (new_cov + new_cov.T))


def remove_landmark(belief: AugmentedBelief, slot: int) -> AugmentedBelief:
    i = POSE_DIM + 2 * slot
    keep = np.r_[0:i, i + 2 : belief.mean.shape[0]]
    return AugmentedBelief(belief.mean[keep], belief.cov[np.ix_(keep, keep)])


# ---------------------------------------------------------------------------
# full cycle


def in_view(pose, point, config: SlamConfig) -> bool:
    dx, dy = point[0] - pose[0], point[1] - pose[1]
    if math.hypot(dx, dy) > config.max_range:
        return False
    if config.fov_deg >= 360.0:
        return True
    return abs(wrap_angle(math.atan2(dy, dx) - pose[2])) <= 0.5 * math.radians(config.fov_deg)


def _maybe_init_extent(lm: LandmarkRecord, config: SlamConfig) -> None:
    if lm.has_extent or len(lm.buffer) < config.n_init:
        return
    pts = np.asarray(lm.buffer)
    if config.uses_rma:
        lm.extent = init_extent(pts, config.alpha0)
    if config.uses_efa:
        lm.efa = EfaTracker(config.efa_window)
        lm.efa.extend(pts)
        lm.efa_params = efa_fit(pts)
    lm.buffer = []


def _extent_step(
    lm: LandmarkRecord,
    points: np.ndarray,
    centroid: np.ndarray,
    P_centroid: np.ndarray,
    W: np.ndarray,
    config: SlamConfig,
) -> None:
    """Feed one scan's detections to the extent estimators of ``lm``."""
    offsets = points - centroid
    if not lm.has_extent:
        lm.buffer.extend(offsets)
        _maybe_init_extent(lm, config)
        return
    if lm.extent is not None:
        lm.extent = update_extent(lm.extent, MeasurementBatch(points, W), centroid, P_centroid, config.gamma_z)
    if lm.efa is not None:
        lm.efa.extend(offsets)
        lm.efa_params = lm.efa.fit()


def step(
    state: SlamState,
    odometry: OdometryInput,
    ranges: np.ndarray,
    azimuths: np.ndarray,
    config: SlamConfig,
    inplace: bool = False,
) -> tuple[SlamState, dict]:
    """One scan: predict, sift, update centroids and extents, manage landmarks.

    With ``inplace=False`` the input state is left untouched.
    """
    if not inplace:
        state = copy.deepcopy(state)
    r_all = np.asarray(ranges, dtype=float)
    phi_all = np.asarray(azimuths, dtype=float)
    log = {"n_detections": int(r_all.shape[0]), "n_associated": 0, "n_gated_out": 0}

    belief = predict(state.belief, odometry, config.Q)
    pose_pred = belief.mean[:3].copy()
    P_pose_pred = belief.cov[:3, :3].copy()
    points = polar_to_cartesian_batch(pose_pred, r_all, phi_all)

    confirmed = state.confirmed()
    centroids = np.array([belief.landmark(lm.slot)[0] for lm in confirmed]).reshape(-1, 2)
    if config.exploit_extent:
        mode = "extent"
        extents = [lm.extent_matrix(config.estimator) for lm in confirmed]
    else:
        mode = "threshold"
        extents = [None] * len(confirmed)
    assign = sift(points, centroids, extents, mode, config.gate, config.containment_scale)

    free = np.flatnonzero(assign < 0)
    candidates = state.candidates()
    cand_pos = np.array([c.position for c in candidates]).reshape(-1, 2)
    cand_assign = np.full(r_all.shape[0], -1, dtype=int)
    if free.size:
        cand_assign[free] = sift(points[free], cand_pos, [None] * len(candidates), "threshold", config.gate)

    for lm in confirmed:
        if lm.extent is not None:
            lm.extent = predict_extent(lm.extent, odometry.dt, config.tau)

    W_full = W_sensor = None
    if r_all.shape[0]:
        W_full = cartesian_noise_batch(pose_pred, P_pose_pred, r_all, phi_all, config.R)
        W_sensor = cartesian_noise_batch(pose_pred, np.zeros((3, 3)), r_all, phi_all, config.R)

    # predicted centroid statistics feed the extent update
    predicted = {lm.id: (c.copy(), belief.landmark(lm.slot)[1].copy()) for lm, c in zip(confirmed, centroids)}
    chi2_gate = config.chi2_gate
    updated: list[tuple[LandmarkRecord, np.ndarray]] = []
    for j, lm in enumerate(confirmed):
        idx = np.flatnonzero(assign == j)
        if idx.size == 0:
            if in_view(pose_pred, centroids[j], config):
                lm.misses += 1
            continue
        R_meas = measurement_covariance(lm, aggregate_noise_batch(W_sensor[idx]), idx.size, config)
        belief, ok = update_landmark(belief, lm.slot, r_all[idx], phi_all[idx], R_meas, chi2_gate)
        if not ok:
            log["n_gated_out"] += 1
            lm.misses += 1
            continue
        lm.misses = 0
        log["n_associated"] += int(idx.size)
        updated.append((lm, idx))

    for lm, idx in updated:
        c_pred, P_pred = predicted[lm.id]
        _extent_step(lm, points[idx], c_pred, P_pred, aggregate_noise_batch(W_full[idx]), config)

    # candidates
    for j, cand in enumerate(candidates):
        idx = np.flatnonzero(cand_assign == j)
        cand.age += 1
        cand.hits.append(idx.size > 0)
        if idx.size == 0:
            continue
        cand.buffer.extend(points[idx] - cand.position)
        total = cand.n_points + idx.size
        cand.position = (cand.position * cand.n_points + points[idx].sum(axis=0)) / total
        cand.n_points = total
        cand.last_r, cand.last_phi = r_all[idx], phi_all[idx]
        if sum(cand.hits) >= config.confirm_m:
            m = idx.size
            R_meas = config.init_spread * np.eye(2) / m + aggregate_noise_batch(W_sensor[idx]) / m
            cand.slot = belief.n_landmarks
            belief = augment(belief, cand.last_r, cand.last_phi, R_meas)
            cand.status = Status.CONFIRMED
            _maybe_init_extent(cand, config)
    for cand in candidates:
        if cand.status is Status.CANDIDATE and cand.age >= config.confirm_n:
            cand.status = Status.REMOVED

    # drop confirmed landmarks that kept missing
    for lm in sorted(confirmed, key=lambda lm: -lm.slot):
        if lm.misses >= config.k_remove:
            belief = remove_landmark(belief, lm.slot)
            for other in state.landmarks:
                if other.slot is not None and other.slot > lm.slot:
                    other.slot -= 1
            lm.status = Status.REMOVED
            lm.slot = None

    # spawn candidates from clusters far from every known landmark
    rest = np.flatnonzero((assign < 0) & (cand_assign < 0))
    if rest.size:
        known = np.vstack(
            [np.array([belief.landmark(lm.slot)[0] for lm in state.confirmed()]).reshape(-1, 2), cand_pos]
        )
        if known.shape[0]:
            d = np.hypot(*(points[rest][:, None, :] - known[None, :, :]).transpose(2, 0, 1))
            rest = rest[d.min(axis=1) > config.gate]
        for members in cluster_points(points[rest], config.r_cluster):
            if members.size < config.m_new:
                continue
            idx = rest[members]
            pos = points[idx].mean(axis=0)
            state.landmarks.append(
                LandmarkRecord(
                    id=state.next_id,
                    position=pos,
                    n_points=int(idx.size),
                    hits=deque([True], maxlen=config.confirm_n),
                    age=1,
                    buffer=list(points[idx] - pos),
                    last_r=r_all[idx],
                    last_phi=phi_all[idx],
                )
            )
            state.next_id += 1

    state.landmarks = [lm for lm in state.landmarks if lm.status is not Status.REMOVED]
    state.belief = belief
    log["n_confirmed"] = sum(lm.status is Status.CONFIRMED for lm in state.landmarks)
    log["n_candidates"] = sum(lm.status is Status.CANDIDATE for lm in state.landmarks)
    return state, log
