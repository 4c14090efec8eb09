"""Car-park scenario generator.

Two rows of parked cars (elliptical landmarks) flank an aisle. The platform
drives a racetrack loop down the aisle and back around the outside of the
first row. Everything is a deterministic function of ``(seed, SimConfig)``:
the layout, the odometry stream and the radar detections each draw from their
own child stream of the seed.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np

from .geometry import EllipseParams, params_to_spd, rotation, wrap_angle

CLUTTER = -1

_STREAM_LAYOUT = 0
_STREAM_DETECTIONS = 1
_STREAM_ODOMETRY = 2


@dataclass(frozen=True)
class SimConfig:
    # layout
    rows: int = 2
    cols: int = 5
    car_semi_major: float = 2.25
    car_semi_minor: float = 0.9
    car_spacing: float = 4.0
    row_offset: float = 4.5
    orientation_jitter_deg: float = 5.0
    position_jitter: float = 0.2
    # trajectory
    speed: float = 2.0
    scan_period: float = 0.1
    n_scans: int = 600
    track_margin: float = 6.0
    # radar
    detection_rate: float = 4.0
    sigma_range: float = 0.15
    sigma_azimuth_deg: float = 1.0
    max_range: float = 50.0
    fov_deg: float = 360.0
    clutter_rate: float = 0.0
    # odometry
    sigma_v: float = 0.1
    sigma_omega_deg: float = 2.0
    bias_v: float = 0.0
    bias_omega_deg: float = 0.0

    @property
    def R(self) -> np.ndarray:
        return np.diag([self.sigma_range**2, math.radians(self.sigma_azimuth_deg) ** 2])

    @property
    def fov(self) -> float:
        return math.radians(self.fov_deg)


@dataclass(frozen=True)
class LandmarkTruth:
    id: int
    center: tuple[float, float]
    params: EllipseParams

    @property
    def X(self) -> np.ndarray:
        return params_to_spd(self.params)


@dataclass
class OdometryInput:
    """Reported platform motion over one scan period.

    ``bias`` is a known additive correction applied by the filter before
    propagation; the simulator bakes its own (unknown) bias into ``v``/``omega``.
    """

    v: float
    omega: float
    dt: float
    bias: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self) -> None:
        if not self.dt > 0.0:
            raise ValueError(f"odometry dt must be positive, got {self.dt}")


@dataclass
class ScanRecord:
    """One radar scan: odometry since the last scan and tagged detections."""

    index: int
    t: float
    odometry: OdometryInput | None
    ranges: np.ndarray
    azimuths: np.ndarray
    sources: np.ndarray

    def __len__(self) -> int:
        return int(self.ranges.shape[0])


@dataclass
class Scenario:
    seed: int
    config: SimConfig
    landmarks: list[LandmarkTruth]
    true_controls: np.ndarray  # (n_scans, 2): v, omega
    true_poses: np.ndarray  # (n_scans + 1, 3)
    waypoints: np.ndarray = field(default_factory=lambda: np.zeros((0, 2)))

    @property
    def n_scans(self) -> int:
        return int(self.true_controls.shape[0])


def _rng(seed: int, stream: int) -> np.random.Generator:
    return np.random.default_rng([int(seed), stream])


def landmarks_disjoint(landmarks: Iterable[LandmarkTruth]) -> bool:
    """Sufficient separation test: the supports along each center line do not meet."""
    lms = list(landmarks)
    for i, a in enumerate(lms):
        Xa = a.X
        for b in lms[i + 1 :]:
            d = np.subtract(b.center, a.center)
            dist = float(np.hypot(*d))
            if dist == 0.0:
                return False
            u = d / dist
            if math.sqrt(u @ Xa @ u) + math.sqrt(u @ b.X @ u) >= dist:
                return False
    return True


def _track(cfg: SimConfig):
    """Racetrack geometry: (x_left, x_right, radius, y_bottom)."""
    half = 0.5 * cfg.cols * cfg.car_spacing + cfg.track_margin
    return -half, half, cfg.row_offset, 0.0


def _heading_at(s: np.ndarray, cfg: SimConfig) -> np.ndarray:
    """Unwrapped design heading as a function of arc length."""
    x0, x1, rho, _ = _track(cfg)
    straight = x1 - x0
    turn = math.pi * rho
    lap = 2.0 * (straight + turn)
    n_lap, rem = np.divmod(s, lap)
    # bottom straight, right turn, top straight, left turn
    t1 = np.clip(rem - straight, 0.0, turn)
    t2 = np.clip(rem - straight - turn - straight, 0.0, turn)
    psi = t1 / rho + t2 / rho
    return psi + 2.0 * math.pi * n_lap


def _waypoints(cfg: SimConfig) -> np.ndarray:
    x0, x1, rho, y0 = _track(cfg)
    return np.array([[x0, y0], [x1, y0], [x1, y0 + 2 * rho], [x0, y0 + 2 * rho]])


def build_carpark(seed: int, config: SimConfig | None = None) -> Scenario:
    """Generate layout and ground-truth trajectory for one trial."""
    cfg = config or SimConfig()
    rng = _rng(seed, _STREAM_LAYOUT)
    landmarks: list[LandmarkTruth] = []
    # rows alternate above/below the aisle, moving outward every second row
    row_ys = [(1 if r % 2 == 0 else -1) * cfg.row_offset * (1 + 2 * (r // 2)) for r in range(cfg.rows)]
    for y in row_ys:
        for c in range(cfg.cols):
            x = cfg.car_spacing * (c - 0.5 * (cfg.cols - 1))
            jitter = rng.uniform(-cfg.position_jitter, cfg.position_jitter, size=2)
            o = 0.5 * math.pi + math.radians(cfg.orientation_jitter_deg) * rng.uniform(-1.0, 1.0)
            landmarks.append(
                LandmarkTruth(
                    id=len(landmarks),
                    center=(float(x + jitter[0]), float(y + jitter[1])),
                    params=EllipseParams(cfg.car_semi_major, cfg.car_semi_minor, o),
                )
            )
    if not landmarks_disjoint(landmarks):
        raise ValueError("car-park configuration produces overlapping landmarks")

    n = cfg.n_scans
    dt = cfg.scan_period
    s = cfg.speed * dt * np.arange(n + 1)
    psi = _heading_at(s, cfg)
    controls = np.column_stack((np.full(n, cfg.speed), np.diff(psi) / dt))
    x0, _, _, y0 = _track(cfg)
    poses = np.zeros((n + 1, 3))
    poses[0] = (x0, y0, 0.0)
    for k in range(n):
        x, y, th = poses[k]
        v, w = controls[k]
        poses[k + 1] = (x + v * dt * math.cos(th), y + v * dt * math.sin(th), th + w * dt)
    poses[:, 2] = [wrap_angle(a) for a in poses[:, 2]]
    return Scenario(seed, cfg, landmarks, controls, poses, _waypoints(cfg))


def _uniform_disk(rng: np.random.Generator, n: int) -> np.ndarray:
    out = np.empty((0, 2))
    while out.shape[0] < n:
        u = rng.uniform(-1.0, 1.0, size=(2 * (n - out.shape[0]) + 4, 2))
        out = np.vstack((out, u[np.einsum("ij,ij->i", u, u) <= 1.0]))
    return out[:n]


def sample_ellipse(rng: np.random.Generator, center, params: EllipseParams, n: int) -> np.ndarray:
    """``n`` points uniform over the solid ellipse."""
    A = rotation(params.orientation) @ np.diag([params.semi_major, params.semi_minor])
    return np.asarray(center, dtype=float) + _uniform_disk(rng, n) @ A.T


def _in_view(r: np.ndarray, phi: np.ndarray, cfg: SimConfig) -> np.ndarray:
    ok = (r > 0.0) & (r <= cfg.max_range)
    if cfg.fov_deg < 360.0:
        ok &= np.abs(phi) <= 0.5 * cfg.fov
    return ok


def sample_detections(
    scenario: Scenario,
    true_pose,
    rng: np.random.Generator,
    index: int = 0,
    odometry: OdometryInput | None = None,
) -> ScanRecord:
    """Draw one radar scan from the true pose."""
    cfg = scenario.config
    x, y, th = (float(v) for v in true_pose)
    pts, src = [], []
    for lm in scenario.landmarks:
        dx, dy = lm.center[0] - x, lm.center[1] - y
        if not _in_view(np.array([math.hypot(dx, dy)]), np.array([wrap_angle(math.atan2(dy, dx) - th)]), cfg)[0]:
            continue
        k = int(rng.poisson(cfg.detection_rate))
        if k:
            pts.append(sample_ellipse(rng, lm.center, lm.params, k))
            src.append(np.full(k, lm.id))
    if cfg.clutter_rate > 0.0:
        k = int(rng.poisson(cfg.clutter_rate))
        if k:
            half = 0.5 * cfg.fov if cfg.fov_deg < 360.0 else math.pi
            rr = cfg.max_range * np.sqrt(rng.uniform(0.0, 1.0, k))
            aa = th + rng.uniform(-half, half, k)
            pts.append(np.column_stack((x + rr * np.cos(aa), y + rr * np.sin(aa))))
            src.append(np.full(k, CLUTTER))
    if pts:
        P = np.vstack(pts)
        sources = np.concatenate(src)
        r = np.hypot(P[:, 0] - x, P[:, 1] - y)
        phi = np.arctan2(P[:, 1] - y, P[:, 0] - x) - th
        r = r + cfg.sigma_range * rng.standard_normal(r.shape[0])
        phi = phi + math.radians(cfg.sigma_azimuth_deg) * rng.standard_normal(r.shape[0])
        phi = np.remainder(phi + math.pi, 2.0 * math.pi) - math.pi
        phi[phi == -math.pi] = math.pi
        keep = _in_view(r, phi, cfg)
        r, phi, sources = r[keep], phi[keep], sources[keep]
    else:
        r = phi = np.zeros(0)
        sources = np.zeros(0, dtype=int)
    return ScanRecord(index, index * cfg.scan_period, odometry, r, phi, sources.astype(int))


def sample_odometry(true_motion, noise, bias, rng: np.random.Generator, dt: float) -> OdometryInput:
    """Reported ``(v, omega)`` = truth + Gaussian noise + constant bias."""
    v, w = true_motion
    sv, sw = noise
    bv, bw = bias
    return OdometryInput(
        float(v + bv + sv * rng.standard_normal()),
        float(w + bw + sw * rng.standard_normal()),
        dt,
    )


def generate_scans(scenario: Scenario) -> list[ScanRecord]:
    """Odometry and detections for every scan of a scenario.

    Scan ``k`` (1-based) is taken at the true pose after applying control
    ``k - 1``; its odometry covers that motion.
    """
    cfg = scenario.config
    det_rng = _rng(scenario.seed, _STREAM_DETECTIONS)
    odo_rng = _rng(scenario.seed, _STREAM_ODOMETRY)
    noise = (cfg.sigma_v, math.radians(cfg.sigma_omega_deg))
    bias = (cfg.bias_v, math.radians(cfg.bias_omega_deg))
    scans = []
    for k in range(scenario.n_scans):
        odo = sample_odometry(scenario.true_controls[k], noise, bias, odo_rng, cfg.scan_period)
        scans.append(sample_detections(scenario, scenario.true_poses[k + 1], det_rng, k + 1, odo))
    return scans


# Line-delimited replay format. The first line is a scenario header:
#   {"type": "scenario", "seed", "config", "landmarks": [[id, cx, cy, a, b, o], ...],
#    "true_poses": [[x, y, theta], ...], "true_controls": [[v, omega], ...]}
# followed by one line per scan:
#   {"type": "scan", "k", "t", "odom": [v, omega, dt], "det": [[r, phi, source], ...]}
# Floats are written with repr precision, so a round trip is exact.


def scenario_header(scenario: Scenario) -> dict:
    return {
        "type": "scenario",
        "seed": scenario.seed,
        "config": asdict(scenario.config),
        "landmarks": [[lm.id, *lm.center, *lm.params.as_tuple()] for lm in scenario.landmarks],
        "true_poses": scenario.true_poses.tolist(),
        "true_controls": scenario.true_controls.tolist(),
    }


def scan_to_record(scan: ScanRecord) -> dict:
    odo = scan.odometry
    return {
        "type": "scan",
        "k": scan.index,
        "t": scan.t,
        "odom": None if odo is None else [odo.v, odo.omega, odo.dt],
        "det": [[float(r), float(p), int(s)] for r, p, s in zip(scan.ranges, scan.azimuths, scan.sources)],
    }


def write_records(path, scenario: Scenario, scans: Iterable[ScanRecord]) -> None:
    with open(Path(path), "w", encoding="utf-8") as fh:
        fh.write(json.dumps(scenario_header(scenario)) + "\n")
        for scan in scans:
            fh.write(json.dumps(scan_to_record(scan)) + "\n")


def _scan_from_record(rec: dict) -> ScanRecord:
    det = np.asarray(rec["det"], dtype=float).reshape(-1, 3)
    odo = None if rec["odom"] is None else OdometryInput(*rec["odom"])
    return ScanRecord(rec["k"], rec["t"], odo, det[:, 0].copy(), det[:, 1].copy(), det[:, 2].astype(int))


def read_records(path) -> tuple[Scenario, list[ScanRecord]]:
    with open(Path(path), encoding="utf-8") as fh:
        lines = iter(fh)
        head = json.loads(next(lines))
        if head.get("type") != "scenario":
            raise ValueError(f"{path}: first record must be the scenario header")
        cfg = SimConfig(**head["config"])
        lms = [
            LandmarkTruth(int(i), (cx, cy), EllipseParams(a, b, o)) for i, cx, cy, a, b, o in head["landmarks"]
        ]
        scenario = Scenario(
            head["seed"],
            cfg,
            lms,
            np.asarray(head["true_controls"], dtype=float).reshape(-1, 2),
            np.asarray(head["true_poses"], dtype=float).reshape(-1, 3),
            _waypoints(cfg),
        )
        scans = [_scan_from_record(json.loads(line)) for line in lines if line.strip()]
    return scenario, scans

