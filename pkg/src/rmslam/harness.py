"""Single trials, Monte Carlo aggregation and result export.

Aggregation rules
-----------------
* Per trial and scan, the GWD of an estimator is averaged over the estimated
  landmarks that have an extent and are matched to a truth (greedy
  nearest-centroid, one-to-one, capped at ``match_cap`` meters).
* Per scan, trials are combined by RMSE: ``sqrt(mean_trials(value**2))``,
  skipping trials with no matched landmark at that scan.
* Overall figures are RMSEs over the per-scan series,
  ``sqrt(mean_scans(series**2))``, so they can be recomputed from the CSV.
* Steady-state statistics (mean and population variance of the per-scan GWD
  curves) start ``steady_burn_in`` scans after the first scan at which every
  trial reports an extent; the same statistics from that first scan on are
  reported as ``post_init_*``. Scan indices in the summary are 0-based rows
  of the series (the CSV ``scan`` column is 1-based).
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import RunConfig
from .geometry import gwd, params_to_spd, wrap_angle
from .simulator import build_carpark, generate_scans
from .slam import SlamState, Status, step

CSV_COLUMNS = ("scan", "t", "pos_err", "heading_err", "mean_gwd_rma", "mean_gwd_efa")
INITIAL_POSE_VAR = 1e-8


@dataclass
class TrialMetrics:
    """Per-scan errors of one trial. GWD entries are NaN where nothing matched."""

    seed: int
    t: np.ndarray
    pos_err: np.ndarray
    heading_err: np.ndarray
    gwd_rma: np.ndarray
    gwd_efa: np.ndarray
    n_confirmed: np.ndarray
    n_matched: np.ndarray
    n_unmatched: np.ndarray

    @property
    def n_scans(self) -> int:
        return int(self.t.shape[0])

    @property
    def pos_rmse(self) -> float:
        return float(np.sqrt(np.mean(self.pos_err**2)))

    @property
    def heading_rmse(self) -> float:
        return float(np.sqrt(np.mean(self.heading_err**2)))


def match_landmarks(est: np.ndarray, truth: np.ndarray, cap: float) -> list[tuple[int, int]]:
    """Greedy one-to-one nearest-centroid matching with a distance cap."""
    if est.shape[0] == 0 or truth.shape[0] == 0:
        return []
    d = np.hypot(*(est[:, None, :] - truth[None, :, :]).transpose(2, 0, 1))
    order = np.argsort(d, axis=None, kind="stable")
    used_e: set[int] = set()
    used_t: set[int] = set()
    pairs = []
    for flat in order:
        i, j = divmod(int(flat), truth.shape[0])
        if d[i, j] > cap:
            break
        if i in used_e or j in used_t:
            continue
        used_e.add(i)
        used_t.add(j)
        pairs.append((i, j))
    return pairs


def run_trial(config: RunConfig, seed: int) -> TrialMetrics:
    """Simulate one car-park run and score pose and extent estimates per scan."""
    scenario = build_carpark(seed, config.sim)
    scans = generate_scans(scenario)
    slam_cfg = config.slam
    truth_c = np.array([lm.center for lm in scenario.landmarks])
    truth_X = [lm.X for lm in scenario.landmarks]

    state = SlamState.initial(scenario.true_poses[0], INITIAL_POSE_VAR * np.eye(3))
    n = len(scans)
    pos_err = np.zeros(n)
    head_err = np.zeros(n)
    g_rma = np.full(n, np.nan)
    g_efa = np.full(n, np.nan)
    n_conf = np.zeros(n, dtype=int)
    n_match = np.zeros(n, dtype=int)
    n_unmatched = np.zeros(n, dtype=int)
    for k, scan in enumerate(scans):
        state, _ = step(state, scan.odometry, scan.ranges, scan.azimuths, slam_cfg, inplace=True)
        pose = state.belief.mean[:3]
        true_pose = scenario.true_poses[k + 1]
        pos_err[k] = math.hypot(pose[0] - true_pose[0], pose[1] - true_pose[1])
        head_err[k] = abs(wrap_angle(pose[2] - true_pose[2]))

        conf = [lm for lm in state.landmarks if lm.status is Status.CONFIRMED]
        n_conf[k] = len(conf)
        with_ext = [lm for lm in conf if lm.has_extent]
        if not with_ext:
            continue
        centers = np.array([state.belief.landmark(lm.slot)[0] for lm in with_ext])
        pairs = match_landmarks(centers, truth_c, config.match_cap)
        n_match[k] = len(pairs)
        n_unmatched[k] = len(with_ext) - len(pairs)
        if not pairs:
            continue
        if slam_cfg.uses_rma:
            g_rma[k] = np.mean([gwd(centers[i], with_ext[i].extent.X, truth_c[j], truth_X[j]) for i, j in pairs])
        if slam_cfg.uses_efa:
            g_efa[k] = np.mean(
                [gwd(centers[i], params_to_spd(with_ext[i].efa_params), truth_c[j], truth_X[j]) for i, j in pairs]
            )
    t = np.array([s.t for s in scans])
    return TrialMetrics(seed, t, pos_err, head_err, g_rma, g_efa, n_conf, n_match, n_unmatched)


def _rms_over_trials(rows: np.ndarray) -> np.ndarray:
    """Column-wise RMS over trials, ignoring NaN; NaN where a column is all NaN."""
    sq = rows**2
    cnt = np.sum(~np.isnan(sq), axis=0)
    tot = np.nansum(sq, axis=0)
    out = np.full(rows.shape[1], np.nan)
    ok = cnt > 0
    out[ok] = np.sqrt(tot[ok] / cnt[ok])
    return out


def _rms(series: np.ndarray) -> float:
    s = series[~np.isnan(series)]
    return float(np.sqrt(np.mean(s**2))) if s.size else float("nan")


@dataclass
class Report:
    """Per-scan series aggregated over trials plus a JSON-able summary."""

    t: np.ndarray
    pos_err: np.ndarray
    heading_err: np.ndarray
    gwd_rma: np.ndarray
    gwd_efa: np.ndarray
    summary: dict = field(default_factory=dict)

    @property
    def n_scans(self) -> int:
        return int(self.t.shape[0])

    @classmethod
    def empty(cls) -> "Report":
        z = np.zeros(0)
        return cls(z, z, z, z, z, {})


def steady_state_stats(series: np.ndarray, start: int) -> dict:
    s = series[start:]
    s = s[~np.isnan(s)]
    if s.size == 0:
        return {"mean": None, "var": None}
    return {"mean": float(np.mean(s)), "var": float(np.var(s))}


def aggregate(config: RunConfig, trials: list[TrialMetrics]) -> Report:
    if not trials:
        raise ValueError("aggregate needs at least one trial")
    t = trials[0].t
    pos = _rms_over_trials(np.array([m.pos_err for m in trials]))
    head = _rms_over_trials(np.array([m.heading_err for m in trials]))
    rma_rows = np.array([m.gwd_rma for m in trials])
    efa_rows = np.array([m.gwd_efa for m in trials])
    g_rma = _rms_over_trials(rma_rows)
    g_efa = _rms_over_trials(efa_rows)

    # extents exist in every trial from init_scan on; the steady window skips a
    # further burn-in during which the map (and with it every GWD) still converges
    reporting = ~np.isnan(rma_rows) | ~np.isnan(efa_rows)
    all_rep = np.flatnonzero(reporting.all(axis=0))
    init_scan = int(all_rep[0]) if all_rep.size else int(t.shape[0])
    steady_start = min(init_scan + config.steady_burn_in, int(t.shape[0]))

    per_trial_var = {}
    for name, rows in (("rma", rma_rows), ("efa", efa_rows)):
        v = [np.nanvar(r[steady_start:]) for r in rows if np.any(~np.isnan(r[steady_start:]))]
        per_trial_var[name] = float(np.mean(v)) if v else None

    summary = {
        "trials": len(trials),
        "seeds": [m.seed for m in trials],
        "n_scans": int(t.shape[0]),
        "pos_rmse": _rms(pos),
        "heading_rmse_rad": _rms(head),
        "heading_rmse_deg": math.degrees(_rms(head)),
        "gwd_rmse_rma": _rms(g_rma),
        "gwd_rmse_efa": _rms(g_efa),
        "init_scan": init_scan,
        "post_init_rma": steady_state_stats(g_rma, init_scan),
        "post_init_efa": steady_state_stats(g_efa, init_scan),
        "steady_start_scan": steady_start,
        "steady_rma": steady_state_stats(g_rma, steady_start),
        "steady_efa": steady_state_stats(g_efa, steady_start),
        "steady_per_trial_var": per_trial_var,
        "per_trial": [
            {"seed": m.seed, "pos_rmse": m.pos_rmse, "heading_rmse_rad": m.heading_rmse} for m in trials
        ],
        "parameters": config.flat(include_io=False),
    }
    return Report(t, pos, head, g_rma, g_efa, _clean(summary))


def _clean(obj):
    """NaN -> None so the summary is strict JSON."""
    if isinstance(obj, float) and math.isnan(obj):
        return None
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    return obj


def _trial_job(args):
    config, seed = args
    return run_trial(config, seed)


def run_trials(config: RunConfig) -> list[TrialMetrics]:
    seeds = [config.seed + i for i in range(config.trials)]
    jobs = [(config, s) for s in seeds]
    if config.workers > 1 and len(seeds) > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            return list(pool.map(_trial_job, jobs))
    return [_trial_job(j) for j in jobs]


def run_monte_carlo(config: RunConfig) -> Report:
    """Run ``config.trials`` trials with seeds ``seed .. seed + trials - 1``."""
    return aggregate(config, run_trials(config))


# ---------------------------------------------------------------------------
# export


def _fmt(v: float) -> str:
    return "" if v is None or (isinstance(v, float) and math.isnan(v)) else repr(float(v))


def report_csv(report: Report) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for k in range(report.n_scans):
        w.writerow(
            [
                k + 1,
                _fmt(report.t[k]),
                _fmt(report.pos_err[k]),
                _fmt(report.heading_err[k]),
                _fmt(report.gwd_rma[k]),
                _fmt(report.gwd_efa[k]),
            ]
        )
    return buf.getvalue()


def read_csv(path) -> Report:
    cols: dict[str, list[float]] = {c: [] for c in CSV_COLUMNS}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != CSV_COLUMNS:
            raise ValueError(f"{path}: unexpected columns {reader.fieldnames}")
        for row in reader:
            for c in CSV_COLUMNS:
                cols[c].append(float(row[c]) if row[c] != "" else math.nan)
    a = {c: np.asarray(v, dtype=float) for c, v in cols.items()}
    return Report(a["t"], a["pos_err"], a["heading_err"], a["mean_gwd_rma"], a["mean_gwd_efa"], {})


def report_json(report: Report) -> str:
    return json.dumps(report.summary, indent=2, sort_keys=True) + "\n"


def write_svg(report: Report, path) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    with matplotlib.rc_context({"svg.hashsalt": "rmslam", "svg.fonttype": "none"}):
        fig, axes = plt.subplots(2, 1, figsize=(7, 6), sharex=True)
        ax = axes[0]
        ax.plot(report.t, report.gwd_rma, color="tab:red", label="RMA")
        ax.plot(report.t, report.gwd_efa, color="tab:blue", label="EFA")
        ax.set_ylabel("GWD RMSE (m)")
        ax.legend(loc="upper right")
        ax.grid(True, alpha=0.3)
        ax = axes[1]
        ax.plot(report.t, report.pos_err, color="k", label="position (m)")
        ax2 = ax.twinx()
        ax2.plot(report.t, np.degrees(report.heading_err), color="tab:green", label="heading (deg)")
        ax.set_xlabel("time (s)")
        ax.set_ylabel("position RMSE (m)")
        ax2.set_ylabel("heading RMSE (deg)")
        ax.grid(True, alpha=0.3)
        fig.tight_layout()
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)


def export(report: Report, out_dir, formats=("csv", "json", "svg")) -> list[Path]:
    """Write ``series.csv``, ``summary.json`` and/or ``plots.svg`` into ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for fmt in formats:
        if fmt == "csv":
            p = out / "series.csv"
            p.write_text(report_csv(report), encoding="utf-8")
        elif fmt == "json":
            p = out / "summary.json"
            p.write_text(report_json(report), encoding="utf-8")
        elif fmt == "svg":
            p = out / "plots.svg"
            write_svg(report, p)
        else:
            raise ValueError(f"unknown export format {fmt!r}")
        written.append(p)
    return written
