"""Run configuration and its flat ``key = value`` file format.

Every key names a field of :class:`SimConfig`, :class:`SlamConfig` or
:class:`RunConfig` itself. Noise keys that both the simulator and the filter
use (``sigma_range``, ``sigma_azimuth_deg``, ``sigma_v``, ``sigma_omega_deg``,
``max_range``, ``fov_deg``) set both, so the filter's noise model matches the
simulated sensor unless a ``filter_`` prefixed key overrides the filter side.
Blank lines and ``#`` comments are ignored.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any

from .simulator import SimConfig
from .slam import Estimator, SlamConfig

_SIM_KEYS = {f.name: f for f in fields(SimConfig)}
_SLAM_KEYS = {f.name: f for f in fields(SlamConfig)}
_FILTER_PREFIX = "filter_"
_IO_KEYS = ("out", "workers")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    sim: SimConfig = field(default_factory=SimConfig)
    slam: SlamConfig = field(default_factory=SlamConfig)
    trials: int = 1
    seed: int = 0
    out: str = "out"
    workers: int = 1
    match_cap: float = 5.0
    steady_burn_in: int = 100

    def __post_init__(self) -> None:
        if self.trials < 1:
            raise ConfigError(f"trials must be >= 1, got {self.trials}")
        if self.slam.n_init < 3:
            raise ConfigError(f"n_init must be >= 3, got {self.slam.n_init}")
        if self.steady_burn_in < 0:
            raise ConfigError(f"steady_burn_in must be >= 0, got {self.steady_burn_in}")
        if self.workers < 1:
            raise ConfigError(f"workers must be >= 1, got {self.workers}")

    def with_overrides(self, **kv: Any) -> "RunConfig":
        return apply_overrides(self, kv)

    def flat(self, include_io: bool = True) -> dict[str, Any]:
        """Every parameter as one flat mapping.

        ``include_io=False`` drops keys that cannot change results (output
        path, worker count), which is what summaries echo.
        """
        out: dict[str, Any] = {}
        for f in fields(self):
            if f.name in ("sim", "slam") or (not include_io and f.name in _IO_KEYS):
                continue
            out[f.name] = getattr(self, f.name)
        out.update(dataclasses.asdict(self.sim))
        for k, v in dataclasses.asdict(self.slam).items():
            if k not in _SIM_KEYS:
                out[k] = v
            elif getattr(self.sim, k) != v:
                out[_FILTER_PREFIX + k] = v
        return out


_RUN_KEYS = {f.name: f for f in fields(RunConfig) if f.name not in ("sim", "slam")}


def _convert(raw: Any, typ: Any, key: str) -> Any:
    t = typ if isinstance(typ, str) else getattr(typ, "__name__", str(typ))
    if not isinstance(raw, str):
        return raw
    text = raw.strip()
    try:
        if t == "bool":
            low = text.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(text)
        if t == "int":
            return int(text)
        if t == "float":
            return float(text)
        return text
    except ValueError:
        raise ConfigError(f"bad value for {key!r}: {raw!r} (expected {t})") from None


def apply_overrides(cfg: RunConfig, kv: dict[str, Any]) -> RunConfig:
    """Return ``cfg`` with flat-key overrides applied (strings are parsed)."""
    sim_kw: dict[str, Any] = {}
    slam_kw: dict[str, Any] = {}
    run_kw: dict[str, Any] = {}
    filter_kw: dict[str, Any] = {}
    for key, raw in kv.items():
        key = key.strip().replace("-", "_")
        matched = False
        if key.startswith(_FILTER_PREFIX) and key[len(_FILTER_PREFIX) :] in _SLAM_KEYS:
            name = key[len(_FILTER_PREFIX) :]
            filter_kw[name] = _convert(raw, _SLAM_KEYS[name].type, key)
            continue
        if key in _SIM_KEYS:
            sim_kw[key] = _convert(raw, _SIM_KEYS[key].type, key)
            matched = True
        if key in _SLAM_KEYS:
            slam_kw[key] = _convert(raw, _SLAM_KEYS[key].type, key)
            matched = True
        if key in _RUN_KEYS:
            run_kw[key] = _convert(raw, _RUN_KEYS[key].type, key)
            matched = True
        if not matched:
            raise ConfigError(f"unknown config key {key!r}")
    slam_kw.update(filter_kw)
    if "estimator" in slam_kw:
        try:
            Estimator(slam_kw["estimator"])
        except ValueError:
            raise ConfigError(f"estimator must be rma, efa or both, got {slam_kw['estimator']!r}") from None
    try:
        return replace(cfg, sim=replace(cfg.sim, **sim_kw), slam=replace(cfg.slam, **slam_kw), **run_kw)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def parse_config_text(text: str, source: str = "<config>") -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {line!r}")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def load_config(path, base: RunConfig | None = None) -> RunConfig:
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {p}: {exc}") from None
    return apply_overrides(base or RunConfig(), parse_config_text(text, str(p)))


def dump_config(cfg: RunConfig) -> str:
    lines = [f"{k} = {v}" for k, v in cfg.flat().items()]
    return "\n".join(lines) + "\n"
