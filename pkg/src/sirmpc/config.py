"""Flat ``key = value`` scenario configuration.

Blank lines and text after ``#`` are ignored. Every key may appear at most
once and unknown keys are rejected. Times are in non-dimensional units
(multiples of the mean infectious period); fractions are of the total
population.

Schema
------
kind               uncontrolled | single-interval | optimal-interval | mpc
                   | phase-portrait | s-infinity-sweep
r0                 reproduction number without distancing          [-]
r_min              reproduction number at full distancing          [-]
epsilon            initial infected fraction                       [-]
t_end              simulation horizon                              [time]
ts                 sampling interval                               [time]
substeps           RK4 steps per sampling interval                 [-]
dense_step         reference integrator step (default ts/64)       [time]
qss_threshold      I below which the epidemic counts as over       [-]
interval_start     single-interval start                           [time]
interval_end       single-interval end                             [time]
r_i                reproduction number inside the interval         [-]
release_threshold  optimal-interval: I at which distancing ends    [-]
horizon_n          prediction horizon in samples                   [-]
weight_q           stage weight on (S - S*)^2                      [-]
weight_u           stage weight on u^2                             [-]
weight_p           terminal weight on |S_N - S*|                   [-]
i_max              infected cap, or "none"                         [-]
slack_weight       penalty on squared cap violation                [-]
grid               comma-separated input levels in [0, 1]          [-]
control_start      time the controller takes over                  [time]
starts             phase portrait starts "s i c; s i c; ..."       [-]
sweep_i0           comma-separated initial infected fractions      [-]
sweep_s0_min       smallest initial susceptible fraction           [-]
sweep_s0_max       largest initial susceptible fraction            [-]
sweep_points       number of s0 values per row                     [-]
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .errors import ConfigError
from .integrator import SamplingConfig
from .model import ControlGrid, EpidemicState, ModelParams
from .mpc import MpcConfig
from .single_interval import SingleInterval

KINDS = (
    "uncontrolled",
    "single-interval",
    "optimal-interval",
    "mpc",
    "phase-portrait",
    "s-infinity-sweep",
)

_FLOAT_KEYS = {
    "r0", "r_min", "epsilon", "t_end", "ts", "dense_step", "qss_threshold",
    "interval_start", "interval_end", "r_i", "release_threshold",
    "weight_q", "weight_u", "weight_p", "slack_weight", "control_start",
    "sweep_s0_min", "sweep_s0_max",
}
_INT_KEYS = {"substeps", "horizon_n", "sweep_points"}
_OTHER_KEYS = {"kind", "i_max", "grid", "starts", "sweep_i0"}
KNOWN_KEYS = _FLOAT_KEYS | _INT_KEYS | _OTHER_KEYS

_REQUIRED = {
    "single-interval": ("interval_start", "interval_end", "r_i"),
    "optimal-interval": ("interval_start",),
    "phase-portrait": ("starts",),
    "s-infinity-sweep": ("sweep_i0",),
}

_LINE = re.compile(r"^([A-Za-z_][A-Za-z0-9_]*)\s*=\s*(.*)$")


@dataclass
class ScenarioConfig:
    """Validated scenario description."""

    kind: str
    params: ModelParams = field(default_factory=ModelParams)
    sampling: SamplingConfig = field(default_factory=SamplingConfig)
    t_end: float = 30.0
    qss_threshold: float = 1e-4
    mpc: Optional[MpcConfig] = None
    control_start: float = 2.0
    interval: Optional[SingleInterval] = None
    interval_start: Optional[float] = None
    release_threshold: float = 1e-4
    starts: tuple[EpidemicState, ...] = ()
    sweep_i0: tuple[float, ...] = ()
    sweep_s0: tuple[float, float] = (0.0, 1.0)
    sweep_points: int = 101


def _parse_float(text: str, key: str, line: int) -> float:
    try:
        v = float(text)
    except ValueError:
        raise ConfigError(f"{key}: expected a number, got {text!r}", line) from None
    if not math.isfinite(v):
        raise ConfigError(f"{key}: value must be finite", line)
    return v


def _parse_int(text: str, key: str, line: int) -> int:
    try:
        return int(text)
    except ValueError:
        raise ConfigError(f"{key}: expected an integer, got {text!r}", line) from None


def _parse_list(text: str, key: str, line: int) -> tuple[float, ...]:
    items = [p.strip() for p in text.split(",") if p.strip()]
    if not items:
        raise ConfigError(f"{key}: empty list", line)
    return tuple(_parse_float(p, key, line) for p in items)


def read_pairs(text: str) -> dict[str, tuple[str, int]]:
    """Raw ``key -> (value, line number)`` mapping."""
    pairs: dict[str, tuple[str, int]] = {}
    for n, raw in enumerate(text.splitlines(), start=1):
        body = raw.split("#", 1)[0].strip()
        if not body:
            continue
        m = _LINE.match(body)
        if m is None:
            raise ConfigError(f"expected 'key = value', got {body!r}", n)
        key, value = m.group(1), m.group(2).strip()
        if key not in KNOWN_KEYS:
            raise ConfigError(f"unknown key {key!r}", n)
        if key in pairs:
            raise ConfigError(f"duplicate key {key!r} (first on line {pairs[key][1]})", n)
        if not value:
            raise ConfigError(f"{key}: missing value", n)
        pairs[key] = (value, n)
    return pairs


def parse_config(text: str, kind: Optional[str] = None) -> ScenarioConfig:
    """Parse and validate configuration text.

    ``kind`` supplies the scenario kind when the text has none; if both are
    present they must agree.
    """
    pairs = read_pairs(text)
    vals: dict[str, object] = {}
    for key, (raw, n) in pairs.items():
        if key in _FLOAT_KEYS:
            vals[key] = _parse_float(raw, key, n)
        elif key in _INT_KEYS:
            vals[key] = _parse_int(raw, key, n)
        else:
            vals[key] = raw

    def line_of(*keys):
        found = [pairs[k][1] for k in keys if k in pairs]
        return min(found) if found else None

    file_kind = vals.get("kind")
    if file_kind is not None and file_kind not in KINDS:
        raise ConfigError(f"kind: unknown scenario kind {file_kind!r}", line_of("kind"))
    if kind is not None and file_kind is not None and kind != file_kind:
        raise ConfigError(f"config is for {file_kind!r}, not {kind!r}", line_of("kind"))
    kind = kind or file_kind
    if kind is None:
        raise ConfigError("no scenario kind given")
    for key in _REQUIRED.get(kind, ()):
        if key not in vals:
            raise ConfigError(f"kind {kind!r} requires key {key!r}")

    def build(keys, factory):
        try:
            return factory()
        except ValueError as exc:
            raise ConfigError(str(exc), line_of(*keys)) from None

    params = build(
        ("r0", "r_min", "epsilon"),
        lambda: ModelParams(**{k: vals[k] for k in ("r0", "r_min", "epsilon") if k in vals}),
    )
    sampling = build(
        ("ts", "substeps", "dense_step"),
        lambda: SamplingConfig(**{k: vals[k] for k in ("ts", "substeps", "dense_step") if k in vals}),
    )
    cfg = ScenarioConfig(kind=kind, params=params, sampling=sampling)

    for key in ("t_end", "qss_threshold", "control_start", "release_threshold"):
        if key in vals:
            setattr(cfg, key, vals[key])
    if cfg.t_end < 0:
        raise ConfigError("t_end must be non-negative", line_of("t_end"))
    if not 0 < cfg.qss_threshold < 1:
        raise ConfigError("qss_threshold must lie in (0, 1)", line_of("qss_threshold"))
    if not 0 < cfg.release_threshold < 1:
        raise ConfigError("release_threshold must lie in (0, 1)", line_of("release_threshold"))
    if cfg.control_start < 0:
        raise ConfigError("control_start must be non-negative", line_of("control_start"))

    if kind == "single-interval":
        cfg.interval = build(
            ("interval_start", "interval_end", "r_i"),
            lambda: SingleInterval(vals["interval_start"], vals["interval_end"], vals["r_i"]),
        )
    if kind == "optimal-interval":
        cfg.interval_start = vals["interval_start"]
        if cfg.interval_start < 0:
            raise ConfigError("interval_start must be non-negative", line_of("interval_start"))

    mpc_keys = ("horizon_n", "weight_q", "weight_u", "weight_p", "slack_weight", "i_max", "grid")
    if kind == "mpc":
        kw = {k: vals[k] for k in mpc_keys[:5] if k in vals}
        if "i_max" in vals:
            raw = str(vals["i_max"]).strip().lower()
            kw["i_max"] = None if raw == "none" else _parse_float(raw, "i_max", line_of("i_max"))
        if "grid" in vals:
            levels = _parse_list(str(vals["grid"]), "grid", line_of("grid"))
            kw["grid"] = build(("grid",), lambda: ControlGrid(levels))
        cfg.mpc = build(mpc_keys, lambda: MpcConfig(sampling=sampling, **kw))
    else:
        stray = [k for k in mpc_keys if k in vals]
        if stray:
            raise ConfigError(f"key {stray[0]!r} only applies to kind 'mpc'", line_of(stray[0]))

    if "starts" in vals:
        n = line_of("starts")
        starts = []
        for chunk in str(vals["starts"]).split(";"):
            nums = chunk.split()
            if not nums:
                continue
            if len(nums) != 3:
                raise ConfigError(f"starts: each start needs three fractions, got {chunk.strip()!r}", n)
            s, i, c = (_parse_float(x, "starts", n) for x in nums)
            starts.append(build(("starts",), lambda: EpidemicState(s, i, c)))
        if not starts:
            raise ConfigError("starts: no start states", n)
        cfg.starts = tuple(starts)

    if "sweep_i0" in vals:
        cfg.sweep_i0 = _parse_list(str(vals["sweep_i0"]), "sweep_i0", line_of("sweep_i0"))
    lo = vals.get("sweep_s0_min", 0.0)
    hi = vals.get("sweep_s0_max", 1.0)
    if not 0.0 <= lo < hi <= 1.0:
        raise ConfigError("need 0 <= sweep_s0_min < sweep_s0_max <= 1", line_of("sweep_s0_min", "sweep_s0_max"))
    cfg.sweep_s0 = (lo, hi)
    if "sweep_points" in vals:
        if vals["sweep_points"] < 2:
            raise ConfigError("sweep_points must be at least 2", line_of("sweep_points"))
        cfg.sweep_points = vals["sweep_points"]
    return cfg


def load_config(path: str | Path, kind: Optional[str] = None) -> ScenarioConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    return parse_config(text, kind)


PRESET_DIR = Path(__file__).with_name("presets")


def preset_names() -> list[str]:
    return sorted(p.stem for p in PRESET_DIR.glob("*.cfg"))


def preset_path(name: str) -> Path:
    path = PRESET_DIR / f"{name}.cfg"
    if not path.is_file():
        raise ConfigError(f"unknown preset {name!r}; available: {', '.join(preset_names())}")
    return path
