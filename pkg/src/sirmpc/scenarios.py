"""Scenario execution: trajectories, sweeps and their CSV and text outputs."""

from __future__ import annotations

import contextlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .analysis import (
    detect_events,
    herd_immunity,
    herd_immunity_arrival,
    s_infinity,
)
from .config import ScenarioConfig
from .errors import ConfigError, NumericFailure, SirMpcError
from .integrator import SamplingConfig, Schedule, Trajectory, dense_trajectory
from .model import EpidemicState, ModelParams
from .mpc import closed_loop
from .single_interval import SingleInterval, optimal_ri, quasi_optimal_interval

TRAJECTORY_COLUMNS = ("tau", "S", "I", "C", "u", "R_effective")


def fmt(x) -> str:
    """Round-trip decimal text for a float (17 significant digits)."""
    return format(float(x), ".17g")


def _fmt_opt(x) -> str:
    return "none" if x is None else fmt(x)


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence[float]]) -> None:
    lines = [",".join(header)]
    lines.extend(",".join(fmt(v) for v in row) for row in rows)
    path.write_text("\n".join(lines) + "\n")


def write_trajectory(path: Path, traj: Trajectory) -> None:
    write_csv(path, TRAJECTORY_COLUMNS, zip(traj.tau, traj.s, traj.i, traj.c, traj.u, traj.r))


def distancing_duration(traj: Trajectory, tol: float = 1e-12) -> float:
    """Total time during which the applied input is nonzero."""
    if len(traj) < 2:
        return 0.0
    dt = np.diff(traj.tau)
    return float(np.sum(dt[traj.u[:-1] > tol]))


@contextlib.contextmanager
def stage(module: str):
    """Re-raise numerical errors as :class:`NumericFailure` tagged with ``module``."""
    try:
        yield
    except ConfigError:
        raise
    except (SirMpcError, ArithmeticError, ValueError) as exc:
        raise NumericFailure(module, exc) from exc


@dataclass
class ScenarioResult:
    """Outputs of one scenario run."""

    kind: str
    files: list[Path]
    summary: dict[str, str] = field(default_factory=dict)
    trajectory: Optional[Trajectory] = None


def _events_summary(
    traj: Trajectory,
    params: ModelParams,
    release: Optional[float],
    qss: float,
    duration: Optional[float] = None,
) -> dict[str, str]:
    s_star = herd_immunity(params.r0)
    ev = detect_events(traj, release_time=release, qss_threshold=qss)
    peaks = "; ".join(f"{fmt(t)} {fmt(i)}" for t, i in ev.peaks) or "none"
    sw = "none" if ev.second_wave is None else f"{fmt(ev.second_wave[0])} {fmt(ev.second_wave[1])}"
    return {
        "peaks": peaks,
        "qss_time": _fmt_opt(ev.qss_time),
        "second_wave": sw,
        "distancing_duration": fmt(distancing_duration(traj) if duration is None else duration),
        "release_time": _fmt_opt(release),
        "herd_immunity_time": _fmt_opt(herd_immunity_arrival(traj, s_star, qss)),
        "max_I": fmt(traj.i.max()),
        "terminal_S": fmt(traj.s[-1]),
        "terminal_I": fmt(traj.i[-1]),
        "S_star": fmt(s_star),
    }


def _write_events(path: Path, kind: str, summary: dict[str, str]) -> None:
    lines = [f"kind: {kind}"] + [f"{k}: {v}" for k, v in summary.items()]
    path.write_text("\n".join(lines) + "\n")


def _interval_run(cfg: ScenarioConfig, interval: SingleInterval) -> Trajectory:
    with stage("integrator"):
        return dense_trajectory(cfg.params.initial_state(), interval.schedule(cfg.params), cfg.params, cfg.sampling, cfg.t_end)


def phase_portrait(
    params: ModelParams,
    starts: Sequence[EpidemicState],
    t_end: float,
    cfg: Optional[SamplingConfig] = None,
) -> list[Trajectory]:
    """Uncontrolled trajectories under ``r0`` from each start state."""
    cfg = cfg or SamplingConfig()
    schedule = Schedule.constant(params.r0)
    return [dense_trajectory(x, schedule, params, cfg, t_end) for x in starts]


def s_infinity_sweep(
    r: float,
    i0_values: Sequence[float],
    s0_values: Sequence[float],
) -> np.ndarray:
    """Final susceptible fraction over a grid; rows follow ``i0_values``.

    Grid points off the simplex (``s0 + i0 > 1``) are NaN.
    """
    out = np.full((len(i0_values), len(s0_values)), np.nan)
    for a, i0 in enumerate(i0_values):
        for b, s0 in enumerate(s0_values):
            if s0 + i0 <= 1.0:
                out[a, b] = s_infinity(s0, i0, r)
    return out


def run_scenario(cfg: ScenarioConfig, out_dir: str | Path) -> ScenarioResult:
    """Run a scenario and write its outputs to ``out_dir``.

    Trajectory kinds write ``trajectory.csv``; the phase portrait writes
    ``portrait.csv`` and the sweep ``sweep.csv``. Every kind writes
    ``events.txt``. Output depends only on ``cfg``.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    params, qss = cfg.params, cfg.qss_threshold
    kind = cfg.kind
    summary: dict[str, str] = {}
    traj: Optional[Trajectory] = None
    files: list[Path] = []

    if kind == "uncontrolled":
        with stage("integrator"):
            traj = dense_trajectory(params.initial_state(), Schedule.constant(params.r0), params, cfg.sampling, cfg.t_end)
        summary = _events_summary(traj, params, None, qss)

    elif kind == "single-interval":
        traj = _interval_run(cfg, cfg.interval)
        release = min(cfg.interval.t_end, cfg.t_end)
        summary = _events_summary(traj, params, release if cfg.t_end > cfg.interval.t_start else None, qss)
        summary["r_i"] = fmt(cfg.interval.r_i)
        summary["r_i_realizable"] = str(cfg.interval.realizable(params)).lower()

    elif kind == "optimal-interval":
        with stage("single-interval"):
            opt = optimal_ri(params, cfg.interval_start, cfg.sampling)
            interval = quasi_optimal_interval(params, cfg.interval_start, cfg.sampling, cfg.release_threshold)
        traj = _interval_run(cfg, interval)
        release = min(interval.t_end, cfg.t_end)
        summary = _events_summary(traj, params, release if cfg.t_end > interval.t_start else None, qss)
        summary["r_i"] = fmt(opt.r_i)
        summary["r_i_residual"] = fmt(opt.residual)
        summary["r_i_realizable"] = str(opt.realizable).lower()
        summary["intervention_unnecessary"] = str(opt.unnecessary).lower()
        summary["interval"] = f"{fmt(interval.t_start)} {fmt(interval.t_end)}"

    elif kind == "mpc":
        if cfg.t_end <= cfg.control_start:
            with stage("integrator"):
                traj = dense_trajectory(params.initial_state(), Schedule.constant(params.r0), params, cfg.sampling, cfg.t_end)
            summary = _events_summary(traj, params, None, qss)
        else:
            with stage("mpc"):
                res = closed_loop(params, cfg.mpc, cfg.control_start, cfg.t_end)
            traj = res.trajectory
            release = res.release_time
            summary = _events_summary(
                traj, params, cfg.control_start if release is None else release, qss, res.distancing_duration
            )
            summary["release_time"] = _fmt_opt(release)
            summary["inputs"] = " ".join(format(u, "g") for u in res.inputs)
            summary["all_feasible"] = str(bool(res.feasible.all())).lower()

    elif kind == "phase-portrait":
        with stage("integrator"):
            trajs = phase_portrait(params, cfg.starts, cfg.t_end, cfg.sampling)
        path = out / "portrait.csv"
        rows = (
            (k, t, s, i, c)
            for k, tr in enumerate(trajs)
            for t, s, i, c in zip(tr.tau, tr.s, tr.i, tr.c)
        )
        write_csv(path, ("start", "tau", "S", "I", "C"), rows)
        files.append(path)
        s_star = herd_immunity(params.r0)
        summary["S_star"] = fmt(s_star)
        for k, tr in enumerate(trajs):
            settled = tr.i[-1] < qss and tr.s[-1] <= s_star + 5e-3
            summary[f"start_{k}"] = (
                f"{fmt(tr.s[0])} {fmt(tr.i[0])} {fmt(tr.c[0])} -> "
                f"{fmt(tr.s[-1])} {fmt(tr.i[-1])} settled={str(settled).lower()}"
            )

    elif kind == "s-infinity-sweep":
        s0 = np.linspace(cfg.sweep_s0[0], cfg.sweep_s0[1], cfg.sweep_points)
        with stage("analysis"):
            table = s_infinity_sweep(params.r0, cfg.sweep_i0, s0)
        path = out / "sweep.csv"
        rows = (
            (i0, s, v)
            for i0, row in zip(cfg.sweep_i0, table)
            for s, v in zip(s0, row)
            if not np.isnan(v)
        )
        write_csv(path, ("i0", "s0", "s_inf"), rows)
        files.append(path)
        summary["S_star"] = fmt(herd_immunity(params.r0))
        summary["r"] = fmt(params.r0)
        summary["rows"] = str(len(cfg.sweep_i0))

    else:  # pragma: no cover - kinds are validated on parse
        raise ConfigError(f"unknown kind {kind!r}")

    if traj is not None:
        if len(traj) == 1:
            summary = {"terminal_S": fmt(traj.s[-1]), "S_star": fmt(herd_immunity(params.r0))}
        path = out / "trajectory.csv"
        write_trajectory(path, traj)
        files.append(path)
    events = out / "events.txt"
    _write_events(events, kind, summary)
    files.append(events)
    return ScenarioResult(kind, files, summary, traj)
