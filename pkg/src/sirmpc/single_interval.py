"""Single-interval distancing policies and the quasi-optimal reduced reproduction number."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

from scipy.optimize import bisect

from .analysis import QSS_THRESHOLD, herd_immunity, qss_entry_index, s_infinity
from .errors import InfeasibleInterventionError, InsufficientHorizonError
from .integrator import SamplingConfig, Schedule, Trajectory, dense_trajectory
from .model import EpidemicState, ModelParams

R_LOWER = 1e-6
RESIDUAL_TOL = 1e-9


@dataclass(frozen=True)
class SingleInterval:
    """Reproduction number ``r_i`` held on ``[t_start, t_end)``, ``r0`` elsewhere."""

    t_start: float
    t_end: float
    r_i: float

    def __post_init__(self):
        if not 0.0 <= self.t_start < self.t_end:
            raise ValueError(f"need 0 <= t_start < t_end, got ({self.t_start}, {self.t_end})")
        if not self.r_i > 0:
            raise ValueError(f"r_i={self.r_i!r} must be positive")

    def realizable(self, params: ModelParams) -> bool:
        return params.r_min <= self.r_i <= params.r0

    def schedule(self, params: ModelParams) -> Schedule:
        return Schedule.interval(params.r0, self.r_i, self.t_start, self.t_end)


def simulate_single_interval(
    params: ModelParams,
    interval: SingleInterval,
    cfg: SamplingConfig,
    t_end_sim: float,
) -> Trajectory:
    """Dense trajectory from the outbreak state under a single interval."""
    if t_end_sim <= interval.t_end:
        raise ValueError("simulation must extend past the end of the interval")
    return dense_trajectory(params.initial_state(), interval.schedule(params), params, cfg, t_end_sim)


@dataclass(frozen=True)
class QuasiOptimalRi:
    """Result of :func:`optimal_ri`.

    ``unnecessary`` is set when the start state already lies at or below
    the threshold, in which case ``r_i`` is just ``r0``.
    """

    r_i: float
    start_state: EpidemicState
    residual: float
    unnecessary: bool = False
    realizable: bool = True

    def __float__(self):
        return self.r_i


def optimal_ri_from_state(state: EpidemicState, params: ModelParams) -> QuasiOptimalRi:
    """Reduced reproduction number whose final size from ``state`` is the ``r0`` threshold.

    Solved by bisection on ``(R_LOWER, r0]``, where the final susceptible
    fraction decreases with the reproduction number.
    """
    target = herd_immunity(params.r0)
    s, i = state.s, state.i

    def excess(r):
        return s_infinity(s, i, r) - target

    if s <= target:
        return QuasiOptimalRi(params.r0, state, excess(params.r0), unnecessary=True)
    lo, hi = excess(R_LOWER), excess(params.r0)
    if hi == 0.0:
        root = params.r0
    else:
        if lo < 0.0 or hi > 0.0:
            raise InfeasibleInterventionError(
                f"no reduced reproduction number in ({R_LOWER:g}, {params.r0:g}] "
                f"reaches S*={target:.6g} from S={s:.6g}, I={i:.3g}"
            )
        root = bisect(excess, R_LOWER, params.r0, xtol=1e-15, maxiter=200)
    residual = excess(root)
    if abs(residual) > RESIDUAL_TOL:
        raise InfeasibleInterventionError(f"bisection stalled with residual {residual:.3e}")
    realizable = params.r_min <= root <= params.r0
    if not realizable:
        warnings.warn(
            f"quasi-optimal r_i={root:.6g} is below r_min={params.r_min:g}; not realizable",
            RuntimeWarning,
            stacklevel=3,
        )
    return QuasiOptimalRi(root, state, residual, realizable=realizable)


def optimal_ri(params: ModelParams, t_start: float, cfg: SamplingConfig) -> QuasiOptimalRi:
    """Quasi-optimal reduced reproduction number for an intervention starting at ``t_start``.

    The uncontrolled epidemic is simulated up to ``t_start``; the
    intervention must begin before the uncontrolled infection peak.
    """
    traj = dense_trajectory(params.initial_state(), Schedule.constant(params.r0), params, cfg, t_start)
    state = traj.terminal
    if params.r0 * state.s <= 1.0:
        raise ValueError(
            f"t_start={t_start:g} is not before the uncontrolled infection peak "
            f"(r0*S={params.r0 * state.s:.4g} <= 1)"
        )
    return optimal_ri_from_state(state, params)


def quasi_optimal_interval(
    params: ModelParams,
    t_start: float,
    cfg: SamplingConfig,
    qss_threshold: float = QSS_THRESHOLD,
    t_max: float = 500.0,
) -> SingleInterval:
    """Quasi-optimal interval: ``R_i^op`` held until I settles below ``qss_threshold``."""
    r_i = optimal_ri(params, t_start, cfg).r_i
    probe = SingleInterval(t_start, t_max, r_i)
    traj = dense_trajectory(params.initial_state(), probe.schedule(params), params, cfg, t_max)
    k = qss_entry_index(traj.i, qss_threshold)
    if k is None:
        raise InsufficientHorizonError(f"I did not settle below {qss_threshold:g} by tau={t_max:g}")
    return SingleInterval(t_start, max(float(traj.tau[k]), t_start + cfg.dense_step), r_i)
