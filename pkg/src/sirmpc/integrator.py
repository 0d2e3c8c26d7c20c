"""Fixed-step RK4 integration: the sampled map and dense reference trajectories."""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field as dc_field
from typing import Sequence

import numpy as np

from .errors import IntegrationError
from .model import EpidemicState, ModelParams, effective_r, field, input_for_r

NEGATIVE_TOL = 1e-12


@dataclass(frozen=True)
class SamplingConfig:
    """Sampling interval and step sizes.

    Parameters
    ----------
    ts : float
        Sampling interval of the discrete-time map.
    substeps : int
        RK4 sub-intervals per sample in the prediction map.
    dense_step : float, optional
        Step of the reference integrator, defaults to ``ts / 64``.
    """

    ts: float = 0.5
    substeps: int = 8
    dense_step: float | None = None

    def __post_init__(self):
        if self.dense_step is None:
            object.__setattr__(self, "dense_step", self.ts / 64)
        if not (math.isfinite(self.ts) and self.ts > 0):
            raise ValueError(f"ts={self.ts!r} must be positive")
        if int(self.substeps) != self.substeps or self.substeps < 1:
            raise ValueError(f"substeps={self.substeps!r} must be an integer >= 1")
        if not 0 < self.dense_step <= self.ts:
            raise ValueError(f"dense_step={self.dense_step!r} must lie in (0, ts]")

    @property
    def h(self) -> float:
        """RK4 step used inside one sample."""
        return self.ts / self.substeps


def rk4_raw(s, i, c, r, h):
    """One classic RK4 step on floats or equally-shaped arrays, no checks."""
    a1, b1, c1 = field(s, i, r)
    a2, b2, c2 = field(s + 0.5 * h * a1, i + 0.5 * h * b1, r)
    a3, b3, c3 = field(s + 0.5 * h * a2, i + 0.5 * h * b2, r)
    a4, b4, c4 = field(s + h * a3, i + h * b3, r)
    w = h / 6.0
    return (
        s + w * (a1 + 2.0 * a2 + 2.0 * a3 + a4),
        i + w * (b1 + 2.0 * b2 + 2.0 * b3 + b4),
        c + w * (c1 + 2.0 * c2 + 2.0 * c3 + c4),
    )


def advance_raw(s, i, c, r, h, n):
    """Apply :func:`rk4_raw` ``n`` times with a constant ``r``."""
    for _ in range(n):
        s, i, c = rk4_raw(s, i, c, r, h)
    return s, i, c


def _admissible(s, i, c, time):
    out = []
    for name, v in (("S", s), ("I", i), ("C", c)):
        if v < 0.0:
            if v < -NEGATIVE_TOL:
                raise IntegrationError(f"{name} became negative ({v:.3e}); step too large", time)
            v = 0.0
        out.append(v)
    return out


def rk4_step(state: EpidemicState, r_effective: float, h: float, time: float | None = None) -> EpidemicState:
    """Advance ``state`` by one RK4 step of size ``h``.

    Components that come out negative by less than 1e-12 are clamped to
    zero; anything more negative raises :class:`IntegrationError`.
    """
    if not h > 0:
        raise ValueError(f"step size h={h!r} must be positive")
    s, i, c = _admissible(*rk4_raw(state.s, state.i, state.c, r_effective, h), time)
    return EpidemicState(s, i, c)


def sample_map(state: EpidemicState, u: float, params: ModelParams, cfg: SamplingConfig) -> EpidemicState:
    """Discrete-time map ``x_{k+1} = F(x_k, u_k)`` over one sampling interval."""
    r = effective_r(params, u)
    s, i, c = advance_raw(state.s, state.i, state.c, r, cfg.h, cfg.substeps)
    return EpidemicState(*_admissible(s, i, c, None))


class Schedule:
    """Piecewise-constant reproduction number over time.

    ``values[k]`` holds on ``[breaks[k-1], breaks[k])`` with the first value
    extending to minus infinity and the last to plus infinity.
    """

    def __init__(self, breaks: Sequence[float], values: Sequence[float]):
        breaks = [float(b) for b in breaks]
        values = [float(v) for v in values]
        if len(values) != len(breaks) + 1:
            raise ValueError("need exactly one more value than breakpoints")
        if any(b2 <= b1 for b1, b2 in zip(breaks, breaks[1:])):
            raise ValueError("breakpoints must be strictly increasing")
        if any(not v > 0 for v in values):
            raise ValueError("reproduction numbers must be positive")
        self.breaks = tuple(breaks)
        self.values = tuple(values)

    @classmethod
    def constant(cls, r: float) -> "Schedule":
        return cls((), (r,))

    @classmethod
    def from_inputs(cls, params: ModelParams, breaks: Sequence[float], inputs: Sequence[float]) -> "Schedule":
        """Schedule induced by piecewise-constant distancing inputs ``u``."""
        return cls(breaks, [effective_r(params, u) for u in inputs])

    @classmethod
    def interval(cls, r_outside: float, r_inside: float, t_start: float, t_end: float) -> "Schedule":
        return cls((t_start, t_end), (r_outside, r_inside, r_outside))

    def __call__(self, t: float) -> float:
        return self.values[bisect.bisect_right(self.breaks, t)]

    def segments(self, t0: float, t1: float):
        """Yield ``(a, b, r)`` constant pieces covering ``[t0, t1]``."""
        cuts = [t0] + [b for b in self.breaks if t0 < b < t1] + [t1]
        for a, b in zip(cuts, cuts[1:]):
            if b > a:
                yield a, b, self(a)

    def __repr__(self):
        return f"Schedule(breaks={self.breaks}, values={self.values})"


@dataclass
class Trajectory:
    """Time-indexed states with the reproduction number applied from each record on.

    ``r[k]`` and ``u[k]`` are the values in force on ``[tau[k], tau[k+1])``;
    the last entry repeats the value at the final time.
    """

    tau: np.ndarray
    s: np.ndarray
    i: np.ndarray
    c: np.ndarray
    r: np.ndarray
    u: np.ndarray
    meta: dict = dc_field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.tau)

    @property
    def terminal(self) -> EpidemicState:
        return EpidemicState(float(self.s[-1]), float(self.i[-1]), float(self.c[-1]))

    def state_at(self, k: int) -> EpidemicState:
        return EpidemicState(float(self.s[k]), float(self.i[k]), float(self.c[k]))

    def conservation_error(self) -> float:
        """Largest ``|S + I + C - 1|`` over all records."""
        return float(np.max(np.abs(self.s + self.i + self.c - 1.0)))

    @classmethod
    def concatenate(cls, parts: Sequence["Trajectory"]) -> "Trajectory":
        """Join parts where each one starts at the previous part's last record."""
        keys = ("tau", "s", "i", "c", "r", "u")
        return cls(**{
            k: np.concatenate([getattr(p, k)[:-1] for p in parts[:-1]] + [getattr(parts[-1], k)])
            for k in keys
        })


def dense_trajectory(
    state0: EpidemicState,
    schedule: Schedule,
    params: ModelParams,
    cfg: SamplingConfig,
    t_end: float,
    t0: float = 0.0,
) -> Trajectory:
    """Reference trajectory by small-step RK4, recorded at every step.

    Each constant piece of ``schedule`` is integrated with an integer number
    of equal steps no longer than ``cfg.dense_step``, so switching instants
    fall exactly on records.
    """
    if t_end < t0:
        raise ValueError(f"t_end={t_end!r} precedes start time {t0!r}")
    tau, S, I, C, R = [t0], [state0.s], [state0.i], [state0.c], [schedule(t0)]
    s, i, c = state0.as_tuple()
    for a, b, r in schedule.segments(t0, t_end):
        n = max(1, math.ceil((b - a) / cfg.dense_step - 1e-9))
        h = (b - a) / n
        R[-1] = r
        for k in range(1, n + 1):
            s, i, c = rk4_raw(s, i, c, r, h)
            if s < 0.0 or i < 0.0 or c < 0.0:
                s, i, c = _admissible(s, i, c, a + k * h)
            tau.append(b if k == n else a + k * h)
            S.append(s)
            I.append(i)
            C.append(c)
            R.append(r)
    R[-1] = schedule(t_end)
    R = np.asarray(R)
    return Trajectory(
        tau=np.asarray(tau),
        s=np.asarray(S),
        i=np.asarray(I),
        c=np.asarray(C),
        r=R,
        u=input_for_r(params, R),
    )
