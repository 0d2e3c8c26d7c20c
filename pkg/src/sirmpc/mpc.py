"""Switching nonlinear MPC over quantized distancing levels.

The finite-horizon problem is solved exactly by depth-first branch and
bound over the ``len(grid) ** horizon_n`` input sequences. The last few
tree levels below each surviving node are expanded as one numpy block.
Costs are accumulated in the same order on the scalar and vectorised
paths, so the returned sequence is bit-for-bit the lexicographically
smallest minimiser that brute-force enumeration finds.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .analysis import QSS_THRESHOLD, detect_events, herd_immunity, herd_immunity_arrival
from .errors import IntegrationError
from .integrator import SamplingConfig, Schedule, Trajectory, advance_raw, dense_trajectory
from .model import FIVE_LEVEL, ControlGrid, EpidemicState, ModelParams, effective_r

# A lower bound on future stages is only used when every RK4 stage value
# provably stays positive, which keeps S non-increasing under the map.
_MONOTONE_STEP = 0.5
_BOUND_MARGIN = 1e-6


@dataclass(frozen=True)
class MpcConfig:
    """Horizon, weights and constraint of the receding-horizon controller.

    Parameters
    ----------
    horizon_n : int
        Prediction horizon in samples.
    weight_q : float
        Stage penalty on ``(S - S*)**2``.
    weight_u : float
        Stage penalty on ``u**2``.
    weight_p : float
        Terminal penalty on ``|S_N - S*|``.
    i_max : float or None
        Cap on the predicted infected fraction; None leaves it unconstrained.
    slack_weight : float
        Penalty on squared cap violations.
    """

    horizon_n: int = 10
    weight_q: float = 1.0
    weight_u: float = 0.02
    weight_p: float = 50.0
    i_max: Optional[float] = None
    slack_weight: float = 1e6
    grid: ControlGrid = FIVE_LEVEL
    sampling: SamplingConfig = field(default_factory=SamplingConfig)

    def __post_init__(self):
        if int(self.horizon_n) != self.horizon_n or self.horizon_n < 1:
            raise ValueError(f"horizon_n={self.horizon_n!r} must be an integer >= 1")
        for name in ("weight_q", "weight_u", "weight_p"):
            if not getattr(self, name) >= 0:
                raise ValueError(f"{name} must be non-negative")
        if self.i_max is not None:
            if math.isinf(self.i_max):
                object.__setattr__(self, "i_max", None)
            elif not 0.0 < self.i_max <= 1.0:
                raise ValueError(f"i_max={self.i_max!r} outside (0, 1]")
            elif not self.slack_weight > 0:
                raise ValueError("slack_weight must be positive when i_max is set")

    @property
    def constrained(self) -> bool:
        return self.i_max is not None


@dataclass(frozen=True)
class MpcSolution:
    input_sequence: tuple[float, ...]
    cost: float
    feasible: bool
    nodes_explored: int


@dataclass(frozen=True)
class SequenceEvaluation:
    cost: float
    states: tuple[EpidemicState, ...]
    max_i: float
    slack: float

    @property
    def feasible(self) -> bool:
        return self.slack == 0.0


def _stage(s, i, u, s_star, cfg: MpcConfig):
    d = s - s_star
    cost = cfg.weight_q * d * d + cfg.weight_u * u * u
    if cfg.i_max is not None:
        v = np.maximum(i - cfg.i_max, 0.0)
        cost = cost + cfg.slack_weight * v * v
    return cost


def _violation(i, cfg: MpcConfig) -> float:
    if cfg.i_max is None:
        return 0.0
    v = max(i - cfg.i_max, 0.0)
    return v * v


def stage_cost(state: EpidemicState, u: float, s_star: float, cfg: MpcConfig) -> float:
    """``weight_q (S - s_star)**2 + weight_u u**2``."""
    d = state.s - s_star
    return cfg.weight_q * d * d + cfg.weight_u * u * u


def terminal_cost(s, s_star, cfg: MpcConfig):
    return cfg.weight_p * abs(s - s_star)


def evaluate_sequence(
    x0: EpidemicState,
    seq: Sequence[float],
    params: ModelParams,
    cfg: MpcConfig,
) -> SequenceEvaluation:
    """Roll the sampled model forward under ``seq`` and total the objective.

    The objective is the stage costs, a squared-slack penalty on
    ``I_j > i_max`` for ``j < N`` and the terminal term.
    """
    if len(seq) != cfg.horizon_n:
        raise ValueError(f"sequence length {len(seq)} != horizon {cfg.horizon_n}")
    s_star = herd_immunity(params.r0)
    h, n = cfg.sampling.h, cfg.sampling.substeps
    s, i, c = x0.as_tuple()
    states = [x0]
    total = 0.0
    slack = 0.0
    max_i = i
    for u in seq:
        total = total + float(_stage(s, i, u, s_star, cfg))
        slack += _violation(i, cfg)
        s, i, c = advance_raw(s, i, c, effective_r(params, u), h, n)
        if min(s, i, c) < -1e-12:
            raise IntegrationError("prediction left the state simplex")
        states.append(EpidemicState(max(s, 0.0), max(i, 0.0), max(c, 0.0)))
        max_i = max(max_i, i)
    total = total + terminal_cost(s, s_star, cfg)
    return SequenceEvaluation(total, tuple(states), max_i, slack)


def enumerate_minimum(x0: EpidemicState, params: ModelParams, cfg: MpcConfig) -> MpcSolution:
    """Brute-force minimiser over every grid sequence; ties go to the earliest in lexicographic order."""
    best_cost, best_seq, best_slack = math.inf, None, 0.0
    count = 0
    for seq in itertools.product(cfg.grid.levels, repeat=cfg.horizon_n):
        ev = evaluate_sequence(x0, seq, params, cfg)
        count += 1
        if ev.cost < best_cost:
            best_cost, best_seq, best_slack = ev.cost, seq, ev.slack
    return MpcSolution(tuple(best_seq), best_cost, best_slack == 0.0, count)


class _Search:
    """Mutable state of one branch-and-bound run."""

    def __init__(self, params: ModelParams, cfg: MpcConfig, block_depth: int):
        self.cfg = cfg
        self.params = params
        self.n = cfg.horizon_n
        self.levels = np.asarray(cfg.grid.levels)
        self.rs = [effective_r(params, u) for u in cfg.grid.levels]
        self.s_star = herd_immunity(params.r0)
        self.h = cfg.sampling.h
        self.substeps = cfg.sampling.substeps
        self.block = min(block_depth, self.n)
        self.use_future_bound = self.h * max(params.r0, 1.0) <= _MONOTONE_STEP
        self.best = math.inf
        self.best_seq: Optional[list[int]] = None
        # Until the search itself reaches a leaf, the incumbent may be a warm
        # start; an equal-cost sequence found earlier in lexicographic order
        # must still win, so pruning is strict.
        self.strict = False
        self.leaves = 0

    def pruned(self, bound) -> bool:
        return bound > self.best if self.strict else bound >= self.best

    def kept(self, bound):
        return bound <= self.best if self.strict else bound < self.best

    def bound(self, partial, s, i, depth):
        """Lower bound on any leaf cost below a node at ``depth``.

        The current stage without its input term is added in the same float
        order the leaves use, so that part is exact under monotone rounding.
        """
        lb = partial + _stage(s, i, 0.0, self.s_star, self.cfg)
        if self.use_future_bound:
            gap = np.maximum(self.s_star - s, 0.0)
            future = (self.n - depth - 1) * self.cfg.weight_q * gap * gap + self.cfg.weight_p * gap
            lb = lb + future * (1.0 - _BOUND_MARGIN)
        return lb

    def dfs(self, depth, s, i, c, partial, prefix):
        if depth == self.n - self.block:
            self.expand_block(s, i, c, partial, prefix)
            return
        for k, u in enumerate(self.cfg.grid.levels):
            p = partial + float(_stage(s, i, u, self.s_star, self.cfg))
            if self.pruned(p):
                continue
            s2, i2, c2 = advance_raw(s, i, c, self.rs[k], self.h, self.substeps)
            if depth + 1 < self.n and self.pruned(float(self.bound(p, s2, i2, depth + 1))):
                continue
            prefix.append(k)
            self.dfs(depth + 1, s2, i2, c2, p, prefix)
            prefix.pop()

    def expand_block(self, s, i, c, partial, prefix):
        L = len(self.levels)
        S, I, C = np.array([s]), np.array([i]), np.array([c])
        P = np.array([partial])
        code = np.zeros(1, dtype=np.int64)
        rs = np.asarray(self.rs)
        start = len(prefix)
        for j in range(self.block):
            m = len(S)
            S, I, C, P = (np.repeat(a, L) for a in (S, I, C, P))
            code = np.repeat(code, L) * L + np.tile(np.arange(L), m)
            U = np.tile(self.levels, m)
            R = np.tile(rs, m)
            P = P + _stage(S, I, U, self.s_star, self.cfg)
            keep = self.kept(P)
            S, I, C = advance_raw(S, I, C, R, self.h, self.substeps)
            depth = start + j + 1
            if depth < self.n:
                keep &= self.kept(self.bound(P, S, I, depth))
            if not keep.all():
                S, I, C, P, code = S[keep], I[keep], C[keep], P[keep], code[keep]
            if len(S) == 0:
                return
        cost = P + self.cfg.weight_p * np.abs(S - self.s_star)
        self.leaves += len(cost)
        j = int(np.argmin(cost))
        if cost[j] < self.best or (self.strict and cost[j] == self.best):
            digits = []
            x = int(code[j])
            for _ in range(self.block):
                x, d = divmod(x, L)
                digits.append(d)
            seq = list(prefix) + digits[::-1]
            if cost[j] < self.best or seq < self.best_seq:
                self.best = float(cost[j])
                self.best_seq = seq
            self.strict = False


def solve(
    x0: EpidemicState,
    params: ModelParams,
    cfg: MpcConfig,
    warm_start: Optional[Sequence[float]] = None,
    block_depth: int = 4,
) -> MpcSolution:
    """Exact minimiser of the slack-augmented finite-horizon objective.

    Ties are resolved toward the smaller input at the earliest differing
    step, i.e. the least restrictive policy. ``warm_start`` only seeds the
    incumbent bound; the result does not depend on it.
    """
    search = _Search(params, cfg, block_depth)
    if warm_start is not None:
        index = {u: k for k, u in enumerate(cfg.grid.levels)}
        search.best = evaluate_sequence(x0, warm_start, params, cfg).cost
        search.best_seq = [index[u] for u in warm_start]
        search.strict = True
    search.dfs(0, x0.s, x0.i, x0.c, 0.0, [])
    seq = tuple(cfg.grid.levels[k] for k in search.best_seq)
    feasible = True
    if cfg.constrained:
        feasible = evaluate_sequence(x0, seq, params, cfg).feasible
    return MpcSolution(seq, search.best, feasible, search.leaves)


@dataclass
class ClosedLoopResult:
    """Receding-horizon run: plant trajectory plus per-sample controller records."""

    trajectory: Trajectory
    sample_times: np.ndarray
    inputs: np.ndarray
    costs: np.ndarray
    feasible: np.ndarray
    nodes: np.ndarray
    s_star: float
    t_start_control: float
    ts: float
    qss_threshold: float = QSS_THRESHOLD

    @property
    def distancing_duration(self) -> float:
        """Total time with a nonzero input."""
        ends = np.minimum(self.sample_times + self.ts, self.trajectory.tau[-1])
        return float(np.sum((ends - self.sample_times)[self.inputs > 0]))

    @property
    def release_time(self) -> Optional[float]:
        """End of the last sample interval with a nonzero input."""
        active = np.nonzero(self.inputs > 0)[0]
        if len(active) == 0:
            return None
        return float(min(self.sample_times[active[-1]] + self.ts, self.trajectory.tau[-1]))

    @property
    def herd_immunity_time(self) -> Optional[float]:
        return herd_immunity_arrival(self.trajectory, self.s_star, self.qss_threshold)

    @property
    def max_infected(self) -> float:
        return float(self.trajectory.i.max())

    def events(self):
        release = self.release_time
        return detect_events(
            self.trajectory,
            release_time=self.t_start_control if release is None else release,
            qss_threshold=self.qss_threshold,
        )


def closed_loop(
    params: ModelParams,
    cfg: MpcConfig,
    t_start_control: float = 2.0,
    t_end: float = 30.0,
    progress=None,
) -> ClosedLoopResult:
    """Simulate the plant under receding-horizon control.

    The epidemic runs uncontrolled from ``(1 - eps, eps, 0)`` until
    ``t_start_control``; afterwards the first input of each solved horizon
    is held for one sampling interval of the dense reference integrator.
    """
    if t_start_control < 0 or t_end <= t_start_control:
        raise ValueError("need 0 <= t_start_control < t_end")
    sampling = cfg.sampling
    x = params.initial_state()
    parts = [dense_trajectory(x, Schedule.constant(params.r0), params, sampling, t_start_control)]
    x = parts[0].terminal
    times, inputs, costs, feas, nodes = [], [], [], [], []
    k = 0
    warm = None
    while True:
        t = t_start_control + k * sampling.ts
        if t >= t_end - 1e-9:
            break
        sol = solve(x, params, cfg, warm_start=warm)
        u = sol.input_sequence[0]
        warm = sol.input_sequence[1:] + sol.input_sequence[-1:]
        seg = dense_trajectory(
            x, Schedule.constant(effective_r(params, u)), params, sampling,
            min(t + sampling.ts, t_end), t0=t,
        )
        parts.append(seg)
        x = seg.terminal
        times.append(t)
        inputs.append(u)
        costs.append(sol.cost)
        feas.append(sol.feasible)
        nodes.append(sol.nodes_explored)
        if progress is not None:
            progress(t, u, sol)
        k += 1
    return ClosedLoopResult(
        trajectory=Trajectory.concatenate(parts),
        sample_times=np.asarray(times),
        inputs=np.asarray(inputs),
        costs=np.asarray(costs),
        feasible=np.asarray(feas, dtype=bool),
        nodes=np.asarray(nodes, dtype=np.int64),
        s_star=herd_immunity(params.r0),
        t_start_control=t_start_control,
        ts=sampling.ts,
    )
