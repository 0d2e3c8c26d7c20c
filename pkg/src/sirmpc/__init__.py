"""Non-dimensional SIR dynamics with single-interval and predictive distancing control."""

from .analysis import (
    herd_immunity,
    lambert_w0,
    peak_prevalence,
    s_infinity,
)
from .integrator import SamplingConfig, Schedule, Trajectory, dense_trajectory, sample_map
from .model import FIVE_LEVEL, FOUR_LEVEL, ControlGrid, EpidemicState, ModelParams, effective_r
from .mpc import MpcConfig, closed_loop, solve
from .single_interval import SingleInterval, optimal_ri, simulate_single_interval

__all__ = [
    "ControlGrid",
    "EpidemicState",
    "FIVE_LEVEL",
    "FOUR_LEVEL",
    "ModelParams",
    "MpcConfig",
    "SamplingConfig",
    "Schedule",
    "SingleInterval",
    "Trajectory",
    "closed_loop",
    "dense_trajectory",
    "effective_r",
    "herd_immunity",
    "lambert_w0",
    "optimal_ri",
    "peak_prevalence",
    "s_infinity",
    "sample_map",
    "simulate_single_interval",
    "solve",
]
