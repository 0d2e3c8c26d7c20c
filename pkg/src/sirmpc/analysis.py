"""Epidemic analysis: final size, thresholds, stability and trajectory events."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np
from scipy.integrate import trapezoid
from scipy.signal import find_peaks

from .errors import DegenerateEpidemicError, DomainError, InsufficientHorizonError
from .integrator import SamplingConfig, Schedule, Trajectory, dense_trajectory
from .model import EpidemicState, ModelParams

INV_E = math.exp(-1.0)
DOMAIN_TOL = 1e-12
QSS_THRESHOLD = 1e-4


def lambert_w0(x: float) -> float:
    """Principal branch of the Lambert W function on ``[-1/e, 0]``.

    Halley iteration started from the branch-point series when ``x`` is
    close to ``-1/e`` and from a Taylor guess near zero.
    """
    x = float(x)
    if math.isnan(x) or x > 0.0 or x < -INV_E - DOMAIN_TOL:
        raise DomainError(f"lambert_w0 is defined here only on [-1/e, 0], got {x!r}")
    if x == 0.0:
        return 0.0
    x = max(x, -INV_E)
    p2 = 2.0 * (math.e * x + 1.0)
    if p2 <= 0.0:
        return -1.0
    if x < -0.25:
        p = math.sqrt(p2)
        w = -1.0 + p * (1.0 + p * (-1.0 / 3.0 + p * 11.0 / 72.0))
    else:
        w = x * (1.0 + x * (-1.0 + 1.5 * x))
    for _ in range(50):
        ew = math.exp(w)
        f = w * ew - x
        wp1 = w + 1.0
        if wp1 == 0.0 or f == 0.0:
            break
        step = f / (ew * wp1 - (w + 2.0) * f / (2.0 * wp1))
        w_new = min(0.0, max(-1.0, w - step))
        if abs(w_new - w) <= 1e-15 * max(1.0, abs(w_new)):
            w = w_new
            break
        w = w_new
    return w


def herd_immunity(r: float) -> float:
    """Herd-immunity threshold ``min(1, 1/r)``."""
    if not r > 0:
        raise DomainError(f"reproduction number must be positive, got {r!r}")
    return min(1.0, 1.0 / r)


def _check_si(s0, i0):
    if s0 < 0 or i0 < 0 or s0 + i0 > 1.0 + 1e-12:
        raise DomainError(f"(s0, i0)=({s0!r}, {i0!r}) is not a valid pair of fractions")


def s_infinity(s0: float, i0: float, r: float) -> float:
    """Susceptible fraction left when an epidemic started at ``(s0, i0)`` ends.

    Closed form ``-W0(-r s0 exp(-r (s0 + i0))) / r``. With ``i0 = 0`` and
    ``s0`` above the threshold the value is the ``i0 -> 0+`` limit, which
    differs from the (unstable) equilibrium ``s0`` itself.
    """
    _check_si(s0, i0)
    if not r > 0:
        raise DomainError(f"reproduction number must be positive, got {r!r}")
    if i0 == 0.0 and s0 <= herd_immunity(r):
        return float(s0)
    value = -lambert_w0(-r * s0 * math.exp(-r * (s0 + i0))) / r
    # near the branch point rounding can push the value past its exact bounds
    return min(value, s0, herd_immunity(r))


class PeakPrevalence(NamedTuple):
    value: float
    monotone_decline: bool


def peak_prevalence(s0: float, i0: float, r: float) -> PeakPrevalence:
    """Maximum infected fraction reached from ``(s0, i0)``.

    When ``s0 * r <= 1`` the infected fraction only declines, so the peak
    is ``i0`` itself and ``monotone_decline`` is set.
    """
    _check_si(s0, i0)
    if not r > 0:
        raise DomainError(f"reproduction number must be positive, got {r!r}")
    if s0 * r <= 1.0:
        return PeakPrevalence(float(i0), True)
    return PeakPrevalence(s0 + i0 - (1.0 + math.log(s0 * r)) / r, False)


class Stability(str, enum.Enum):
    STABLE = "asymptotically-stable"
    UNSTABLE = "unstable"


@dataclass(frozen=True)
class EquilibriumClassification:
    s_bar: float
    stability: Stability


def classify_equilibrium(s_bar: float, r: float) -> EquilibriumClassification:
    """Disease-free equilibria are stable at or below the threshold, unstable above."""
    if not 0.0 <= s_bar <= 1.0:
        raise DomainError(f"s_bar={s_bar!r} outside [0, 1]")
    stable = s_bar <= herd_immunity(r)
    return EquilibriumClassification(float(s_bar), Stability.STABLE if stable else Stability.UNSTABLE)


def probe_stability(
    s_bar: float,
    r: float,
    perturbation: float = 1e-4,
    t_end: float = 200.0,
    cfg: SamplingConfig | None = None,
) -> float:
    """Terminal susceptible fraction after infecting ``perturbation`` of an equilibrium.

    The perturbed state moves ``perturbation`` from S to I.
    """
    cfg = cfg or SamplingConfig(ts=0.5, dense_step=1.0 / 32)
    state = EpidemicState(s_bar - perturbation, perturbation, 1.0 - s_bar)
    params = ModelParams(r0=r, r_min=r / 2, epsilon=perturbation)
    return float(dense_trajectory(state, Schedule.constant(r), params, cfg, t_end).s[-1])


def average_infection_time(
    trajectory: Trajectory,
    r_schedule: Optional[np.ndarray] = None,
    qss_threshold: float = QSS_THRESHOLD,
) -> float:
    """Incidence-weighted mean infection time.

    Trapezoidal quadrature of ``t R(t) S(t) I(t) / (1 - S_end)``; the
    effective reproduction number stands in for the transmission rate in
    scaled time.
    """
    t, s, i = trajectory.tau, trajectory.s, trajectory.i
    r = trajectory.r if r_schedule is None else np.asarray(r_schedule, dtype=float)
    if not np.any(i > 0):
        raise DegenerateEpidemicError("no infected individuals along the trajectory")
    if i[-1] >= qss_threshold:
        raise InsufficientHorizonError(
            f"trajectory has not settled: final I={i[-1]:.3e} >= {qss_threshold:g}"
        )
    final_size = 1.0 - s[-1]
    if final_size <= 0.0:
        raise DegenerateEpidemicError("zero final size")
    return float(trapezoid(t * r * s * i, t) / final_size)


@dataclass
class TrajectoryEvents:
    """Peaks of I, quasi-steady-state entry and the first post-release peak."""

    peaks: list[tuple[float, float]]
    qss_time: Optional[float] = None
    second_wave: Optional[tuple[float, float]] = None

    @property
    def second_wave_time(self) -> Optional[float]:
        return None if self.second_wave is None else self.second_wave[0]


def qss_entry_index(i: np.ndarray, qss_threshold: float = QSS_THRESHOLD) -> Optional[int]:
    """First index from which ``i`` stays below the threshold, or None."""
    above = np.nonzero(np.asarray(i) >= qss_threshold)[0]
    if len(above) == 0:
        return 0
    k = int(above[-1]) + 1
    return k if k < len(i) else None


def detect_events(
    trajectory: Trajectory,
    release_time: Optional[float] = None,
    qss_threshold: float = QSS_THRESHOLD,
) -> TrajectoryEvents:
    """Locate infection peaks, QSS entry and a second wave after ``release_time``.

    Peaks are interior local maxima of the sampled I series whose
    prominence exceeds ``qss_threshold / 10``.
    """
    t, i = trajectory.tau, trajectory.i
    idx, _ = find_peaks(i, prominence=qss_threshold / 10)
    peaks = [(float(t[k]), float(i[k])) for k in idx]
    k = qss_entry_index(i, qss_threshold)
    second = None
    if release_time is not None:
        second = next((p for p in peaks if p[0] > release_time), None)
    return TrajectoryEvents(peaks, None if k is None else float(t[k]), second)


def herd_immunity_arrival(
    trajectory: Trajectory,
    s_star: float,
    qss_threshold: float = QSS_THRESHOLD,
    s_tol: float = 5e-3,
) -> Optional[float]:
    """First time with ``S <= s_star + s_tol`` and ``I < qss_threshold``."""
    ok = (trajectory.s <= s_star + s_tol) & (trajectory.i < qss_threshold)
    hits = np.nonzero(ok)[0]
    return float(trajectory.tau[hits[0]]) if len(hits) else None
