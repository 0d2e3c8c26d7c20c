"""State and parameter types plus the controlled SIR vector field.

Time is non-dimensional (scaled by the removal rate), so a single
reproduction number ``r`` drives the dynamics::

    dS/dtau = -r S I
    dI/dtau =  r S I - I
    dC/dtau =  I
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

SIMPLEX_TOL = 1e-12


def _check_finite(*values: float) -> None:
    for v in values:
        if not math.isfinite(v):
            raise ValueError(f"non-finite value: {v!r}")


@dataclass(frozen=True)
class EpidemicState:
    """Population fractions ``(s, i, c)`` at one instant.

    Each fraction must lie in [0, 1] and the three must sum to one within
    ``SIMPLEX_TOL``.
    """

    s: float
    i: float
    c: float

    def __post_init__(self):
        _check_finite(self.s, self.i, self.c)
        for name in ("s", "i", "c"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name}={v!r} outside [0, 1]")
        total = self.s + self.i + self.c
        if abs(total - 1.0) > SIMPLEX_TOL:
            raise ValueError(f"fractions sum to {total!r}, expected 1")

    @classmethod
    def outbreak(cls, epsilon: float) -> "EpidemicState":
        """Initial state ``(1 - epsilon, epsilon, 0)``."""
        return cls(1.0 - epsilon, epsilon, 0.0)

    @classmethod
    def from_si(cls, s: float, i: float) -> "EpidemicState":
        """Build a state from ``s`` and ``i``, with ``c`` closing the simplex."""
        return cls(s, i, 1.0 - s - i)

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.s, self.i, self.c)


@dataclass(frozen=True)
class ModelParams:
    """Reproduction numbers and the initial infected fraction.

    Parameters
    ----------
    r0 : float
        Reproduction number with no intervention.
    r_min : float
        Reproduction number under the hardest distancing, ``0 < r_min < r0``.
    epsilon : float
        Infected fraction at the outbreak time.
    """

    r0: float = 3.0
    r_min: float = 0.85
    epsilon: float = 1e-3

    def __post_init__(self):
        _check_finite(self.r0, self.r_min, self.epsilon)
        if not self.r0 > self.r_min > 0.0:
            raise ValueError(f"need r0 > r_min > 0, got r0={self.r0}, r_min={self.r_min}")
        if not 0.0 < self.epsilon < 1.0:
            raise ValueError(f"epsilon={self.epsilon} outside (0, 1)")

    def initial_state(self) -> EpidemicState:
        return EpidemicState.outbreak(self.epsilon)


@dataclass(frozen=True)
class ControlGrid:
    """Admissible quantized distancing levels ``u`` in [0, 1]."""

    levels: tuple[float, ...] = (0.0, 0.25, 0.5, 0.75, 1.0)

    def __post_init__(self):
        levels = tuple(float(u) for u in self.levels)
        object.__setattr__(self, "levels", levels)
        if len(levels) < 2:
            raise ValueError("a control grid needs at least two levels")
        if levels[0] != 0.0 or levels[-1] != 1.0:
            raise ValueError("control grid must start at 0 and end at 1")
        if any(b <= a for a, b in zip(levels, levels[1:])):
            raise ValueError("control grid levels must be strictly increasing")

    @classmethod
    def uniform(cls, n_levels: int) -> "ControlGrid":
        return cls(tuple(np.linspace(0.0, 1.0, n_levels)))

    def __len__(self) -> int:
        return len(self.levels)

    def __contains__(self, u: float) -> bool:
        return u in self.levels

    def reproduction_numbers(self, params: ModelParams) -> tuple[float, ...]:
        """Switching-mode reproduction numbers, one per level."""
        return tuple(effective_r(params, u) for u in self.levels)


FIVE_LEVEL = ControlGrid()
FOUR_LEVEL = ControlGrid((0.0, 0.25, 0.5, 1.0))


def effective_r(params: ModelParams, u: float) -> float:
    """Reproduction number under distancing intensity ``u``.

    Affine in ``u``: ``r0`` at ``u = 0`` and ``r_min`` at ``u = 1``. Written
    as a convex combination so both endpoints are hit exactly.
    """
    _check_finite(u)
    if not 0.0 <= u <= 1.0:
        raise ValueError(f"input u={u!r} outside [0, 1]")
    return params.r0 * (1.0 - u) + params.r_min * u


def input_for_r(params: ModelParams, r: float) -> float:
    """Inverse of :func:`effective_r`; not clipped to [0, 1]."""
    return (params.r0 - r) / (params.r0 - params.r_min)


def field(s, i, r):
    """Raw vector field on floats or arrays; returns ``(ds, di, dc)``."""
    infection = r * s * i
    return -infection, infection - i, i


def vector_field(state: EpidemicState, r_effective: float) -> tuple[float, float, float]:
    """Time derivative of ``state`` under reproduction number ``r_effective``."""
    _check_finite(r_effective)
    if r_effective <= 0.0:
        raise ValueError(f"r_effective={r_effective!r} must be positive")
    return field(state.s, state.i, r_effective)


def levels_array(grid: ControlGrid | Sequence[float]) -> np.ndarray:
    return np.asarray(grid.levels if isinstance(grid, ControlGrid) else grid, dtype=float)
