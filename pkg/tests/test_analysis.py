import math

import numpy as np
import pytest
from hypothesis import assume, given, strategies as st

from sirmpc.analysis import (
    INV_E,
    Stability,
    average_infection_time,
    classify_equilibrium,
    detect_events,
    herd_immunity,
    herd_immunity_arrival,
    lambert_w0,
    peak_prevalence,
    probe_stability,
    qss_entry_index,
    s_infinity,
)
from sirmpc.errors import DegenerateEpidemicError, DomainError, InsufficientHorizonError
from sirmpc.integrator import SamplingConfig, Schedule, Trajectory, dense_trajectory
from sirmpc.model import EpidemicState, ModelParams


def w_bisect(x):
    """Independent oracle: bisection of w e^w = x on [-1, 0]."""
    lo, hi = -1.0, 0.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid * math.exp(mid) < x:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def settle(s0, i0, r, t_end=100.0, dense_step=1.0 / 64):
    x = EpidemicState.from_si(s0, i0)
    cfg = SamplingConfig(ts=0.5, dense_step=dense_step)
    return dense_trajectory(x, Schedule.constant(r), ModelParams(r0=r, r_min=r / 2), cfg, t_end)


def make_traj(tau, i):
    tau = np.asarray(tau, float)
    i = np.asarray(i, float)
    s = np.full_like(i, 0.5)
    return Trajectory(tau, s, i, 1 - s - i, np.full_like(i, 2.0), np.zeros_like(i))


class TestLambertW:
    def test_endpoints(self):
        assert lambert_w0(0.0) == 0.0
        assert lambert_w0(-INV_E) == pytest.approx(-1.0, abs=1e-12)

    def test_minus_point_two(self):
        w = lambert_w0(-0.2)
        assert abs(w * math.exp(w) + 0.2) <= 1e-13
        assert w == pytest.approx(w_bisect(-0.2), abs=1e-13)
        assert w == pytest.approx(-0.2592, abs=1e-4)

    def test_clamps_tiny_excursion(self):
        assert lambert_w0(-INV_E - 5e-13) == pytest.approx(-1.0, abs=1e-6)

    @pytest.mark.parametrize("x", [0.1, -INV_E - 1e-9, -1.0, math.nan])
    def test_domain(self, x):
        with pytest.raises(DomainError):
            lambert_w0(x)

    @given(st.floats(-INV_E, 0.0))
    def test_identity_and_oracle(self, x):
        w = lambert_w0(x)
        assert -1.0 <= w <= 0.0
        assert abs(w * math.exp(w) - x) <= 1e-13
        # bisection agrees up to the conditioning near the branch point
        assert w == pytest.approx(w_bisect(x), abs=1e-6)


class TestHerdImmunity:
    @pytest.mark.parametrize("r, expected", [(2.5, 0.4), (0.8, 1.0), (3.0, 1.0 / 3.0), (1.0, 1.0)])
    def test_values(self, r, expected):
        assert herd_immunity(r) == expected

    @pytest.mark.parametrize("r", [0.0, -1.0])
    def test_rejects(self, r):
        with pytest.raises(DomainError):
            herd_immunity(r)


class TestSInfinity:
    def test_below_threshold_fixed(self):
        assert s_infinity(0.3, 0.0, 2.5) == 0.3

    def test_against_dense(self):
        tr = settle(0.999, 0.001, 2.5, t_end=60.0)
        assert abs(s_infinity(0.999, 0.001, 2.5) - tr.s[-1]) <= 2e-3

    def test_rejects(self):
        with pytest.raises(DomainError):
            s_infinity(0.8, 0.3, 2.5)
        with pytest.raises(DomainError):
            s_infinity(0.5, 0.1, 0.0)

    @given(st.floats(1e-3, 0.999), st.floats(1e-3, 1.0), st.floats(0.1, 10.0))
    def test_below_threshold(self, s0, frac, r):
        i0 = frac * (1.0 - s0)
        assume(i0 > 0)
        v = s_infinity(s0, i0, r)
        assert 0.0 <= v < herd_immunity(r)

    def test_threshold_limit(self):
        assert s_infinity(0.4, 1e-12, 2.5) == pytest.approx(0.4, abs=1e-5)

    @pytest.mark.parametrize("i0", [1e-3, 1e-2, 1e-1])
    def test_monotone_in_s0(self, i0):
        above = np.linspace(0.41, 1.0 - i0, 60)
        below = np.linspace(0.01, 0.39, 60)
        va = [s_infinity(s, i0, 2.5) for s in above]
        vb = [s_infinity(s, i0, 2.5) for s in below]
        assert np.all(np.diff(va) < 0)
        assert np.all(np.diff(vb) > 0)

    def test_limits_in_r(self):
        assert s_infinity(0.9, 0.05, 1e3) <= 1e-3
        assert s_infinity(0.9, 0.05, 1e-3) == pytest.approx(0.9, abs=1e-3)


class TestPeakPrevalence:
    def test_threshold_case(self):
        p = peak_prevalence(0.4, 0.05, 2.5)
        assert p.value == pytest.approx(0.05, abs=1e-15)

    def test_monotone_flag(self):
        assert peak_prevalence(0.2, 0.01, 2.5) == (0.01, True)

    def test_value(self):
        p = peak_prevalence(0.999, 0.001, 2.5)
        assert p.value == pytest.approx(1 - 0.4 * (1 + math.log(2.4975)), abs=1e-15)
        assert p.value == pytest.approx(0.2339, abs=1e-4)
        assert not p.monotone_decline

    @pytest.mark.parametrize("r", [1.5, 2.5, 4.0])
    @pytest.mark.parametrize("s0", [0.7, 0.95])
    def test_against_simulation(self, r, s0):
        i0 = 0.01
        tr = settle(s0, i0, r, t_end=40.0, dense_step=1.0 / 512)
        assert abs(tr.i.max() - peak_prevalence(s0, i0, r).value) <= 1e-4


class TestEquilibria:
    @pytest.mark.parametrize(
        "s_bar, r, expected",
        [(0.39, 2.5, Stability.STABLE), (0.41, 2.5, Stability.UNSTABLE), (1.0, 0.5, Stability.STABLE), (0.4, 2.5, Stability.STABLE)],
    )
    def test_classify(self, s_bar, r, expected):
        assert classify_equilibrium(s_bar, r).stability is expected

    def test_stability_value(self):
        assert Stability.STABLE.value == "asymptotically-stable"

    def test_range(self):
        with pytest.raises(DomainError):
            classify_equilibrium(1.2, 2.5)

    def test_probe(self):
        assert abs(probe_stability(0.3, 2.5) - 0.3) <= 1e-2
        assert probe_stability(0.6, 2.5) < 0.6 - 0.01


class TestAverageInfectionTime:
    def test_quadrature_refinement(self):
        coarse = settle(0.999, 0.001, 2.5, t_end=60.0, dense_step=1.0 / 16)
        fine = settle(0.999, 0.001, 2.5, t_end=60.0, dense_step=1.0 / 32)
        a, b = average_infection_time(coarse), average_infection_time(fine)
        assert a > 0
        assert abs(a - b) <= 0.01 * b

    def test_oracle_uncontrolled(self):
        # mean of the incidence density -dS/dt, an independent route to the same number
        tr = settle(0.999, 0.001, 2.5, t_end=80.0, dense_step=1.0 / 256)
        ds = -np.gradient(tr.s, tr.tau)
        expected = np.sum(tr.tau * ds) * (tr.tau[1] - tr.tau[0]) / (1 - tr.s[-1])
        assert average_infection_time(tr) == pytest.approx(expected, rel=1e-3)

    def test_tail_invariance(self):
        short = settle(0.999, 0.001, 2.5, t_end=60.0)
        long = settle(0.999, 0.001, 2.5, t_end=120.0)
        assert abs(average_infection_time(short) - average_infection_time(long)) < 1e-6

    def test_degenerate(self):
        tr = settle(0.5, 0.0, 2.5, t_end=5.0)
        with pytest.raises(DegenerateEpidemicError):
            average_infection_time(tr)

    def test_unsettled(self):
        with pytest.raises(InsufficientHorizonError):
            average_infection_time(settle(0.999, 0.001, 2.5, t_end=5.0))


class TestEvents:
    def test_monotone_decline(self):
        tau = np.linspace(0, 10, 101)
        ev = detect_events(make_traj(tau, 0.1 * np.exp(-tau)))
        assert ev.peaks == []
        k = int(np.argmax(0.1 * np.exp(-tau) < 1e-4))
        assert ev.qss_time == tau[k]

    def test_ripple_ignored(self):
        tau = np.linspace(0, 10, 101)
        i = 1e-3 + 1e-7 * np.sin(7 * tau)
        assert detect_events(make_traj(tau, i)).peaks == []

    def test_second_wave(self):
        tau = np.linspace(0, 50, 501)
        i = 0.2 * np.exp(-((tau - 5) ** 2) / 4) + 0.1 * np.exp(-((tau - 30) ** 2) / 9)
        ev = detect_events(make_traj(tau, i), release_time=20.0)
        assert [round(t) for t, _ in ev.peaks] == [5, 30]
        assert ev.second_wave_time == pytest.approx(30.0)
        assert detect_events(make_traj(tau, i), release_time=35.0).second_wave is None

    def test_qss_entry(self):
        assert qss_entry_index(np.array([1e-3, 1e-5, 1e-3, 1e-6, 1e-7])) == 3
        assert qss_entry_index(np.array([1e-5, 1e-6])) == 0
        assert qss_entry_index(np.array([1e-5, 1e-3])) is None

    def test_arrival(self):
        tr = settle(0.999, 0.001, 2.5, t_end=60.0)
        assert herd_immunity_arrival(tr, 0.4) is not None
        assert herd_immunity_arrival(tr, 0.01) is None
