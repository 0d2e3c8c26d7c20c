import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from sirmpc.model import (
    FIVE_LEVEL,
    FOUR_LEVEL,
    ControlGrid,
    EpidemicState,
    ModelParams,
    effective_r,
    input_for_r,
    vector_field,
)


@st.composite
def simplex_states(draw):
    s = draw(st.floats(0.0, 1.0))
    i = draw(st.floats(0.0, 1.0 - s))
    return EpidemicState.from_si(s, i)


class TestEpidemicState:
    def test_valid(self):
        x = EpidemicState(0.5, 0.25, 0.25)
        assert x.as_tuple() == (0.5, 0.25, 0.25)

    @pytest.mark.parametrize("triple", [(0.5, 0.5, 0.1), (-0.1, 0.6, 0.5), (1.2, 0.0, -0.2), (math.nan, 0.5, 0.5)])
    def test_rejects(self, triple):
        with pytest.raises(ValueError):
            EpidemicState(*triple)

    def test_tolerance(self):
        EpidemicState(0.5, 0.5, 5e-13)
        with pytest.raises(ValueError):
            EpidemicState(0.5, 0.5, 1e-11)

    def test_outbreak(self):
        assert EpidemicState.outbreak(1e-3).as_tuple() == (0.999, 1e-3, 0.0)


class TestModelParams:
    def test_defaults(self):
        p = ModelParams()
        assert (p.r0, p.r_min, p.epsilon) == (3.0, 0.85, 1e-3)

    @pytest.mark.parametrize("kw", [dict(r0=0.8, r_min=0.85), dict(r_min=0.0), dict(epsilon=0.0), dict(epsilon=1.0)])
    def test_rejects(self, kw):
        with pytest.raises(ValueError):
            ModelParams(**kw)


class TestControlGrid:
    def test_default_levels(self):
        assert FIVE_LEVEL.levels == (0.0, 0.25, 0.5, 0.75, 1.0)
        assert FOUR_LEVEL.levels == (0.0, 0.25, 0.5, 1.0)
        assert ControlGrid.uniform(5) == FIVE_LEVEL

    @pytest.mark.parametrize("levels", [(0.0,), (0.1, 1.0), (0.0, 0.9), (0.0, 0.5, 0.5, 1.0)])
    def test_rejects(self, levels):
        with pytest.raises(ValueError):
            ControlGrid(levels)

    def test_induced_r_strictly_decreasing(self):
        rs = FIVE_LEVEL.reproduction_numbers(ModelParams())
        assert rs[0] == 3.0 and rs[-1] == 0.85
        assert all(b < a for a, b in zip(rs, rs[1:]))


class TestVectorField:
    def test_equilibrium(self):
        assert vector_field(EpidemicState(0.5, 0.0, 0.5), 2.5) == (0.0, 0.0, 0.0)

    def test_threshold(self):
        ds, di, dc = vector_field(EpidemicState(0.4, 0.1, 0.5), 2.5)
        assert ds == pytest.approx(-0.1, abs=1e-15)
        assert di == pytest.approx(0.0, abs=1e-15)
        assert dc == 0.1

    def test_hand_value(self):
        ds, di, dc = vector_field(EpidemicState(0.999, 0.001, 0.0), 2.5)
        assert ds == pytest.approx(-0.0024975, rel=1e-12)
        assert di == pytest.approx(0.0014975, rel=1e-12)
        assert dc == 0.001

    @pytest.mark.parametrize("r", [0.0, -1.0, math.inf, math.nan])
    def test_rejects_bad_r(self, r):
        with pytest.raises(ValueError):
            vector_field(EpidemicState(0.5, 0.1, 0.4), r)

    @given(simplex_states(), st.floats(1e-3, 50.0))
    def test_properties(self, x, r):
        ds, di, dc = vector_field(x, r)
        # the infection term cancels exactly between S and I
        assert ds + di + dc == pytest.approx(0.0, abs=1e-15)
        assert -ds == r * x.s * x.i
        assert ds <= 0.0 <= dc
        if x.i > 0:
            assert np.sign(di) == np.sign(r * x.s - 1.0)


class TestEffectiveR:
    @pytest.mark.parametrize("u, expected", [(0.0, 3.0), (1.0, 0.85), (0.5, 1.925)])
    def test_values(self, u, expected):
        assert effective_r(ModelParams(3.0, 0.85), u) == pytest.approx(expected, abs=1e-15)

    @pytest.mark.parametrize("u", [-0.01, 1.01, math.nan])
    def test_rejects(self, u):
        with pytest.raises(ValueError):
            effective_r(ModelParams(), u)

    @given(st.floats(0, 1), st.floats(0, 1))
    def test_affine_order_reversing(self, a, b):
        p = ModelParams()
        ra, rb = effective_r(p, a), effective_r(p, b)
        assert p.r_min <= ra <= p.r0
        if a < b:
            assert ra >= rb
        assert input_for_r(p, ra) == pytest.approx(a, abs=1e-14)
        mid = effective_r(p, 0.5 * (a + b))
        assert mid == pytest.approx(0.5 * (ra + rb), abs=1e-14)
