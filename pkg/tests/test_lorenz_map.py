import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lorenzmix.errors import PreconditionError, UndefinedPointError
from lorenzmix.lorenz_map import (IntervalCover, LorenzLikeMap, check_conditions, check_leo, leo_sufficiency,
                                  sanity_map)

M = LorenzLikeMap()
S = sanity_map()
nonzero = st.floats(-1.0, 1.0, allow_nan=False).filter(lambda v: abs(v) > 1e-300)


def test_defaults_values():
    assert M.eval(1.0) == pytest.approx(0.95, abs=1e-15)
    assert M.eval(-1.0) == pytest.approx(-0.95, abs=1e-15)
    assert M.eval(0.5) == pytest.approx(1.95 * 0.5 ** 0.75 - 1, rel=1e-15)
    # the commonly quoted 0.159478 is the value to about six digits
    assert abs(M.eval(0.5) - 0.159478) < 5e-6


def test_branch_limits():
    assert abs(M.eval(1e-12) + 1) < 1e-8
    assert abs(M.eval(-1e-12) - 1) < 1e-8
    assert M.limit(1) == -1.0 and M.limit(-1) == 1.0


def test_undefined_at_zero():
    with pytest.raises(UndefinedPointError):
        M.eval(0.0)
    with pytest.raises(UndefinedPointError):
        M.eval(np.array([0.2, 0.0]))


def test_family_validation():
    with pytest.raises(PreconditionError):
        LorenzLikeMap(1.5, 1.9)
    with pytest.raises(PreconditionError):
        LorenzLikeMap(0.75, 2.5)


def test_definition_conformance():
    assert M.satisfies_definition()
    # theta = 2 sends 1 to 1, outside (0, 1)
    assert not S.satisfies_definition()


@settings(max_examples=300, deadline=None)
@given(nonzero)
def test_odd_symmetry(x):
    assert M.eval(-x) == -M.eval(x)


@settings(max_examples=300, deadline=None)
@given(nonzero, nonzero)
def test_branch_monotone(a, b):
    if a < b and (a > 0) == (b > 0):
        assert M.eval(a) <= M.eval(b)
        assert M.deriv(a) > 0


@settings(max_examples=200, deadline=None)
@given(st.floats(-0.999, 0.999))
def test_inverse_branches(y):
    for side in (-1, 1):
        lo, hi = M.branch_range(side)
        if lo < y < hi:
            x = M.inverse(y, side)
            assert (x > 0) == (side > 0)
            assert M.eval(x) == pytest.approx(y, abs=1e-13)


def test_derivative_formula(rng):
    x = rng.uniform(0.01, 1, 100) * rng.choice([-1, 1], 100)
    h = 1e-7
    fd = (M.eval(x + h) - M.eval(x - h)) / (2 * h)
    assert np.allclose(M.deriv(x), fd, rtol=1e-6)


def test_check_conditions_defaults():
    rep = check_conditions(M, 10_000, 20)
    assert rep.min_derivative == pytest.approx(1.4625, abs=1e-12)
    assert rep.c == 1.0 and rep.tau >= 1.4625 - 1e-12 and rep.tau > math.sqrt(2)
    assert rep.bound_holds and rep.expanding and rep.pointwise_expanding
    assert math.isfinite(rep.f3_constant)
    assert rep.f3_constant == pytest.approx(max(1.4625, 1 / 1.4625), rel=1e-12)


def test_check_conditions_f3_ratio():
    rep = check_conditions(M, 10_000, 5)
    lo, hi = rep.f3_ratio_range
    assert lo >= 1 / rep.f3_constant - 1e-12 and hi <= rep.f3_constant + 1e-12


def test_check_conditions_weak_branch():
    m = LorenzLikeMap(0.75, 1.2)
    rep = check_conditions(m, 10_000, 20)
    assert rep.min_derivative == pytest.approx(0.9, abs=1e-12)
    assert not rep.pointwise_expanding
    assert rep.c < 1 and rep.bound_holds


def test_check_conditions_grid_precondition():
    with pytest.raises(PreconditionError):
        check_conditions(M, 100)


def test_leo_sufficiency():
    assert leo_sufficiency(M)
    assert not leo_sufficiency(LorenzLikeMap(0.75, 1.2))
    assert leo_sufficiency(S)


def test_leo_narrow_interval():
    res = check_leo(M, (0.4, 0.41))
    assert res.success and res.k <= 30
    a, b = res.covered_interval
    assert a <= 0 and b >= 1


def test_leo_unit_interval_takes_two_steps():
    res = check_leo(M, (0.0, 1.0))
    assert res.success and res.k == 2


def test_leo_odd_symmetry():
    k_pos = check_leo(M, (0.19, 0.2)).k
    assert check_leo(M, (-0.2, -0.19), target=(-1.0, 0.0)).k == k_pos
    assert check_leo(M, (-0.2, -0.19)).success


def test_leo_preconditions():
    with pytest.raises(PreconditionError):
        check_leo(M, (-0.1, 0.1))
    with pytest.raises(PreconditionError):
        check_leo(M, (0.3, 0.3))


def test_leo_failure_is_inconclusive():
    res = check_leo(M, (0.4, 0.41), k_max=2)
    assert not res.success and res.k is None and res.covered_interval is None


@settings(max_examples=40, deadline=None)
@given(st.floats(0.01, 0.9), st.floats(1e-3, 0.05), st.floats(0.0, 1.0))
def test_leo_monotone_in_interval(a, w, frac):
    U = (a, min(a + w, 0.999))
    inner = (U[0] + frac * 0.5 * (U[1] - U[0]), U[1])
    assert check_leo(M, U).k <= check_leo(M, inner).k


def test_cover_measure_nondecreasing(rng):
    for _ in range(10):
        a = rng.uniform(0.05, 0.9)
        cover = IntervalCover(np.array([[a, a + 0.01]]))
        prev = cover.measure
        for _ in range(12):
            cover = cover.image(M)
            assert cover.measure >= prev - 1e-12
            prev = cover.measure


def test_cover_merges_and_sorts():
    c = IntervalCover.from_intervals([(0.5, 0.6), (0.1, 0.2), (0.15, 0.3)])
    assert np.allclose(c.parts, [[0.1, 0.3], [0.5, 0.6]])
    assert c.contains(0.12, 0.25) and not c.contains(0.25, 0.55)
