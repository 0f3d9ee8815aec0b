import math

import numpy as np
import pytest
from scipy import stats

from lorenzmix.errors import BudgetError, PreconditionError, SingularOrbitError
from lorenzmix.invariant_measure import roof_integral, roof_moment
from lorenzmix.lorenz_map import LorenzLikeMap, sanity_map
from lorenzmix.roof import RoofFunction, constant_roof, default_roof
from lorenzmix.suspension_flow import (SuspensionPoint, advance, advance_many, base_expectation, observe,
                                       observe_on_grid, sample_measure)

M = LorenzLikeMap()
R = default_roof()


def test_zero_time_is_identity():
    p = SuspensionPoint(0.3, 0.2)
    assert advance(p, 0.0, M, R) == p


def test_one_identification_exact(rng):
    for x in rng.uniform(-1, 1, 100):
        q = advance(SuspensionPoint(x, 0.0), R(x), M, R)
        assert q.base == M.eval(x) and q.height == 0.0


def test_semigroup(rng):
    worst = 0.0
    for _ in range(1000):
        x = rng.uniform(-1, 1)
        p = SuspensionPoint(x, rng.uniform(0, R(x)))
        s, t = rng.uniform(0, 20, 2)
        a = advance(advance(p, s, M, R), t, M, R)
        b = advance(p, s + t, M, R)
        assert a.base == pytest.approx(b.base, abs=1e-9) or abs(a.height - b.height) > 1
        worst = max(worst, abs(a.height - b.height))
    assert worst < 1e-9


def test_height_invariant(rng):
    x = rng.uniform(-1, 1, 5000)
    u = rng.uniform(0, 1, 5000) * R(x)
    xs, us, st = advance_many(x, u, 13.7, M, R)
    assert np.all(st == 0)
    assert np.all((us >= 0) & (us < R(xs)))


def test_advance_many_matches_scalar(rng):
    x = rng.uniform(-1, 1, 200)
    u = rng.uniform(0, 1, 200) * R(x)
    xs, us, _ = advance_many(x, u, 9.1, M, R)
    for i in range(200):
        q = advance(SuspensionPoint(x[i], u[i]), 9.1, M, R)
        assert (q.base, q.height) == (xs[i], us[i])


def test_callable_roof_path():
    r = RoofFunction(R.coef, lambda x: 1.0 + 0.0 * np.asarray(x))
    p = SuspensionPoint(0.37, 0.1)
    a, b = advance(p, 25.0, M, r), advance(p, 25.0, M, R)
    assert a.base == pytest.approx(b.base, abs=1e-9) and a.height == pytest.approx(b.height, abs=1e-9)


def test_singular_orbit():
    # the sanity map sends 0.75 to 0.5 and then to 0
    with pytest.raises(SingularOrbitError):
        advance(SuspensionPoint(0.75, 0.0), 10.0, sanity_map(), R)


def test_budget():
    with pytest.raises(BudgetError):
        advance(SuspensionPoint(0.3, 0.0), 1000.0, M, R, max_identifications=10)


def test_invalid_points():
    with pytest.raises(PreconditionError):
        advance(SuspensionPoint(0.3, R(0.3)), 1.0, M, R)
    with pytest.raises(PreconditionError):
        advance(SuspensionPoint(0.0, 0.0), 1.0, M, R)
    with pytest.raises(PreconditionError):
        advance(SuspensionPoint(0.3, 0.0), -1.0, M, R)


def test_constant_roof_samples_base_from_mu(density):
    x, u = sample_measure(density, constant_roof(1.0), np.random.default_rng(1), 400_000)
    hist, _ = np.histogram(x, bins=64, range=(-1, 1), density=True)
    ref = density.mass.reshape(64, -1).sum(axis=1) / (2 / 64)
    assert np.sum(np.abs(hist - ref)) * (2 / 64) < 0.02
    assert np.all((u >= 0) & (u < 1.0))


def test_size_biased_mean(density):
    x, u = sample_measure(density, R, np.random.default_rng(2), 1_000_000)
    want = roof_moment(density, R, 2) / roof_integral(density, R).integral_r
    assert np.mean(R(x)) == pytest.approx(want, rel=0.01)


def test_heights_uniform_in_bin(density):
    x, u = sample_measure(density, R, np.random.default_rng(3), 200_000)
    sel = (x > 0.2) & (x < 0.25)
    assert stats.kstest(u[sel] / R(x[sel]), "uniform").pvalue > 0.05


def test_observe_constant_observable():
    v = observe(SuspensionPoint(0.3, 0.0), lambda x, u: 1.0, np.linspace(0, 40, 81), M, R)
    assert np.all(v == 1.0)


def test_height_increments_between_identifications():
    dt = 0.05
    x, u = observe_on_grid(SuspensionPoint(0.3, 0.0), dt, 2000, M, R)
    same = x[1:] == x[:-1]
    assert np.allclose(np.diff(u)[same], dt, atol=1e-12)
    assert not same.all()


def test_observe_matches_grid():
    t = 0.5 * np.arange(200)
    a = observe(SuspensionPoint(0.3, 0.0), lambda x, u: x, t, M, R)
    b, _ = observe_on_grid(SuspensionPoint(0.3, 0.0), 0.5, 200, M, R)
    assert np.allclose(a, b, atol=1e-12)


def test_ergodic_average(density):
    x, _ = observe_on_grid(SuspensionPoint(0.3, 0.0), 0.01, 10_000_000, M, R)
    want = base_expectation(density, R, lambda z: z * z)
    assert np.mean(x * x) == pytest.approx(want, rel=0.02)


def test_measure_preservation(density):
    rng = np.random.default_rng(4)
    x, u = sample_measure(density, R, rng, 1_000_000)
    xs, us, st = advance_many(x, u, 37.3, M, R)
    ok = st == 0
    h0, _, _ = np.histogram2d(x, u / R(x), bins=8, range=[[-1, 1], [0, 1]])
    h1, _, _ = np.histogram2d(xs[ok], us[ok] / R(xs[ok]), bins=8, range=[[-1, 1], [0, 1]])
    assert np.sum(np.abs(h0 / h0.sum() - h1 / h1.sum())) < 0.05
