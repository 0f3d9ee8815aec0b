import math
import warnings

import numpy as np
import pytest

from lorenzmix.errors import PreconditionError, RootBracketError
from lorenzmix.lorenz_map import LorenzLikeMap
from lorenzmix.mixing_diagnostics import (N_CAP, cohomology_residual, correlation, limit_contrast,
                                          obstruction_sequence, power_spectrum)
from lorenzmix.roof import constant_roof, default_roof, unit_log_roof

M = LorenzLikeMap()
R = default_roof()
X = lambda x, u: x  # noqa: E731
ONE = lambda x, u: np.ones_like(x)  # noqa: E731
FREQS = [0.5, 1.0, 2.0, math.pi]


# correlation

def test_constant_observable_has_zero_correlation(density):
    cs = correlation(X, ONE, np.arange(0.0, 10.0), M, R, density, n_ensemble=20_000, seed=1)
    assert np.all(np.abs(cs.C) <= 1e-12)


def test_c0_is_sample_variance(density):
    cs = correlation(X, X, np.array([0.0, 1.0]), M, R, density, n_ensemble=20_000, seed=2)
    assert cs.C[0] == pytest.approx(cs.var_h, rel=1e-12)
    assert cs.stderr[0] > 0


def test_burn_in_invariance(density):
    t = np.arange(0.0, 8.0, 0.5)
    a = correlation(X, X, t, M, R, density, n_ensemble=100_000, t_burn=5.0, seed=3)
    b = correlation(X, X, t, M, R, density, n_ensemble=100_000, t_burn=10.0, seed=3)
    se = np.hypot(a.stderr, b.stderr)
    assert np.all(np.abs(a.C - b.C) <= 2 * se)


def test_correlation_decays(density):
    cs = correlation(X, X, np.arange(20.0, 50.5, 0.5), M, R, density, n_ensemble=100_000, seed=4)
    c0 = correlation(X, X, np.array([0.0]), M, R, density, n_ensemble=100_000, seed=4).C[0]
    assert np.max(np.abs(cs.C)) / c0 < 0.05


def test_small_ensemble_rejected(density):
    with pytest.raises(PreconditionError):
        correlation(X, X, np.array([0.0]), M, R, density, n_ensemble=100)


def test_no_singular_warning_for_default_family(density):
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        cs = correlation(X, X, np.array([0.0, 30.0]), M, R, density, n_ensemble=10_000, seed=5)
    assert cs.n_rejected <= 100


# spectrum

def test_constant_series_spectrum():
    sp = power_spectrum(np.full(256, 3.0))
    assert sp.power[0] > 0 and sp.total_non_dc == pytest.approx(0.0, abs=1e-20)


def test_sinusoid_single_peak():
    dt, n = 0.1, 4096
    t = dt * np.arange(n)
    f0 = 64 / (n * dt)
    sp = power_spectrum(np.sin(2 * math.pi * f0 * t), dt)
    assert sp.peak_frequency == pytest.approx(f0)
    assert sp.max_fraction > 0.999


def test_spectrum_preconditions():
    with pytest.raises(PreconditionError):
        power_spectrum([1.0])
    with pytest.raises(PreconditionError):
        power_spectrum([1.0, 2.0], dt=0.0)


# cohomology

def test_zero_frequency(density):
    ct = cohomology_residual(0.0, M, R, density=density)
    assert ct.residual < 1e-12
    assert np.allclose(ct.psi, ct.psi[0], atol=1e-12)


def test_constant_roof_resonance(density):
    c = 1.3
    ct = cohomology_residual(2 * math.pi / c, M, constant_roof(c), density=density)
    assert ct.residual < 1e-8 and ct.converged


def test_unimodular_psi(density):
    for a in FREQS:
        ct = cohomology_residual(a, M, R, density=density)
        assert np.max(np.abs(np.abs(ct.psi) - 1)) < 1e-12
        assert 0 <= ct.residual <= 2
        assert ct.converged


def test_residual_positive_and_growing(density):
    res = [cohomology_residual(a, M, R, density=density).residual for a in FREQS]
    assert all(v > 0 for v in res)
    assert np.all(np.diff(res) > 0)


def test_residual_quadratic_in_frequency(density):
    # |lambda(a)| = exp(-a^2 sigma^2 / 2 + O(a^3)) for the asymptotic variance sigma^2 of r
    q = [cohomology_residual(a, M, R, density=density).residual / a ** 2 for a in FREQS]
    assert max(q) / min(q) < 1.1


def test_constant_roof_phase_only(density):
    # a constant twist only rotates psi = 1, so the modulus test sees every a as resonant
    ct = cohomology_residual(math.pi / 1.3, M, constant_roof(1.3), density=density)
    assert ct.residual < 1e-8
    assert ct.eigenvalue == pytest.approx(-1.0, abs=1e-8)


def test_negative_frequency_rejected():
    with pytest.raises(PreconditionError):
        cohomology_residual(-1.0, M, R, n_bins=64)


# obstruction sequence

@pytest.mark.parametrize("a", FREQS)
def test_closed_form_log_roof(a):
    seq = obstruction_sequence(a, unit_log_roof(), N=30)
    assert np.all(np.abs(seq.neg_log_x - seq.b) <= 1e-12 * seq.b)
    assert np.all(np.abs(seq.x - np.exp(-seq.b)) <= 1e-12)


@pytest.mark.parametrize("a", FREQS)
def test_default_roof_invariants(a):
    seq = obstruction_sequence(a, R, epsilon=0.5, N=30)
    assert np.max(seq.phase_errors()) < 1e-9
    assert seq.strictly_decreasing()
    assert seq.above_thresholds(R)
    assert seq.below_dyadic()
    assert np.all(np.exp(1j * a * seq.b).real * (-1.0) ** seq.n > 1 - 1e-12)


def test_b_minimal():
    a = 1.0
    seq = obstruction_sequence(a, R, N=20)
    prev = -math.inf
    for n, b in zip(seq.n, seq.b):
        thr = max(R(0.5 / 2.0 ** n), prev)
        assert b > thr and b - 2 * math.pi / a <= thr
        prev = b


def test_deep_sequence_in_log_space():
    seq = obstruction_sequence(1.0, R, N=N_CAP)
    assert seq.neg_log_x[-1] > 600
    assert seq.strictly_decreasing() and np.max(seq.phase_errors()) < 1e-9


def test_obstruction_preconditions():
    with pytest.raises(RootBracketError):
        obstruction_sequence(1.0, constant_roof(1.0))
    with pytest.raises(PreconditionError):
        obstruction_sequence(0.0, R)
    with pytest.raises(PreconditionError):
        obstruction_sequence(1.0, R, N=N_CAP + 1)


# limit contrast

def test_contrast_default_roof(density):
    a = 1.0
    seq = obstruction_sequence(a, R, N=30)
    rep = limit_contrast(seq, M, R, None, cohomology_residual(a, M, R, density=density))
    sel = rep.n[:-1] >= 5
    assert np.min(rep.lhs_amplitude[sel]) >= 1.9
    assert np.all(rep.roof_limit_gap[-10:] < 1e-6)


def test_contrast_any_unimodular_psi(density, rng):
    a = 2.0
    seq = obstruction_sequence(a, R, N=30)
    ct = cohomology_residual(a, M, R, density=density, max_iter=1)
    ct.psi[:] = np.exp(1j * rng.uniform(0, 2 * math.pi, ct.psi.size))
    rep = limit_contrast(seq, M, R, None, ct)
    assert np.min(rep.lhs_amplitude[rep.n[:-1] >= 5]) >= 1.9


def test_contrast_resonant_control(density):
    c = 1.3
    a = 2 * math.pi / c
    ct = cohomology_residual(a, M, constant_roof(c), density=density)
    s = np.linspace(1.0, 30.0, 30)
    rep = limit_contrast(s, M, constant_roof(c), a, ct)
    assert np.max(rep.lhs_amplitude) < 1e-9 and np.max(rep.rhs_variation) < 1e-9
    assert not rep.contradiction()
