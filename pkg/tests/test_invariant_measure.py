import math

import numpy as np
import pytest

from lorenzmix.errors import PreconditionError
from lorenzmix.invariant_measure import (UlamDensity, birkhoff_histogram, l1_distance, neg_log_integral,
                                         pushforward, roof_integral, roof_moment, stationary_density,
                                         ulam_matrix)
from lorenzmix.lorenz_map import LorenzLikeMap, sanity_map
from lorenzmix.roof import RoofFunction, constant_roof, default_roof, unit_log_roof

M = LorenzLikeMap()
S = sanity_map()


def uniform(n):
    return UlamDensity(np.linspace(-1, 1, n + 1), np.full(n, 0.5), 0.0)


@pytest.mark.parametrize("n", [16, 64, 256, 1024])
def test_sanity_rows_split_in_half(n):
    P, _ = ulam_matrix(S, n)
    P = P.tocsr()
    for i in range(n):
        row = P.getrow(i)
        assert row.nnz == 2 and np.all(row.data == 0.5)


@pytest.mark.parametrize("n", [16, 128, 2048])
def test_sanity_density_is_uniform(n):
    P, cells = ulam_matrix(S, n)
    d = stationary_density(P, cells.src_edges)
    assert l1_distance(d, uniform(n)) < 1e-10


def test_row_sums_defaults():
    P, _ = ulam_matrix(M, 1024)
    assert np.max(np.abs(np.asarray(P.sum(axis=1)).ravel() - 1.0)) < 1e-12


def test_straddling_bin_splits():
    # with an odd bin count the middle bin contains 0
    P, cells = ulam_matrix(M, 17)
    mid = P.tocsr().getrow(8)
    images = cells.dst_edges[mid.indices]
    assert images.min() < -0.5 and images.max() > 0.5
    assert mid.sum() == pytest.approx(1.0, abs=1e-14)


def test_small_bin_count_rejected():
    with pytest.raises(PreconditionError):
        ulam_matrix(M, 8)


def test_density_invariants(density):
    assert np.all(density.density >= 0)
    assert abs(density.total - 1.0) < 1e-12
    assert density.residual < 1e-10
    assert density.mirrored_l1 < 1e-3


def test_unique_fixed_point(rng):
    P, cells = ulam_matrix(M, 512)
    base = stationary_density(P, cells.src_edges, tol=1e-12)
    for _ in range(5):
        d = stationary_density(P, cells.src_edges, tol=1e-12, start=rng.uniform(size=512))
        assert l1_distance(d, base) < 2e-12 * 10


def test_density_positive_near_y(density):
    c = density.centers
    # f^2 of (-0.5, 0.5) already contains [-0.95, 0.95]
    inner = np.abs(c) < 0.9
    assert np.all(density.density[inner] > 0)


def test_pushforward_invariance(density, fmap):
    img = pushforward(density, fmap, density.edges, refine=2)
    assert l1_distance(img, density) <= 2 * max(density.residual, 1e-12)


def test_birkhoff_sanity_uniform():
    h = birkhoff_histogram(S, 1_000_000, 64, seed=1)
    assert l1_distance(h, uniform(64)) < 0.02


def test_birkhoff_matches_ulam():
    P, cells = ulam_matrix(M, 1024)
    d = stationary_density(P, cells.src_edges)
    h = birkhoff_histogram(M, 10_000_000, 1024, seed=2)
    assert l1_distance(h, d) < 0.05


def test_birkhoff_converges_with_length():
    P, cells = ulam_matrix(M, 256)
    d = stationary_density(P, cells.src_edges)
    a = [l1_distance(birkhoff_histogram(M, 100_000, 256, seed=s), d) for s in range(10)]
    b = [l1_distance(birkhoff_histogram(M, 200_000, 256, seed=s), d) for s in range(10)]
    assert np.median(b) <= np.median(a)


def test_birkhoff_restart_on_zero():
    # 0.75 -> 0.5 -> 0 under the sanity map in exact arithmetic
    h = birkhoff_histogram(S, 1000, 16, x0=0.75, burn_in=0, segment=0)
    assert h.restarts >= 1 and h.density.sum() * 2 / 16 == pytest.approx(1.0)


def test_birkhoff_deterministic():
    a = birkhoff_histogram(M, 100_000, 64, seed=5)
    b = birkhoff_histogram(M, 100_000, 64, seed=5)
    assert np.array_equal(a.density, b.density)


def test_neg_log_integral_oracle():
    assert neg_log_integral(0.0, 1.0) == pytest.approx(1.0, abs=1e-15)
    assert neg_log_integral(-1.0, 1.0) == pytest.approx(2.0, abs=1e-15)
    a, b = 0.2, 0.7
    exact = (b - b * math.log(b)) - (a - a * math.log(a))
    assert neg_log_integral(a, b) == pytest.approx(exact, rel=1e-14)


def test_roof_integral_constant(density):
    assert roof_integral(density, constant_roof(1.0)).integral_r == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("n", [16, 1024, 4096])
def test_roof_integral_log_uniform(n):
    assert abs(roof_integral(uniform(n), unit_log_roof()).integral_r - 1.0) < 1e-10


def test_roof_integral_linearity(density):
    r = default_roof()
    log_part = roof_integral(density, unit_log_roof()).integral_r
    assert roof_integral(density, r).integral_r == pytest.approx(r.coef * log_part + 1.0, rel=1e-13)


def test_roof_integral_callable_smooth_part(density):
    r = RoofFunction(default_roof().coef, lambda x: 1.0 + 0.0 * x)
    assert roof_integral(density, r).integral_r == pytest.approx(roof_integral(density, default_roof()).integral_r,
                                                                 rel=1e-8)


def test_roof_moment_uniform():
    # int_0^1 ln^2 x dx = 2
    assert roof_moment(uniform(64), unit_log_roof(), 2) == pytest.approx(2.0, rel=1e-12)
