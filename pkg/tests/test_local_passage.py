import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lorenzmix.errors import ExpandingConditionError, PreconditionError, UndefinedPointError
from lorenzmix.local_passage import (CubeFace, PassageExponents, integrate_linear_passage, passage_exponents,
                                     passage_face, passage_map, passage_time)
from lorenzmix.ode_flow import OriginSpectrum, origin_spectrum

SPEC = origin_spectrum()
E = passage_exponents(SPEC)
LU = (-11 + math.sqrt(1201)) / 2

entry = st.floats(-1.0, 1.0, allow_nan=False).filter(lambda v: abs(v) > 1e-12)


def test_lorenz_exponents():
    assert E.alpha == pytest.approx((8 / 3) / LU, rel=1e-12)
    assert E.beta == pytest.approx(((11 + math.sqrt(1201)) / 2) / LU, rel=1e-12)
    assert abs(E.alpha - 0.2254) < 1e-4 and abs(E.beta - 1.9300) < 1e-4


def test_ratio_exponents():
    e = passage_exponents(OriginSpectrum(-4.0, -1.0, 2.0))
    assert (e.alpha, e.beta) == (0.5, 2.0)
    e = passage_exponents(OriginSpectrum(-2.0, -1.0, 2.0))
    assert (e.alpha, e.beta) == (0.5, 1.0)


def test_expanding_condition_boundary():
    with pytest.raises(ExpandingConditionError):
        passage_exponents(OriginSpectrum(-3.0, -2.0, 2.0))
    with pytest.raises(ExpandingConditionError):
        PassageExponents(1.0, 1.0)


@pytest.mark.parametrize("x1, x2, want", [(1.0, 0.7, (1, 0.7, 1.0)), (-1.0, 0.3, (-1, 0.3, 1.0))])
def test_passage_map_unit_entry(x1, x2, want):
    assert passage_map(x1, x2, E) == want


def test_passage_map_half_height():
    _, _, z = passage_map(2.0 ** (-1 / E.alpha), 0.0, E)
    assert z == pytest.approx(0.5, rel=1e-14)


def test_passage_map_undefined_on_stable_manifold():
    with pytest.raises(UndefinedPointError):
        passage_map(0.0, 0.5, E)
    with pytest.raises(PreconditionError):
        passage_map(1.5, 0.5, E)


def test_passage_time_values():
    assert passage_time(1.0, SPEC) == 0.0 and passage_time(-1.0, SPEC) == 0.0
    assert passage_time(math.exp(-SPEC.lambda_u), SPEC) == pytest.approx(1.0, rel=1e-14)
    assert passage_time(1e-6, SPEC) == pytest.approx(math.log(1e6) / 11.8277, rel=1e-5)
    assert round(passage_time(1e-6, SPEC), 3) == 1.168
    with pytest.raises(UndefinedPointError):
        passage_time(0.0, SPEC)


def test_face_bounds():
    f = passage_face(0.3, -0.4, SPEC)
    assert isinstance(f, CubeFace) and f.sign == 1
    with pytest.raises(PreconditionError):
        CubeFace(0.1, 0.1, 1, 1.2, 0.5)


@settings(max_examples=200, deadline=None)
@given(entry, entry)
def test_passage_odd_symmetry(x1, x2):
    s, y, z = passage_map(x1, x2, E)
    s2, y2, z2 = passage_map(-x1, -x2, E)
    assert (s2, y2, z2) == (-s, -y, z)


@settings(max_examples=200, deadline=None)
@given(entry, entry)
def test_passage_time_decreasing_in_modulus(a, b):
    if abs(a) < abs(b):
        assert passage_time(a, SPEC) > passage_time(b, SPEC)


def test_passage_matches_linear_flow(rng):
    worst = 0.0
    for x1, x2 in rng.uniform(-1, 1, size=(200, 2)):
        s, y, z = passage_map(x1, x2, E)
        out = integrate_linear_passage(x1, x2, SPEC)
        worst = max(worst, abs(out[0] - s), abs(out[1] - y), abs(out[2] - z))
    assert worst < 1e-10
