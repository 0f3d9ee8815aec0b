import math

import numpy as np
import pytest

from lorenzmix.errors import PreconditionError, UndefinedPointError
from lorenzmix.roof import RoofFunction, constant_roof, default_roof, unit_log_roof

LU = (-11 + math.sqrt(1201)) / 2


def test_default_roof_coefficient():
    r = default_roof()
    assert r.coef == pytest.approx(1 / LU, rel=1e-14)
    assert r(1.0) == 1.0
    assert r(1e-6) == pytest.approx(math.log(1e6) / LU + 1.0, rel=1e-14)


def test_roof_positive_and_unbounded():
    r = default_roof()
    x = np.concatenate([-np.logspace(-300, 0, 50), np.logspace(-300, 0, 50)])
    assert np.all(r(x) > 0)
    assert r(1e-300) > 50


def test_roof_undefined_at_singular_point():
    with pytest.raises(UndefinedPointError):
        default_roof()(0.0)
    with pytest.raises(UndefinedPointError):
        default_roof()(np.array([0.1, 0.0]))


def test_log_modulus(rng):
    r = default_roof()
    assert r.check_log_modulus(10_000, rng) <= r.C * (1 + 1e-9)


def test_log_modulus_with_smooth_part(rng):
    r = RoofFunction(0.5, lambda x: 1.0 + 0.1 * np.cos(x), log_modulus=0.6)
    assert r.check_log_modulus(10_000, rng) <= r.C


def test_log_inverse_round_trip():
    r = default_roof()
    for b in (1.5, 3.0, 40.0):
        assert r(r.log_inverse(b)) == pytest.approx(b, rel=1e-13)
        assert r.log_inverse(b, -1) < 0


def test_constant_and_unit_roofs():
    c = constant_roof(1.3)
    assert c.is_constant and c(0.25) == 1.3
    u = unit_log_roof()
    assert u(math.exp(-2.0)) == pytest.approx(2.0, rel=1e-15)
    with pytest.raises(PreconditionError):
        constant_roof(0.0)
    with pytest.raises(PreconditionError):
        RoofFunction(-1.0)
