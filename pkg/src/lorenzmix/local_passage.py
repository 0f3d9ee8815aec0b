"""Closed-form passage through the linearised neighbourhood of the origin.

In linearising coordinates the flow near 0 is
``(x1, x2, x3) -> (e^{l_u t} x1, e^{l_ss t} x2, e^{l_s t} x3)``.  A point on the
top face ``x3 = 1`` with ``x1 != 0`` leaves through the side face ``|x1| = 1``
after time ``-ln|x1| / l_u``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _rk
from .errors import DivergenceError, ExpandingConditionError, PreconditionError, UndefinedPointError
from .ode_flow import OriginSpectrum

__all__ = [
    "PassageExponents",
    "CubeFace",
    "passage_exponents",
    "passage_map",
    "passage_time",
    "integrate_linear_passage",
]


@dataclass(frozen=True)
class PassageExponents:
    alpha: float
    beta: float

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ExpandingConditionError(f"alpha = {self.alpha} is not in (0, 1)")
        if not self.beta > 0.0:
            raise PreconditionError(f"beta = {self.beta} must be positive")


@dataclass(frozen=True)
class CubeFace:
    """Entry point ``(x1, x2)`` on the top face and the exit data ``(sign, y2, y3)``."""

    x1: float
    x2: float
    sign: int
    y2: float
    y3: float

    def __post_init__(self):
        for name in ("x1", "x2", "y2", "y3"):
            if abs(getattr(self, name)) > 1.0:
                raise PreconditionError(f"{name} = {getattr(self, name)} is outside [-1, 1]")


def passage_exponents(spec: OriginSpectrum) -> PassageExponents:
    """``alpha = |l_s|/l_u`` and ``beta = |l_ss|/l_u``.

    Raises ``ExpandingConditionError`` when ``l_u > |l_s|`` fails.
    """
    if not (spec.lambda_u > 0 and spec.lambda_s < 0 and spec.lambda_ss < 0):
        raise PreconditionError(f"spectrum {spec.eigenvalues} is not a saddle with one unstable direction")
    alpha = abs(spec.lambda_s) / spec.lambda_u
    if alpha >= 1.0:
        raise ExpandingConditionError(
            f"lambda_u = {spec.lambda_u} does not exceed |lambda_s| = {abs(spec.lambda_s)} (alpha = {alpha})")
    return PassageExponents(alpha, abs(spec.lambda_ss) / spec.lambda_u)


def _check_entry(x1: float, x2: float = 0.0):
    if not (math.isfinite(x1) and math.isfinite(x2)):
        raise PreconditionError("non-finite entry coordinates")
    if x1 == 0.0:
        raise UndefinedPointError("x1 = 0 lies on the stable manifold of the origin; passage undefined")
    if abs(x1) > 1.0 or abs(x2) > 1.0:
        raise PreconditionError(f"entry ({x1}, {x2}) is outside the face |x1|, |x2| <= 1")


def passage_map(x1: float, x2: float, e: PassageExponents) -> tuple[int, float, float]:
    """``(sgn x1, |x1|^beta x2, |x1|^alpha)``."""
    _check_entry(x1, x2)
    a = abs(x1)
    return (1 if x1 > 0 else -1), a ** e.beta * x2, a ** e.alpha


def passage_time(x1: float, spec: OriginSpectrum) -> float:
    """Flight time ``-ln|x1| / l_u`` from the top face to the exit face."""
    if x1 == 0.0:
        raise UndefinedPointError("x1 = 0: infinite flight time")
    _check_entry(x1)
    return -math.log(abs(x1)) / spec.lambda_u


def passage_face(x1: float, x2: float, spec: OriginSpectrum) -> CubeFace:
    s, y2, y3 = passage_map(x1, x2, passage_exponents(spec))
    return CubeFace(x1, x2, s, y2, y3)


def integrate_linear_passage(x1: float, x2: float, spec: OriginSpectrum,
                             rtol: float = 1e-13, atol: float = 1e-15) -> np.ndarray:
    """Integrate the linear system numerically for ``passage_time(x1)``.

    Independent of the closed form; used to cross-check ``passage_map``.
    Returns the state ``(x1, x2, x3)`` at the exit time.
    """
    t = passage_time(x1, spec)
    y0 = np.array([x1, x2, 1.0])
    if t == 0.0:
        return y0
    rates = np.array([spec.lambda_u, spec.lambda_ss, spec.lambda_s])
    ts, ys, _, nrec, _, _, _, status = _rk.integrate_kernel(
        _rk.MODEL_LINEAR, y0, 0.0, t, rates, rtol, atol, 10_000_000, t, 4)
    if status != _rk.STATUS_OK:
        raise DivergenceError(f"linear passage integration failed with status {status}")
    return ys[nrec - 1].copy()
