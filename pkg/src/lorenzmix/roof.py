"""Roof functions with a logarithmic singularity at the discontinuity."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import PreconditionError, UndefinedPointError

__all__ = ["RoofFunction", "default_roof", "constant_roof", "unit_log_roof"]


@dataclass(frozen=True)
class RoofFunction:
    """``r(x) = coef * (-ln|x - x0|) + r1(x)``.

    ``coef`` is ``1/lambda_u`` for the geometric model.  ``r1`` is a float (a
    constant smooth part, which keeps several integrals in closed form) or a
    bounded smooth callable.  ``log_modulus`` is the constant C in
    ``|r(x) - r(y)| <= C |ln|x| - ln|y||`` for same-sign pairs.
    """

    coef: float
    r1: float | Callable[[np.ndarray], np.ndarray] = 1.0
    log_modulus: float | None = None
    x0: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.coef) and self.coef >= 0):
            raise PreconditionError("roof coefficient must be finite and non-negative")
        if not callable(self.r1) and not math.isfinite(self.r1):
            raise PreconditionError("smooth part of the roof must be finite")

    @property
    def r1_is_constant(self) -> bool:
        return not callable(self.r1)

    @property
    def is_constant(self) -> bool:
        return self.coef == 0.0 and self.r1_is_constant

    @property
    def C(self) -> float:
        return self.log_modulus if self.log_modulus is not None else max(self.coef, 1e-300)

    def smooth(self, x):
        if callable(self.r1):
            return np.asarray(self.r1(x), dtype=float)
        return np.full(np.shape(x), float(self.r1))

    def __call__(self, x):
        if np.ndim(x) == 0 and not callable(self.r1):
            d = abs(float(x) - self.x0)
            if self.coef == 0.0:
                return float(self.r1)
            if d == 0.0:
                raise UndefinedPointError("roof is infinite at the singular point")
            return -self.coef * math.log(d) + float(self.r1)
        xa = np.asarray(x, dtype=float)
        d = np.abs(xa - self.x0)
        if self.coef > 0 and np.any(d == 0):
            raise UndefinedPointError("roof is infinite at the singular point")
        with np.errstate(divide="ignore"):
            sing = -self.coef * np.log(d) if self.coef > 0 else np.zeros_like(d)
        out = sing + self.smooth(xa)
        return float(out) if np.ndim(x) == 0 else out

    def log_inverse(self, b: float, side: int = 1):
        """Point ``x`` on the given side with ``r(x) = b``, closed form for constant ``r1``."""
        if not (self.r1_is_constant and self.coef > 0):
            raise PreconditionError("closed-form inverse needs a log roof with constant smooth part")
        return self.x0 + side * math.exp(-(b - float(self.r1)) / self.coef)

    def check_log_modulus(self, n_pairs: int = 10_000, rng=None, domain=(-1.0, 1.0)) -> float:
        """Largest observed ``|r(x)-r(y)| / |ln|x| - ln|y||`` over random same-sign pairs."""
        rng = np.random.default_rng(rng)
        lo, hi = domain
        worst = 0.0
        for side, (a, b) in ((-1, (lo, self.x0)), (1, (self.x0, hi))):
            # log-uniform distances resolve the singular end
            d_max = abs(b - a)
            u = np.exp(rng.uniform(math.log(d_max) - 30.0, math.log(d_max), size=(n_pairs // 2, 2)))
            x = self.x0 + side * u
            num = np.abs(self(x[:, 0]) - self(x[:, 1]))
            den = np.abs(np.log(u[:, 0]) - np.log(u[:, 1]))
            ok = den > 1e-12
            if ok.any():
                worst = max(worst, float(np.max(num[ok] / den[ok])))
        return worst


def default_roof(lambda_u: float | None = None, r1: float = 1.0) -> RoofFunction:
    """``-ln|x| / lambda_u + r1`` with the Lorenz value of ``lambda_u`` by default."""
    if lambda_u is None:
        from .ode_flow import origin_spectrum
        lambda_u = origin_spectrum().lambda_u
    if not lambda_u > 0:
        raise PreconditionError("lambda_u must be positive")
    return RoofFunction(1.0 / lambda_u, r1)


def constant_roof(c: float) -> RoofFunction:
    if not c > 0:
        raise PreconditionError("constant roof must be positive")
    return RoofFunction(0.0, float(c))


def unit_log_roof() -> RoofFunction:
    """``r(x) = -ln|x|``."""
    return RoofFunction(1.0, 0.0)
