"""Lorenz-like expanding interval maps and the checks that go with them.

The parametric family is ``f(x) = sgn(x) (theta |x|^alpha - 1)`` on
``[-1, 1] \\ {0}``.  With ``alpha = 1, theta = 2`` it is the piecewise linear
map ``2x - sgn(x)`` used throughout as a sanity case.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConvergenceError, PreconditionError, UndefinedPointError

__all__ = [
    "IntervalMap",
    "LorenzLikeMap",
    "sanity_map",
    "ExpansionReport",
    "IntervalCover",
    "LeoResult",
    "check_conditions",
    "check_leo",
    "leo_sufficiency",
]

SQRT2 = math.sqrt(2.0)
# inward padding applied to computed (not exact) image endpoints
LEO_PAD = 1e-14


class IntervalMap:
    """Two-branch piecewise monotone map of ``[lo, hi]`` with a singular point ``c``.

    Subclasses provide ``eval``, ``deriv`` and ``limit(side)``, the one-sided
    limit of the map at ``c``, plus the orientation of each branch.
    """

    lo: float = -1.0
    hi: float = 1.0
    c: float = 0.0

    def eval(self, x):
        raise NotImplementedError

    def deriv(self, x):
        raise NotImplementedError

    def limit(self, side: int) -> float:
        raise NotImplementedError

    def increasing(self, side: int) -> bool:
        return True

    def leo_target(self) -> tuple[float, float]:
        """Interval every open set must eventually cover; ``(0, 1)`` for the family."""
        return (self.c, self.hi)

    def side_of(self, x: float) -> int:
        if x == self.c:
            raise UndefinedPointError("map is undefined at its singular point")
        return 1 if x > self.c else -1

    def branch_image(self, a: float, b: float, side: int) -> tuple[float, float, bool, bool]:
        """Image of ``(a, b)`` inside one branch.

        Returns ``(lo, hi, lo_exact, hi_exact)``; an endpoint is exact when it is
        a one-sided limit at the singular point.
        """
        ends = []
        for x in (a, b):
            if x == self.c:
                ends.append((self.limit(side), True))
            else:
                ends.append((float(self.eval(x)), False))
        if not self.increasing(side):
            ends.reverse()
        (l, le), (h, he) = ends
        return l, h, le, he


@dataclass(frozen=True)
class LorenzLikeMap(IntervalMap):
    alpha: float = 0.75
    theta: float = 1.95

    def __post_init__(self):
        if not (0.0 < self.alpha <= 1.0):
            raise PreconditionError(f"alpha = {self.alpha} must lie in (0, 1]")
        if not (0.0 < self.theta <= 2.0):
            raise PreconditionError(f"theta = {self.theta} must lie in (0, 2] so that f maps into [-1, 1]")

    def eval(self, x):
        xa = np.asarray(x, dtype=float)
        if np.any(xa == 0.0):
            raise UndefinedPointError("f is undefined at 0")
        out = np.sign(xa) * (self.theta * np.abs(xa) ** self.alpha - 1.0)
        return float(out) if np.ndim(x) == 0 else out

    def eval_unchecked(self, x: np.ndarray) -> np.ndarray:
        return np.sign(x) * (self.theta * np.abs(x) ** self.alpha - 1.0)

    def deriv(self, x):
        xa = np.asarray(x, dtype=float)
        if np.any(xa == 0.0):
            raise UndefinedPointError("f' is undefined at 0")
        out = self.theta * self.alpha * np.abs(xa) ** (self.alpha - 1.0)
        return float(out) if np.ndim(x) == 0 else out

    def limit(self, side: int) -> float:
        return -1.0 if side > 0 else 1.0

    def inverse(self, y, side: int):
        """Preimage of ``y`` on the branch ``side`` (+1 right, -1 left)."""
        ya = np.asarray(y, dtype=float)
        if side > 0:
            out = ((ya + 1.0) / self.theta) ** (1.0 / self.alpha)
        else:
            out = -((1.0 - ya) / self.theta) ** (1.0 / self.alpha)
        return float(out) if np.ndim(y) == 0 else out

    def branch_range(self, side: int) -> tuple[float, float]:
        """Image of the whole branch: ``(-1, theta-1]`` on the right."""
        return (-1.0, self.theta - 1.0) if side > 0 else (1.0 - self.theta, 1.0)

    @property
    def min_derivative(self) -> float:
        return self.theta * self.alpha

    def satisfies_definition(self) -> bool:
        """``f(1)`` in ``(0, 1)`` and ``alpha < 1``; the sanity map fails both."""
        return 0.0 < self.theta - 1.0 < 1.0 and self.alpha < 1.0

    def orbit(self, x0: float, n: int) -> np.ndarray:
        out = np.empty(n + 1)
        x = float(x0)
        for k in range(n + 1):
            out[k] = x
            if k < n:
                x = self.eval(x)
        return out


def sanity_map() -> LorenzLikeMap:
    """``f(x) = 2x - sgn(x)``."""
    return LorenzLikeMap(alpha=1.0, theta=2.0)


@dataclass
class ExpansionReport:
    c: float
    tau: float
    min_derivative: float
    per_n_min: np.ndarray
    f3_constant: float
    f3_ratio_range: tuple[float, float]
    grid_size: int
    expanding: bool
    pointwise_expanding: bool

    @property
    def bound_holds(self) -> bool:
        n = np.arange(1, len(self.per_n_min) + 1)
        return bool(np.all(self.per_n_min >= self.c * self.tau ** n * (1 - 1e-12)))


def _grid(m: IntervalMap, n: int) -> np.ndarray:
    # cell midpoints plus the two endpoints of the domain
    edges = np.linspace(m.lo, m.hi, n + 1)
    g = np.concatenate([[m.lo], 0.5 * (edges[:-1] + edges[1:]), [m.hi]])
    return g[g != m.c]


def check_conditions(m: LorenzLikeMap, grid_size: int = 10_000, n_max: int = 20) -> ExpansionReport:
    """Scan a grid for the derivative conditions.

    For each ``n <= n_max`` the minimum of ``|(f^n)'|`` over grid orbits is
    tabulated.  When every entry exceeds 1 the report uses ``c = 1`` and the
    largest ``tau`` with ``min_n >= tau^n``; otherwise ``tau`` comes from a
    least-squares fit of ``log min_n`` against ``n`` and ``c`` is the largest
    constant compatible with it.  ``expanding`` is false when ``tau <= 1``.
    """
    if grid_size < 1000:
        raise PreconditionError("grid size must be at least 10^3")
    if n_max < 1:
        raise PreconditionError("n_max must be positive")
    x = _grid(m, grid_size)
    d1 = np.abs(m.deriv(x))
    min_d = float(d1.min())
    # f(iii): f'(x) / |x|^(alpha-1)
    ratio = d1 / np.abs(x - m.c) ** (getattr(m, "alpha", 1.0) - 1.0)
    rlo, rhi = float(ratio.min()), float(ratio.max())
    C = max(rhi, 1.0 / rlo)

    log_prod = np.zeros_like(x)
    per_n = np.empty(n_max)
    y = x.copy()
    alive = np.ones_like(x, dtype=bool)
    for k in range(n_max):
        alive &= y != m.c
        d = np.abs(m.deriv(np.where(alive, y, 0.5)))
        log_prod = log_prod + np.log(d)
        per_n[k] = float(np.exp(log_prod[alive].min()))
        y = np.where(alive, m.eval(np.where(alive, y, 0.5)), m.c)

    n = np.arange(1, n_max + 1)
    if np.all(per_n > 1.0):
        c, tau = 1.0, float(np.min(per_n ** (1.0 / n)))
    else:
        slope = np.polyfit(n, np.log(per_n), 1)[0]
        tau = float(np.exp(slope))
        c = float(np.min(per_n / tau ** n))
    return ExpansionReport(c, tau, min_d, per_n, C, (rlo, rhi), x.size,
                           expanding=tau > 1.0, pointwise_expanding=min_d > 1.0)


def leo_sufficiency(m: IntervalMap, grid_size: int = 10_000) -> bool:
    """Pointwise ``min |f'| > sqrt(2)``, which is enough for l.e.o."""
    md = getattr(m, "min_derivative", None)
    if md is None:
        md = float(np.min(np.abs(m.deriv(_grid(m, grid_size)))))
    return bool(md > SQRT2)


@dataclass
class IntervalCover:
    """Sorted disjoint open intervals, stored as an ``(n, 2)`` array."""

    parts: np.ndarray = field(default_factory=lambda: np.empty((0, 2)))

    def __post_init__(self):
        p = np.asarray(self.parts, dtype=float).reshape(-1, 2)
        self.parts = p

    @classmethod
    def from_intervals(cls, intervals, max_parts: int = 10_000) -> "IntervalCover":
        iv = [(a, b) for a, b in intervals if b > a]
        if not iv:
            return cls()
        iv.sort()
        merged = [list(iv[0])]
        for a, b in iv[1:]:
            if a < merged[-1][1]:
                merged[-1][1] = max(merged[-1][1], b)
            else:
                merged.append([a, b])
        arr = np.array(merged)
        if arr.shape[0] > max_parts:
            # dropping pieces only shrinks the cover, so certification stays conservative
            keep = np.sort(np.argsort(arr[:, 1] - arr[:, 0])[-max_parts:])
            arr = arr[keep]
        return cls(arr)

    def __len__(self) -> int:
        return self.parts.shape[0]

    @property
    def measure(self) -> float:
        return float(np.sum(self.parts[:, 1] - self.parts[:, 0]))

    def contains(self, a: float, b: float) -> bool:
        return bool(np.any((self.parts[:, 0] <= a) & (self.parts[:, 1] >= b)))

    def image(self, m: IntervalMap, max_parts: int = 10_000, pad: float = LEO_PAD) -> "IntervalCover":
        out = []
        for a, b in self.parts:
            pieces = [(a, m.c, -1), (m.c, b, 1)] if a < m.c < b else [(a, b, m.side_of(0.5 * (a + b)))]
            for lo, hi, side in pieces:
                l, h, le, he = m.branch_image(lo, hi, side)
                out.append((l if le else l + pad, h if he else h - pad))
        return IntervalCover.from_intervals(out, max_parts)


@dataclass
class LeoResult:
    success: bool
    k: int | None
    cover: IntervalCover
    measures: np.ndarray

    @property
    def covered_interval(self) -> tuple[float, float] | None:
        if not self.success:
            return None
        return tuple(float(v) for v in self.cover.parts[np.argmax(self.cover.parts[:, 1] - self.cover.parts[:, 0])])


def check_leo(m: IntervalMap, U: tuple[float, float], k_max: int = 100,
              max_parts: int = 10_000, raise_on_failure: bool = False,
              target: tuple[float, float] | None = None) -> LeoResult:
    """Smallest ``k >= 1`` with ``f^k U`` containing the target interval.

    The target defaults to ``m.leo_target()``, i.e. ``(0, 1)`` for the family.

    Each image is computed branch by branch, with computed endpoints moved
    inward by ``LEO_PAD`` and singular limits used exactly, so success is a
    conservative certificate.  Failure at ``k_max`` is inconclusive.
    """
    a, b = float(U[0]), float(U[1])
    if not b > a:
        raise PreconditionError("U must be a nonempty open interval")
    if a < m.c < b:
        raise PreconditionError("U must not contain the singular point")
    if a < m.lo or b > m.hi:
        raise PreconditionError("U must lie in the domain of the map")
    ta, tb = m.leo_target() if target is None else (float(target[0]), float(target[1]))
    cover = IntervalCover(np.array([[a, b]]))
    measures = []
    for k in range(1, k_max + 1):
        cover = cover.image(m, max_parts)
        measures.append(cover.measure)
        if cover.contains(ta, tb):
            return LeoResult(True, k, cover, np.array(measures))
    if raise_on_failure:
        raise ConvergenceError(f"l.e.o. inconclusive: target not covered after {k_max} iterations")
    return LeoResult(False, None, cover, np.array(measures))
