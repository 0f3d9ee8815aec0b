"""Empirical one-dimensional maps and roofs fitted to section data of the flow.

The classical surrogate for the quotient map is the successive-maxima map:
consecutive local maxima ``z_n -> z_{n+1}`` of ``z(t)`` form a cusp map with
an increasing left branch and a decreasing right branch.  Crossings of the
plane ``z = rho - 1`` give a discontinuous map in the ``x`` coordinate
instead.  Both are handled by the same fit: split at the singular point,
isotonic regression per branch, a MAD outlier filter, medians over quantile
bins, and a monotone cubic (PCHIP) interpolant through the medians.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.optimize import isotonic_regression

from .errors import ExtractionError, PreconditionError, UndefinedPointError
from .lorenz_map import IntervalMap, LorenzLikeMap
from .ode_flow import (IntegratorConfig, LorenzParams, Section, attractor_point, section_events)
from .roof import RoofFunction

__all__ = [
    "EmpiricalMap",
    "EmpiricalRoof",
    "BranchFit",
    "RoofSideFit",
    "extract_map",
    "extract_roof",
    "lorenz_section_data",
    "synthetic_events",
    "MIN_EVENTS",
]

MIN_EVENTS = 10_000
_COORD = {"x": 0, "y": 1, "z": 2}


@dataclass
class BranchFit:
    side: int
    increasing: bool
    knots_x: np.ndarray
    knots_y: np.ndarray
    n_pairs: int
    n_kept: int
    mad: float
    raw_violation_fraction: float
    violation_fraction: float
    interp: PchipInterpolator = field(repr=False)


@dataclass
class EmpiricalMap(IntervalMap):
    """Two monotone branches on ``[lo, hi]`` separated at ``c``.

    ``limits`` holds the one-sided values at ``c``; outputs are clipped to
    ``[lo, hi]`` so that the map sends its domain into itself.
    """

    left: BranchFit
    right: BranchFit
    limits: tuple[float, float]
    lo: float = -1.0
    hi: float = 1.0
    c: float = 0.0
    coordinate: str = "z"
    continuous: bool = False

    def _branch(self, side: int) -> BranchFit:
        return self.left if side < 0 else self.right

    def eval(self, x):
        xa = np.asarray(x, dtype=float)
        if np.any(xa == self.c):
            raise UndefinedPointError("empirical map is undefined at its singular point")
        out = np.where(xa < self.c, self.left.interp(np.clip(xa, self.lo, self.c)),
                       self.right.interp(np.clip(xa, self.c, self.hi)))
        out = np.clip(out, self.lo, self.hi)
        return float(out) if np.ndim(x) == 0 else out

    def deriv(self, x):
        xa = np.asarray(x, dtype=float)
        out = np.where(xa < self.c, self.left.interp(np.clip(xa, self.lo, self.c), 1),
                       self.right.interp(np.clip(xa, self.c, self.hi), 1))
        return float(out) if np.ndim(x) == 0 else out

    def limit(self, side: int) -> float:
        return self.limits[0] if side < 0 else self.limits[1]

    def increasing(self, side: int) -> bool:
        return self._branch(side).increasing

    def leo_target(self) -> tuple[float, float]:
        """``(c, largest one-sided limit)``, the analogue of ``(0, 1)`` for the family."""
        return (self.c, min(self.hi, max(self.limits)))

    @property
    def violation_fraction(self) -> float:
        n = self.left.knots_x.size + self.right.knots_x.size - 2
        bad = (self.left.violation_fraction * (self.left.knots_x.size - 1)
               + self.right.violation_fraction * (self.right.knots_x.size - 1))
        return float(bad / max(n, 1))

    @property
    def raw_violation_fraction(self) -> float:
        n = self.left.n_pairs + self.right.n_pairs
        return float((self.left.raw_violation_fraction * self.left.n_pairs
                      + self.right.raw_violation_fraction * self.right.n_pairs) / max(n, 1))

    def local_exponent(self, side: int, window: float = 0.1) -> float:
        """Slope of ``log|f'|`` against ``log|x - c|`` over the inner ``window`` of a branch.

        Near a power-law cusp this estimates ``alpha - 1``.
        """
        b = self._branch(side)
        xs = b.knots_x
        d = np.abs(xs - self.c)
        ext = (self.c - self.lo) if side < 0 else (self.hi - self.c)
        sel = (d > 0) & (d < window * ext)
        if sel.sum() < 4:
            raise ExtractionError("too few knots near the singular point for an exponent fit")
        g = np.abs(b.interp(xs[sel], 1))
        ok = g > 0
        return float(np.polyfit(np.log(d[sel][ok]), np.log(g[ok]), 1)[0])


def _coordinate(points, coordinate: str) -> np.ndarray:
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        return pts
    if coordinate not in _COORD:
        raise PreconditionError(f"unknown coordinate {coordinate!r}")
    return pts[:, _COORD[coordinate]]


def _split(xs: np.ndarray, ys: np.ndarray) -> tuple[float, bool]:
    """Singular point from inputs sorted ascending: a jump if present, otherwise the peak."""
    dy = np.abs(np.diff(ys))
    span = np.ptp(ys)
    j = int(np.argmax(dy))
    if dy[j] > 0.5 * span:
        return 0.5 * (xs[j] + xs[j + 1]), False
    k = int(np.argmax(ys))
    return float(xs[k]), True


def _fit_branch(x: np.ndarray, y: np.ndarray, side: int, n_bins: int, mad_factor: float) -> BranchFit:
    n = x.size
    if n < 20:
        raise ExtractionError(f"branch {side:+d} has only {n} pairs")
    inc = bool(np.corrcoef(np.arange(n), y)[0, 1] >= 0)
    sgn = 1.0 if inc else -1.0
    raw_viol = float(np.mean(sgn * np.diff(y) < 0))
    res = y - isotonic_regression(y, increasing=inc).x
    med = np.median(res)
    mad = float(np.median(np.abs(res - med)))
    keep = np.abs(res - med) <= mad_factor * mad if mad > 0 else np.abs(res - med) <= 1e-12 * max(1.0, np.abs(y).max())
    xk, yk = x[keep], y[keep]
    nb = max(4, min(n_bins, xk.size // 20))
    edges = np.unique(np.quantile(np.arange(xk.size), np.linspace(0, 1, nb + 1)).astype(int))
    kx, ky = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        if b > a:
            kx.append(np.median(xk[a:b]))
            ky.append(np.median(yk[a:b]))
    kx, ky = np.array(kx), np.array(ky)
    ux = np.concatenate([[True], np.diff(kx) > 0])
    kx, ky = kx[ux], ky[ux]
    viol = float(np.mean(sgn * np.diff(ky) < 0)) if ky.size > 1 else 0.0
    ky_mono = isotonic_regression(ky, increasing=inc).x
    return BranchFit(side, inc, kx, ky_mono, n, int(keep.sum()), mad, raw_viol, viol,
                     PchipInterpolator(kx, ky_mono, extrapolate=True))


def _side_limit(b: BranchFit, c: float) -> float:
    """Linear extrapolation of the two knots nearest ``c``."""
    if b.side < 0:
        (x0, x1), (y0, y1) = b.knots_x[-2:], b.knots_y[-2:]
    else:
        (x1, x0), (y1, y0) = b.knots_x[:2], b.knots_y[:2]
    return float(y1 + (y1 - y0) * (c - x1) / (x1 - x0)) if x1 != x0 else float(y1)


def extract_map(points, coordinate: str = "z", n_bins: int = 200, mad_factor: float = 3.0,
                max_violation: float = 0.01, min_events: int = MIN_EVENTS) -> EmpiricalMap:
    """Empirical map from consecutive section coordinates ``(w_n, w_{n+1})``.

    ``points`` is an ``(N, 3)`` array of section points (``coordinate`` picks
    the column) or a 1-D sequence of coordinates.  Monotonicity is reported at
    two levels: the raw fraction of adjacent sorted pairs in the wrong order,
    which includes the transverse thickness of the attractor, and the fraction
    of adjacent bin medians in the wrong order after filtering, which is what
    ``max_violation`` bounds.
    """
    w = _coordinate(points, coordinate)
    if w.size < min_events:
        raise PreconditionError(f"need at least {min_events} section events, got {w.size}")
    if not np.all(np.isfinite(w)):
        raise PreconditionError("section coordinates must be finite")
    x, y = w[:-1], w[1:]
    order = np.argsort(x, kind="stable")
    xs, ys = x[order], y[order]
    c, continuous = _split(xs, ys)
    L, R = xs < c, xs > c
    left = _fit_branch(xs[L], ys[L], -1, n_bins, mad_factor)
    right = _fit_branch(xs[R], ys[R], 1, n_bins, mad_factor)
    lo, hi = float(min(xs[0], ys.min())), float(max(xs[-1], ys.max()))
    lims = [_side_limit(left, c), _side_limit(right, c)]
    if continuous:
        lims = [float(ys.max())] * 2
    lims = [float(np.clip(v, lo, hi)) for v in lims]
    em = EmpiricalMap(left, right, (lims[0], lims[1]), lo, hi, float(c), coordinate, continuous)
    worst = max(left.violation_fraction, right.violation_fraction)
    if worst > max_violation:
        raise ExtractionError(f"branch data not monotone: {worst:.3%} of bin medians out of order "
                              f"(threshold {max_violation:.3%})")
    return em


@dataclass
class RoofSideFit:
    side: int
    slope: float
    intercept: float
    n: int
    rms_residual: float
    window: float


@dataclass
class EmpiricalRoof:
    """``r(x) = -a ln|x - x0| + b`` fitted separately on each side of ``x0``."""

    x0: float
    left: RoofSideFit
    right: RoofSideFit
    flat: bool

    @property
    def slope(self) -> float:
        return 0.5 * (self.left.slope + self.right.slope)

    @property
    def lambda_u_hat(self) -> float:
        return 1.0 / self.slope if self.slope > 0 else math.inf

    def __call__(self, x):
        xa = np.asarray(x, dtype=float)
        d = np.abs(xa - self.x0)
        with np.errstate(divide="ignore"):
            out = np.where(xa < self.x0, -self.left.slope * np.log(d) + self.left.intercept,
                           -self.right.slope * np.log(d) + self.right.intercept)
        return float(out) if np.ndim(x) == 0 else out

    def as_roof(self) -> RoofFunction:
        """Symmetric :class:`RoofFunction` with the averaged coefficients."""
        return RoofFunction(max(self.slope, 0.0), 0.5 * (self.left.intercept + self.right.intercept),
                            x0=self.x0)


def extract_roof(points, flight_times, x0: float, coordinate: str = "z", window: float = 0.03,
                 inner: float = 1e-2, flat_tol: float = 1e-6) -> EmpiricalRoof:
    """Least-squares fit of flight times against ``-ln|w - x0|`` per side.

    ``flight_times[n]`` is the time from event ``n`` to event ``n + 1``;
    ``window`` is the fitting half-width as a fraction of each side's extent;
    distances below ``inner * window`` are left out, since there the error in
    the estimate of ``x0`` dominates ``ln|w - x0|``.
    A slope below ``-flat_tol`` is a model mismatch; ``|slope| <= flat_tol`` on
    both sides flags the roof as flat (no singularity).
    """
    w = _coordinate(points, coordinate)
    r = np.asarray(flight_times, dtype=float)
    if r.size == w.size - 1:
        w = w[:-1]
    if r.size != w.size:
        raise PreconditionError("flight_times must align with the section events")
    if not np.all(np.isfinite(r)) or np.any(r <= 0):
        raise PreconditionError("flight times must be positive and finite")
    fits = []
    for side in (-1, 1):
        sel = (w < x0) if side < 0 else (w > x0)
        d = np.abs(w[sel] - x0)
        if d.size < 10:
            raise ExtractionError(f"too few events on side {side:+d} of the singular point")
        width = window * d.max()
        near = (d < width) & (d > inner * width)
        if near.sum() < 10:
            near = d <= np.sort(d)[min(d.size - 1, 99)]
            width = float(d[near].max())
        A = np.column_stack([-np.log(d[near]), np.ones(near.sum())])
        coef, *_ = np.linalg.lstsq(A, r[sel][near], rcond=None)
        rms = float(np.sqrt(np.mean((A @ coef - r[sel][near]) ** 2)))
        fits.append(RoofSideFit(side, float(coef[0]), float(coef[1]), int(near.sum()), rms, float(width)))
    flat = all(abs(f.slope) <= flat_tol for f in fits)
    if not flat:
        for f in fits:
            if f.slope < -flat_tol:
                raise ExtractionError(f"negative roof slope {f.slope:.4g} on side {f.side:+d}: "
                                      "flight times do not grow toward the singular point")
    return EmpiricalRoof(float(x0), fits[0], fits[1], flat)


def lorenz_section_data(n_events: int, p: LorenzParams = LorenzParams(), section: Section = Section("zmax"),
                        cfg: IntegratorConfig = IntegratorConfig(), burn_in: float = 50.0, s0=(1.0, 1.0, 1.0)):
    """``(points, flight_times)`` for ``n_events`` crossings after a burn-in.

    ``flight_times[n]`` is the time between crossing ``n`` and ``n + 1``, so it
    has one entry fewer than ``points``.
    """
    start = attractor_point(p, burn_in, s0, cfg)
    t, pts = section_events(start, n_events, section, p, cfg)
    return pts, np.diff(t)


def synthetic_events(m: LorenzLikeMap, r: RoofFunction, n: int, x0: float = 0.3141592653589793,
                     burn_in: int = 100):
    """Orbit ``x_k`` of ``m`` with flight times ``r(x_k)``; returns ``(x, flight_times)``."""
    x = np.empty(n + burn_in)
    v = float(x0)
    for k in range(n + burn_in):
        x[k] = v
        v = m.eval(v)
        if v == 0.0:
            raise ExtractionError("synthetic orbit hit the singular point")
    x = x[burn_in:]
    return x, np.asarray(r(x[:-1]), dtype=float)
