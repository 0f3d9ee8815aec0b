"""Suspension semiflow of a Lorenz-like map under a log-singular roof.

A state is ``(x, u)`` with ``0 <= u < r(x)``.  The flow adds time to ``u`` and
applies ``(x, r(x)) ~ (f(x), 0)`` as often as needed.  Orbits are advanced
lazily with exact evaluations of ``f`` and ``r``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit, prange

from .errors import BudgetError, PreconditionError, SingularOrbitError
from .invariant_measure import UlamDensity, _bin_integrals, roof_integral
from .lorenz_map import LorenzLikeMap
from .roof import RoofFunction

__all__ = [
    "SuspensionPoint",
    "advance",
    "advance_many",
    "sample_measure",
    "observe",
    "observe_on_grid",
    "base_expectation",
    "SINGULAR_FLOOR",
    "MAX_IDENTIFICATIONS",
]

SINGULAR_FLOOR = 1e-300
MAX_IDENTIFICATIONS = 1_000_000_000

_OK, _SINGULAR, _BUDGET = 0, 1, 2


@dataclass(frozen=True)
class SuspensionPoint:
    base: float
    height: float

    def validate(self, r: RoofFunction):
        if not (math.isfinite(self.base) and math.isfinite(self.height)):
            raise PreconditionError("non-finite suspension point")
        if self.base == r.x0 or abs(self.base) > 1.0:
            raise PreconditionError(f"base {self.base} is not in the domain of the map")
        if not (0.0 <= self.height < r(self.base)):
            raise PreconditionError(f"height {self.height} is outside [0, r(base))")


def _const_r1(r: RoofFunction) -> float:
    if not r.r1_is_constant:
        raise PreconditionError("compiled suspension kernels need a constant smooth part r1")
    return float(r.r1)


@njit(cache=True)
def _roof(x, coef, r1):
    if coef == 0.0:
        return r1
    return -coef * math.log(abs(x)) + r1


@njit(cache=True)
def _advance_kernel(x, u, t, alpha, theta, coef, r1, max_ids):
    u = u + t
    n = 0
    while True:
        rx = _roof(x, coef, r1)
        if u < rx:
            return x, u, n, _OK
        u = u - rx
        if x > 0.0:
            x = theta * x ** alpha - 1.0
        else:
            x = 1.0 - theta * (-x) ** alpha
        n += 1
        if abs(x) < 1e-300:
            return x, u, n, _SINGULAR
        if n >= max_ids:
            return x, u, n, _BUDGET


@njit(cache=True, parallel=True)
def _advance_many_kernel(xs, us, t, alpha, theta, coef, r1, max_ids, status):
    n = xs.shape[0]
    ox = np.empty(n)
    ou = np.empty(n)
    for i in prange(n):
        if status[i] != _OK:
            ox[i] = xs[i]
            ou[i] = us[i]
            continue
        a, b, _, st = _advance_kernel(xs[i], us[i], t, alpha, theta, coef, r1, max_ids)
        ox[i] = a
        ou[i] = b
        status[i] = st
    return ox, ou


def _raise_status(st: int, x: float):
    if st == _SINGULAR:
        raise SingularOrbitError(f"base orbit reached |x| < {SINGULAR_FLOOR:g} (x = {x:g})")
    if st == _BUDGET:
        raise BudgetError("identification budget exhausted")


def advance(p: SuspensionPoint, t: float, m: LorenzLikeMap, r: RoofFunction,
            max_identifications: int = MAX_IDENTIFICATIONS) -> SuspensionPoint:
    """Flow ``p`` forward by ``t >= 0``."""
    if not t >= 0:
        raise PreconditionError("t must be non-negative")
    p.validate(r)
    if r.r1_is_constant:
        x, u, _, st = _advance_kernel(p.base, p.height, float(t), m.alpha, m.theta, r.coef,
                                      float(r.r1), max_identifications)
        _raise_status(st, x)
        return SuspensionPoint(float(x), float(u))
    x, u, n = p.base, p.height + t, 0
    while True:
        rx = r(x)
        if u < rx:
            return SuspensionPoint(x, u)
        u -= rx
        x = m.eval(x)
        n += 1
        if abs(x) < SINGULAR_FLOOR:
            _raise_status(_SINGULAR, x)
        if n >= max_identifications:
            _raise_status(_BUDGET, x)


def advance_many(x: np.ndarray, u: np.ndarray, t: float, m: LorenzLikeMap, r: RoofFunction,
                 status: np.ndarray | None = None, max_identifications: int = MAX_IDENTIFICATIONS):
    """Vectorised ``advance``; singular or over-budget orbits are frozen and flagged in ``status``."""
    x = np.ascontiguousarray(x, dtype=float)
    u = np.ascontiguousarray(u, dtype=float)
    if status is None:
        status = np.zeros(x.shape[0], dtype=np.int64)
    ox, ou = _advance_many_kernel(x, u, float(t), m.alpha, m.theta, r.coef, _const_r1(r),
                                  max_identifications, status)
    return ox, ou, status


def _sample_neg_log(a: np.ndarray, b: np.ndarray, rng) -> np.ndarray:
    """Sample ``|x|`` on ``[a, b]`` (``0 <= a < b <= 1``) with density proportional to ``-ln|x|``.

    For ``a = 0`` the density splits into ``-ln(x/b)`` (the law of ``b U1 U2``)
    plus the constant ``-ln b``; otherwise rejection from the uniform law with
    envelope ``-ln a``.
    """
    out = np.empty(a.shape[0])
    zero = a == 0.0
    if zero.any():
        bz = b[zero]
        w_prod = bz
        w_unif = -bz * np.log(bz)
        pick = rng.uniform(size=bz.size) * (w_prod + w_unif) < w_prod
        v = np.where(pick, bz * rng.uniform(size=bz.size) * rng.uniform(size=bz.size),
                     bz * rng.uniform(size=bz.size))
        out[zero] = v
    idx = np.flatnonzero(~zero)
    while idx.size:
        aa, bb = a[idx], b[idx]
        cand = aa + (bb - aa) * rng.uniform(size=idx.size)
        acc = rng.uniform(size=idx.size) * (-np.log(aa)) <= -np.log(cand)
        out[idx[acc]] = cand[acc]
        idx = idx[~acc]
    return out


def sample_measure(d: UlamDensity, r: RoofFunction, rng=None, size: int = 1) -> tuple[np.ndarray, np.ndarray]:
    """Draw ``size`` points from ``mu x Leb / int r dmu``.

    The bin is chosen with probability proportional to ``int_bin r dmu``, the
    base inside the bin with density proportional to ``r``, and the height
    uniformly on ``[0, r(base))``.  Returns arrays ``(base, height)``.
    """
    rng = np.random.default_rng(rng)
    roof_integral(d, r)  # validates the normaliser
    w = d.density * _bin_integrals(r, d.edges, 1)
    w = np.maximum(w, 0.0)
    cdf = np.cumsum(w)
    cdf /= cdf[-1]
    k = np.minimum(np.searchsorted(cdf, rng.uniform(size=size), side="right"), d.n_bins - 1)
    lo, hi = d.edges[k] - r.x0, d.edges[k + 1] - r.x0
    if r.r1_is_constant:
        # mixture of the log part and the constant part
        lo_abs = np.where(lo >= 0, lo, np.where(hi <= 0, -hi, 0.0))
        hi_abs = np.where(lo >= 0, hi, np.where(hi <= 0, -lo, np.maximum(-lo, hi)))
        from .invariant_measure import neg_log_integral
        w_log = r.coef * neg_log_integral(lo, hi)
        w_const = float(r.r1) * (hi - lo)
        use_log = rng.uniform(size=size) * (w_log + w_const) < w_log
        x = lo + (hi - lo) * rng.uniform(size=size)
        li = np.flatnonzero(use_log)
        if li.size:
            straddle = (lo[li] < 0) & (hi[li] > 0)
            xl = np.empty(li.size)
            # straddling bins: pick a side with probability equal to its log mass, then sample |x|
            side = np.where(lo[li] >= 0, 1.0, -1.0)
            if straddle.any():
                s_idx = np.flatnonzero(straddle)
                mneg = neg_log_integral(lo[li][s_idx], 0.0)
                mpos = neg_log_integral(0.0, hi[li][s_idx])
                side[s_idx] = np.where(rng.uniform(size=s_idx.size) * (mneg + mpos) < mpos, 1.0, -1.0)
                a_ = np.zeros(s_idx.size)
                b_ = np.where(side[s_idx] > 0, hi[li][s_idx], -lo[li][s_idx])
                xl[s_idx] = side[s_idx] * _sample_neg_log(a_, b_, rng)
            ns = np.flatnonzero(~straddle)
            if ns.size:
                xl[ns] = side[ns] * _sample_neg_log(lo_abs[li][ns], hi_abs[li][ns], rng)
            x[li] = xl
        x = x + r.x0
    else:
        # rejection from the uniform law with a padded envelope per bin
        x = np.empty(size)
        idx = np.arange(size)
        grid = np.linspace(0.0, 1.0, 17)
        env = 1.25 * np.max(r(np.clip(lo[:, None] + grid * (hi - lo)[:, None] + r.x0, -1, 1)
                              + np.where(grid == 0, 1e-300, 0.0)), axis=1)
        while idx.size:
            cand = lo[idx] + (hi[idx] - lo[idx]) * rng.uniform(size=idx.size) + r.x0
            acc = rng.uniform(size=idx.size) * env[idx] <= r(cand)
            x[idx[acc]] = cand[acc]
            idx = idx[~acc]
    x = np.where(x == r.x0, r.x0 + 5e-324, x)
    u = rng.uniform(size=size) * r(x)
    return x, u


def observe(p0: SuspensionPoint, h, t_grid, m: LorenzLikeMap, r: RoofFunction) -> np.ndarray:
    """``h(x, u)`` along ``advance(p0, t_i)`` for increasing ``t_grid``."""
    t = np.asarray(t_grid, dtype=float)
    if t.size and (np.any(np.diff(t) < 0) or t[0] < 0):
        raise PreconditionError("t_grid must be non-negative and increasing")
    out = np.empty(t.size)
    p, t_prev = p0, 0.0
    for i, ti in enumerate(t):
        p = advance(p, ti - t_prev, m, r)
        t_prev = ti
        out[i] = h(p.base, p.height)
    return out


@njit(cache=True)
def _grid_kernel(x, u, dt, n, alpha, theta, coef, r1, xs, us):
    for i in range(n):
        xs[i] = x
        us[i] = u
        x, u, _, st = _advance_kernel(x, u, dt, alpha, theta, coef, r1, 1_000_000_000)
        if st != 0:
            return i + 1, st
    return n, 0


def observe_on_grid(p0: SuspensionPoint, dt: float, n: int, m: LorenzLikeMap, r: RoofFunction):
    """States at ``t = 0, dt, ..., (n-1) dt`` as arrays ``(x, u)``; compiled fast path."""
    if not dt > 0:
        raise PreconditionError("dt must be positive")
    p0.validate(r)
    xs = np.empty(n)
    us = np.empty(n)
    k, st = _grid_kernel(p0.base, p0.height, float(dt), int(n), m.alpha, m.theta, r.coef, _const_r1(r), xs, us)
    if st:
        _raise_status(st, xs[k - 1])
    return xs, us


def base_expectation(d: UlamDensity, r: RoofFunction, h_base, order: int = 16) -> float:
    """``int h dmu^r`` for an observable of the base only: ``int h r dmu / int r dmu``."""
    xg, wg = np.polynomial.legendre.leggauss(order)
    a, b = d.edges[:-1], d.edges[1:]
    mid, half = 0.5 * (a + b), 0.5 * (b - a)
    x = mid[:, None] + half[:, None] * xg[None, :]
    num = np.sum(wg * h_base(x) * r(x), axis=1) * half
    return math.fsum(d.density * num) / roof_integral(d, r).integral_r
