"""Correlation decay, twisted transfer operator and the obstruction sequence.

Weak mixing at frequency ``a`` fails exactly when ``e^{iar} = (psi o f) / psi``
has a measurable unimodular solution.  ``cohomology_residual`` looks for one by
power iteration of the twisted operator; ``obstruction_sequence`` and
``limit_contrast`` exercise the argument that rules it out for a roof whose
value blows up at the singular point.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import PreconditionError, RootBracketError
from .invariant_measure import UlamDensity, stationary_density, ulam_matrix
from .lorenz_map import LorenzLikeMap
from .roof import RoofFunction
from .suspension_flow import advance_many, sample_measure

__all__ = [
    "CorrelationSeries",
    "Spectrum",
    "CohomologyTest",
    "ObstructionSequence",
    "ContrastReport",
    "SingularRejectionWarning",
    "correlation",
    "power_spectrum",
    "cohomology_residual",
    "obstruction_sequence",
    "limit_contrast",
    "N_CAP",
]

N_CAP = 900


class SingularRejectionWarning(UserWarning):
    pass


@dataclass
class CorrelationSeries:
    t_grid: np.ndarray
    C: np.ndarray
    stderr: np.ndarray
    mean_h: float
    mean_g: float
    var_h: float
    var_g: float
    n_ensemble: int
    n_rejected: int
    seed: int | None

    @property
    def normalized(self) -> np.ndarray:
        return self.C / self.C[0]


def _jackknife_cov(hv: np.ndarray, gv: np.ndarray, n_blocks: int) -> tuple[float, float]:
    """Covariance estimate and its blocked jackknife standard error."""
    n = hv.size
    est = float(np.mean(hv * gv) - np.mean(hv) * np.mean(gv))
    nb = min(n_blocks, n)
    edges = np.linspace(0, n, nb + 1).astype(int)
    sh, sg, shg = hv.sum(), gv.sum(), (hv * gv).sum()
    reps = np.empty(nb)
    for k in range(nb):
        a, b = edges[k], edges[k + 1]
        m = n - (b - a)
        h_, g_, hg_ = sh - hv[a:b].sum(), sg - gv[a:b].sum(), shg - (hv[a:b] * gv[a:b]).sum()
        reps[k] = hg_ / m - (h_ / m) * (g_ / m)
    se = math.sqrt((nb - 1) / nb * np.sum((reps - reps.mean()) ** 2))
    return est, se


def correlation(h, g, t_grid, m: LorenzLikeMap, r: RoofFunction, density: UlamDensity,
                n_ensemble: int = 100_000, t_burn: float = 0.0, seed: int | None = 0,
                n_blocks: int = 50) -> CorrelationSeries:
    """``C(t) = E[h(p) g(p_t)] - E[h] E[g]`` over ``mu^r``-distributed samples.

    Samples are pushed forward by ``t_burn`` first (which leaves ``mu^r``
    invariant).  ``h`` and ``g`` take arrays ``(x, u)``.  Orbits that hit the
    singular floor are dropped; more than 1% dropped triggers a warning.
    """
    if n_ensemble < 1000:
        raise PreconditionError("ensemble must hold at least 10^3 samples")
    t = np.asarray(t_grid, dtype=float)
    if t.size == 0 or t[0] < 0 or np.any(np.diff(t) < 0):
        raise PreconditionError("t_grid must be non-negative and increasing")
    x, u = sample_measure(density, r, np.random.default_rng(seed), n_ensemble)
    status = np.zeros(n_ensemble, dtype=np.int64)
    if t_burn > 0:
        x, u, status = advance_many(x, u, t_burn, m, r, status)
    h0 = np.asarray(h(x, u), dtype=float)
    vals = np.empty((t.size, n_ensemble))
    t_prev = 0.0
    for i, ti in enumerate(t):
        if ti > t_prev:
            x, u, status = advance_many(x, u, ti - t_prev, m, r, status)
            t_prev = ti
        vals[i] = g(x, u)
    ok = status == 0
    rej = int((~ok).sum())
    if rej > 0.01 * n_ensemble:
        warnings.warn(f"{rej} of {n_ensemble} orbits rejected as singular", SingularRejectionWarning,
                      stacklevel=2)
    hv = h0[ok]
    C = np.empty(t.size)
    se = np.empty(t.size)
    for i in range(t.size):
        C[i], se[i] = _jackknife_cov(hv, vals[i][ok], n_blocks)
    g0 = vals[0][ok]
    return CorrelationSeries(t, C, se, float(hv.mean()), float(g0.mean()), float(hv.var()),
                             float(g0.var()), int(ok.sum()), rej, seed)


@dataclass
class Spectrum:
    freq: np.ndarray
    power: np.ndarray

    @property
    def total_non_dc(self) -> float:
        return float(self.power[1:].sum())

    @property
    def max_fraction(self) -> float:
        """Largest share of non-DC power held by a single non-DC frequency."""
        tot = self.total_non_dc
        return float(self.power[1:].max() / tot) if tot > 0 else 0.0

    @property
    def peak_frequency(self) -> float:
        return float(self.freq[1 + np.argmax(self.power[1:])]) if self.power.size > 1 else 0.0


def power_spectrum(series, dt: float = 1.0) -> Spectrum:
    """``|DFT|^2`` of a uniformly sampled series (one-sided).

    Centering only changes the DC bin, so it is left to the caller; a
    constant series puts all its power at frequency 0.
    """
    y = np.asarray(series, dtype=float)
    if y.ndim != 1 or y.size < 2:
        raise PreconditionError("series must be one-dimensional with at least two samples")
    if not dt > 0:
        raise PreconditionError("dt must be positive")
    F = np.fft.rfft(y)
    return Spectrum(np.fft.rfftfreq(y.size, dt), np.abs(F) ** 2 / y.size)


@dataclass
class CohomologyTest:
    a: float
    edges: np.ndarray
    psi: np.ndarray
    eigenvalue: complex
    residual: float
    iterations: int
    converged: bool
    history: np.ndarray

    def __call__(self, x):
        i = np.clip(np.searchsorted(self.edges, np.asarray(x, dtype=float), side="right") - 1,
                    0, self.psi.size - 1)
        return self.psi[i]

    @property
    def inconclusive(self) -> bool:
        return not self.converged


def _twisted_weights(a: float, r: RoofFunction, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    """``int_cell e^{i a r(x)} dx`` for cells lying on one side of the singular point."""
    u, v = np.abs(lo - r.x0), np.abs(hi - r.x0)
    ulo, uhi = np.minimum(u, v), np.maximum(u, v)
    if r.r1_is_constant:
        # e^{i a r1} int |x|^{-i a coef} dx = e^{i a r1} (hi^s - lo^s) / s, s = 1 - i a coef
        s = 1.0 - 1j * a * r.coef
        with np.errstate(divide="ignore", invalid="ignore"):
            lp = np.where(ulo > 0, np.exp(s * np.log(np.where(ulo > 0, ulo, 1.0))), 0.0)
        hp = np.exp(s * np.log(uhi))
        return np.exp(1j * a * float(r.r1)) * (hp - lp) / s
    xg, wg = np.polynomial.legendre.leggauss(8)
    mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
    x = mid[:, None] + half[:, None] * xg[None, :]
    return np.sum(wg * np.exp(1j * a * r(x)), axis=1) * half


def cohomology_residual(a: float, m: LorenzLikeMap, r: RoofFunction, n_bins: int = 4096,
                        max_iter: int = 2000, tol: float = 1e-12, density: UlamDensity | None = None,
                        psi0: np.ndarray | None = None) -> CohomologyTest:
    """Power iteration of the twisted operator on unimodular grid functions.

    With ``p`` the Ulam stationary masses, ``K[i, j] = (p_i / w_i) int e^{iar}``
    over the cells of bin ``i`` mapping into bin ``j`` (the joint law of
    ``(x, f x)`` twisted by ``e^{iar(x)}``).  Each step sets
    ``psi <- (K^T psi / p) / |.|``, the phase of the ``mu``-weighted average of
    ``e^{iar} psi`` over preimages, and records
    ``lambda = sum_j conj(psi_j) (K^T psi)_j``.  ``residual = 1 - max |lambda|``.
    """
    if not a >= 0:
        raise PreconditionError("frequency a must be non-negative")
    P, cells = ulam_matrix(m, n_bins)
    if density is None or density.n_bins != n_bins:
        density = stationary_density(P, cells.src_edges)
    p = density.mass / density.total
    w = np.diff(cells.src_edges)
    vals = _twisted_weights(a, r, cells.lo, cells.hi) * (p[cells.row] / w[cells.row])
    KT = sp.csr_matrix((vals, (cells.col, cells.row)), shape=(n_bins, n_bins))
    psi = np.ones(n_bins, dtype=complex) if psi0 is None else np.asarray(psi0, dtype=complex)
    psi = psi / np.abs(psi)
    pos = p > 0
    hist = []
    best, lam = 0.0, 0j
    converged = False
    for it in range(1, max_iter + 1):
        v = KT @ psi
        lam = complex(np.vdot(psi, v))
        hist.append(abs(lam))
        best = max(best, abs(lam))
        nxt = psi.copy()
        mv = np.abs(v[pos])
        safe = mv > 0
        idx = np.flatnonzero(pos)[safe]
        nxt[idx] = v[idx] / np.abs(v[idx])
        psi = nxt
        # psi turns by arg(lambda) each step, so convergence is judged on |lambda|
        if it > 10 and np.ptp(hist[-5:]) < tol:
            converged = True
            break
    if not converged:
        tail = np.asarray(hist[-max(10, len(hist) // 10):])
        converged = bool(np.ptp(tail) < 1e-6 * max(tail.max(), 1e-300))
    return CohomologyTest(float(a), cells.src_edges, psi, lam, float(max(0.0, 1.0 - best)), it,
                          converged, np.asarray(hist))


@dataclass
class ObstructionSequence:
    """Points ``x_n -> 0+`` with ``r(x_n) = b_n`` and ``e^{i a b_n} = (-1)^n``.

    ``neg_log_x`` holds ``-ln x_n``; ``x`` itself underflows to 0 once
    ``-ln x_n > 745``, so every invariant is checked in log form.
    """

    a: float
    epsilon: float
    n: np.ndarray
    b: np.ndarray
    neg_log_x: np.ndarray
    r_at_x: np.ndarray

    @property
    def x(self) -> np.ndarray:
        return np.exp(-self.neg_log_x)

    def phase_errors(self) -> np.ndarray:
        return np.abs(np.exp(1j * self.a * self.r_at_x) - (-1.0) ** self.n)

    def strictly_decreasing(self) -> bool:
        return bool(np.all(np.diff(self.neg_log_x) > 0))

    def above_thresholds(self, r: RoofFunction) -> bool:
        thr = np.array([_r_log(r, -math.log(self.epsilon) + k * math.log(2.0)) for k in self.n])
        return bool(np.all(self.b > thr))

    def below_dyadic(self) -> bool:
        return bool(np.all(self.neg_log_x > -math.log(self.epsilon) + self.n * math.log(2.0)))


def _r_log(r: RoofFunction, s: float) -> float:
    """``r(x0 + e^{-s})``, i.e. the roof at distance ``e^{-s}`` to the right of ``x0``."""
    x = r.x0 + math.exp(-s)
    sm = float(r.r1) if r.r1_is_constant else float(np.asarray(r.smooth(np.array([x])))[0])
    return r.coef * s + sm


def _solve_log(r: RoofFunction, b: float, s_lo: float, s_max: float = 1e7) -> float:
    """Bisection in ``s = -ln x`` for ``r = b`` on ``s >= s_lo`` (``x <= e^{-s_lo}``)."""
    f_lo = _r_log(r, s_lo) - b
    if f_lo >= 0:
        raise RootBracketError("roof already exceeds the target at the right end of the bracket")
    step, s_hi = 1.0, s_lo + 1.0
    while _r_log(r, s_hi) - b <= 0:
        step *= 2.0
        s_hi = s_lo + step
        if s_hi > s_max:
            raise RootBracketError(f"roof never reaches {b}; is it unbounded near the singular point?")
    lo, hi = s_lo, s_hi
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        fm = _r_log(r, mid) - b
        if fm == 0.0:
            return mid
        if fm < 0:
            lo = mid
        else:
            hi = mid
    f_hi = _r_log(r, hi) - b
    return hi if abs(f_hi) <= abs(_r_log(r, lo) - b) else lo


def obstruction_sequence(a: float, r: RoofFunction, epsilon: float = 0.5, N: int = 30) -> ObstructionSequence:
    """Sequence ``b_n`` with ``e^{i a b_n} = (-1)^n`` and points ``x_n`` solving ``r(x_n) = b_n``.

    ``b_n`` is the smallest value in ``(n mod 2) pi/a + (2 pi / a) Z`` that
    exceeds both ``r(epsilon / 2^n)`` and ``b_{n-1}``; the second condition makes
    ``x_n`` strictly decreasing.  ``x_n`` comes from bisection in ``-ln x`` on
    ``(0, epsilon / 2^n]``.
    """
    if not a > 0:
        raise PreconditionError("frequency a must be positive")
    if not 0 < epsilon <= 1:
        raise PreconditionError("epsilon must lie in (0, 1]")
    if not 1 <= N <= N_CAP:
        raise PreconditionError(f"N must lie in [1, {N_CAP}]")
    if r.coef <= 0:
        raise RootBracketError("roof is bounded near the singular point; no obstruction sequence exists")
    period = 2.0 * math.pi / a
    ns = np.arange(1, N + 1)
    bs, ss, rs = [], [], []
    b_prev = -math.inf
    for n in ns:
        s_n = -math.log(epsilon) + n * math.log(2.0)
        thr = max(_r_log(r, s_n), b_prev)
        off = (n % 2) * math.pi / a
        k = math.floor((thr - off) / period) + 1
        b = off + k * period
        if b <= thr:
            b += period
        s = _solve_log(r, b, s_n)
        bs.append(b)
        ss.append(s)
        rs.append(_r_log(r, s))
        b_prev = b
    return ObstructionSequence(float(a), float(epsilon), ns, np.array(bs), np.array(ss), np.array(rs))


@dataclass
class ContrastReport:
    n: np.ndarray
    lhs: np.ndarray
    rhs: np.ndarray
    lhs_amplitude: np.ndarray
    rhs_variation: np.ndarray
    roof_limit_gap: np.ndarray

    def contradiction(self, n_from: int = 5, amp: float = 1.9, var: float = 0.1) -> bool:
        """LHS keeps oscillating while the RHS settles: the eigenfunction equation cannot hold."""
        sel = self.n[:-1] >= n_from
        if not sel.any():
            return False
        return bool(self.lhs_amplitude[sel].min() >= amp and self.rhs_variation[sel].max() <= var)


def limit_contrast(seq: ObstructionSequence | np.ndarray, m: LorenzLikeMap, r: RoofFunction, a: float | None,
                   psi: CohomologyTest) -> ContrastReport:
    """Both sides of ``e^{iar} e^{iar o f} = (psi o f^2) / psi`` along ``x_n``.

    ``seq`` is an obstruction sequence or an array of ``-ln x_n`` values.
    ``lhs_amplitude[k] = |lhs_{k+1} - lhs_k|``; ``rhs_variation`` is the same for
    the right-hand side, and ``roof_limit_gap = |r(f x_n) - r(-1)|``.
    """
    if isinstance(seq, ObstructionSequence):
        s, ns, a = seq.neg_log_x, seq.n, seq.a if a is None else a
    else:
        s = np.asarray(seq, dtype=float)
        ns = np.arange(1, s.size + 1)
    if a is None:
        raise PreconditionError("frequency a is required")
    if r.x0 != 0.0:
        raise PreconditionError("limit contrast assumes the singular point at 0")
    lo, hi = psi.edges[0], psi.edges[-1]
    # f(x_n) = -1 + delta_n with delta_n = theta x_n^alpha
    delta = m.theta * np.exp(-m.alpha * s)
    fx = -1.0 + delta
    f2x = m.eval(fx)
    if np.any(f2x < lo) or np.any(f2x > hi) or lo > 0 or hi < 0:
        raise PreconditionError("candidate psi is not defined at the required limit points")
    r_x = np.array([_r_log(r, v) for v in s])
    r_fx = r.coef * -np.log1p(-delta) + r.smooth(fx)
    r_m1 = float(r.smooth(np.array([-1.0]))[0])
    lhs = np.exp(1j * a * r_x) * np.exp(1j * a * r_fx)
    # an underflowed x_n still lies in the grid cell just right of 0
    x_n = np.maximum(np.exp(-s), np.nextafter(0.0, 1.0))
    rhs = psi(f2x) * np.conj(psi(x_n))
    return ContrastReport(ns, lhs, rhs, np.abs(np.diff(lhs)), np.abs(np.diff(rhs)),
                          np.abs(r_fx - r_m1))
