"""Full-branch inducing schemes ``F = f^R`` on an interval ``Y`` containing 0.

``build_scheme`` follows monotone pieces of ``f^k`` as pairs (image interval,
itinerary of branch signs).  An image that straddles 0 is split, with the
one-sided limits ``f(0+) = -1`` and ``f(0-) = +1`` as exact endpoints.  As soon
as an image contains ``Y`` the preimage of ``Y`` becomes a branch with return
time ``k``; the parts of the image outside ``Y`` keep iterating.  Preimages are
composed from the closed-form inverse branches, so a branch endpoint is
matched to ``dY`` to rounding error.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import PreconditionError
from .lorenz_map import LorenzLikeMap

__all__ = [
    "SchemeBranch",
    "InducedScheme",
    "GibbsMarkovReport",
    "IncompleteSchemeWarning",
    "build_scheme",
    "verify_gibbs_markov",
    "return_time_tail",
]

ONTO_TOL = 1e-9
MIN_PIECE = 1e-15


class IncompleteSchemeWarning(UserWarning):
    pass


@dataclass(frozen=True)
class SchemeBranch:
    lo: float
    hi: float
    R: int
    itinerary: tuple[int, ...] | None = None

    @property
    def length(self) -> float:
        return self.hi - self.lo


@dataclass
class InducedScheme:
    Y: tuple[float, float]
    branches: list[SchemeBranch]
    depth_cap: int
    pruned_measure: float = 0.0
    m: LorenzLikeMap | None = field(default=None, repr=False)

    @property
    def measure_Y(self) -> float:
        return self.Y[1] - self.Y[0]

    @property
    def covered_measure(self) -> float:
        # sum in sorted order so the result does not depend on discovery order
        return math.fsum(b.length for b in self.branches)

    @property
    def covered_fraction(self) -> float:
        return self.covered_measure / self.measure_Y

    def as_arrays(self):
        lo = np.array([b.lo for b in self.branches])
        hi = np.array([b.hi for b in self.branches])
        R = np.array([b.R for b in self.branches], dtype=int)
        return lo, hi, R

    def sorted_branches(self) -> list[SchemeBranch]:
        return sorted(self.branches, key=lambda b: b.lo)

    def __len__(self) -> int:
        return len(self.branches)


def _back(m: LorenzLikeMap, y: float, itin) -> float:
    th, ia = m.theta, 1.0 / m.alpha
    for s in reversed(itin):
        y = ((y + 1.0) / th) ** ia if s > 0 else -(((1.0 - y) / th) ** ia)
    return y + 0.0


def _image_end(m: LorenzLikeMap, x: float, side: int) -> float:
    if x == 0.0:
        return m.limit(side)
    v = m.theta * abs(x) ** m.alpha - 1.0
    return v if x > 0.0 else -v


def _log_fprime(m: LorenzLikeMap, x):
    if m.alpha == 1.0:
        return np.full(np.shape(x), math.log(m.theta))
    with np.errstate(divide="ignore"):
        return math.log(m.theta * m.alpha) + (m.alpha - 1.0) * np.log(np.abs(x))


def build_scheme(m: LorenzLikeMap, Y: tuple[float, float] = (-0.5, 0.5), depth_cap: int = 25,
                 threshold: float = 0.99, min_piece: float = MIN_PIECE) -> InducedScheme:
    """Refine monotone pieces of ``f^k`` for ``k <= depth_cap`` and collect full branches over ``Y``.

    Pieces whose domain is shorter than ``min_piece`` are dropped and their
    length is added to ``pruned_measure``.  Warns with ``IncompleteSchemeWarning``
    when the covered fraction ends below ``threshold``.
    """
    ylo, yhi = float(Y[0]), float(Y[1])
    if not ylo < 0.0 < yhi:
        raise PreconditionError(f"Y = {Y} must contain 0")
    if ylo < -1.0 or yhi > 1.0:
        raise PreconditionError("Y must lie in (-1, 1)")
    if depth_cap < 1:
        raise PreconditionError("depth_cap must be positive")

    branches: list[SchemeBranch] = []
    pruned = 0.0
    # active pieces: (image lo, image hi, itinerary); the domain is back(image, itinerary)
    active = []
    for lo, hi, s in ((ylo, 0.0, -1), (0.0, yhi, 1)):
        active.append((_image_end(m, lo, s), _image_end(m, hi, s), (s,)))

    for k in range(1, depth_cap + 1):
        nxt = []
        for ilo, ihi, it in active:
            if ilo <= ylo and ihi >= yhi:
                a, b = _back(m, ylo, it), _back(m, yhi, it)
                branches.append(SchemeBranch(min(a, b), max(a, b), k, it))
                parts = ((ilo, ylo), (yhi, ihi))
            else:
                parts = ((ilo, ihi),)
            if k == depth_cap:
                continue
            for lo, hi in parts:
                if not hi > lo:
                    continue
                dom = abs(_back(m, hi, it) - _back(m, lo, it))
                if dom < min_piece:
                    pruned += dom
                    continue
                segs = ((lo, 0.0, -1), (0.0, hi, 1)) if lo < 0.0 < hi else ((lo, hi, 1 if lo >= 0.0 else -1),)
                for a, b, s in segs:
                    nxt.append((_image_end(m, a, s), _image_end(m, b, s), it + (s,)))
        active = nxt

    scheme = InducedScheme((ylo, yhi), branches, depth_cap, pruned, m)
    if scheme.covered_fraction < threshold:
        warnings.warn(f"inducing scheme covers {scheme.covered_fraction:.4f} of Y, below {threshold}",
                      IncompleteSchemeWarning, stacklevel=2)
    return scheme


@dataclass
class GibbsMarkovReport:
    lambda_min: float
    distortion_constant: float
    holder_exponent: float
    tail: np.ndarray
    partial_sums: np.ndarray
    tail_ratio: float
    d_violations: list[int]
    onto_max_error: float
    onto_failures: list[int]
    chain_rule_max_rel_error: float
    failures: list[str]

    @property
    def passed(self) -> bool:
        return not self.failures

    @property
    def expanding(self) -> bool:
        return self.lambda_min > 1.0

    @property
    def integrable(self) -> bool:
        return "c" not in self.failures


def _forward(m: LorenzLikeMap, x: np.ndarray, R: np.ndarray):
    """Iterate each ``x[i]`` ``R[i]`` times; return the endpoint and ``log|DF|``."""
    x = x.astype(float).copy()
    logd = np.zeros_like(x)
    for j in range(int(R.max(initial=0))):
        act = j < R
        xa = x[act]
        logd[act] += _log_fprime(m, xa)
        x[act] = m.eval_unchecked(xa)
    return x, logd


def _backward_orbit(m: LorenzLikeMap, y: float, itin) -> np.ndarray:
    """Points ``x_0, ..., x_R`` with ``x_R = y`` and ``f(x_j) = x_{j+1}`` on the itinerary."""
    out = np.empty(len(itin) + 1)
    out[-1] = y
    for j in range(len(itin) - 1, -1, -1):
        out[j] = m.inverse(out[j + 1], itin[j])
    return out


def _log_inverse_derivative(m: LorenzLikeMap, orbit: np.ndarray, itin) -> float:
    """``log|(F^-1)'|`` at ``orbit[-1]`` from the inverse-branch formula."""
    total = 0.0
    if m.alpha == 1.0:
        return -len(itin) * math.log(m.theta)
    for j, s in enumerate(itin):
        y = orbit[j + 1]
        u = (y + 1.0) / m.theta if s > 0 else (1.0 - y) / m.theta
        total += -math.log(m.alpha * m.theta) + (1.0 / m.alpha - 1.0) * math.log(u)
    return total


def return_time_tail(s: InducedScheme) -> tuple[np.ndarray, float]:
    """``Leb{R >= n}`` for ``n = 1..depth_cap`` (index 0 is ``n = 1``) and ``sum_n Leb{R >= n}``."""
    if not s.branches:
        return np.zeros(0), 0.0
    per_level = np.zeros(s.depth_cap)
    for b in s.sorted_branches():
        per_level[b.R - 1] += b.length
    tail = np.cumsum(per_level[::-1])[::-1]
    return tail, float(math.fsum(tail))


def verify_gibbs_markov(s: InducedScheme, m: LorenzLikeMap | None = None, epsilon: float = 0.5,
                        pairs_per_branch: int = 32, max_pairs: int = 200_000, rng=0,
                        tail_window: int = 5, tail_tol: float = 0.01) -> GibbsMarkovReport:
    """Check conditions (a)-(d) on a built (or hand-made) scheme.

    (a) ``lambda_min`` is the minimum of ``|DF|`` over endpoints and interior
    samples of every branch; (b) ``distortion_constant`` is the largest
    ``|log g(x) - log g(y)| / |x - y|^epsilon`` over sampled pairs, with
    ``g = 1/|DF|``; (c) partial sums of ``n Leb{R = n}`` must move by less than
    ``tail_tol`` (relative) over the last ``tail_window`` depths; (d) every
    ``f^k omega``, ``0 <= k < R``, must keep 0 outside its closure.
    """
    m = m or s.m
    if m is None:
        raise PreconditionError("a map is needed to verify the scheme")
    if not s.branches:
        raise PreconditionError("scheme has no branches")
    rng = np.random.default_rng(rng)
    br = s.branches
    lo, hi, R = s.as_arrays()
    ylo, yhi = s.Y
    failures = []

    # (a) expansion, plus onto-Y and chain-rule bookkeeping
    fr = np.linspace(0.0, 1.0, 9)
    pts = lo[:, None] + fr[None, :] * (hi - lo)[:, None]
    # an endpoint at the singular point stands for its one-sided limit
    mid_sign = np.sign(lo + hi)[:, None] * np.ones_like(pts)
    pts = np.where(pts == 0.0, mid_sign * 5e-324, pts)
    Rrep = np.repeat(R, fr.size)
    end, logd = _forward(m, pts.ravel(), Rrep)
    end = end.reshape(pts.shape)
    logd = logd.reshape(pts.shape)
    lam = float(np.exp(logd.min()))
    if not lam > 1.0:
        failures.append("a")

    # endpoint images: exact up to rounding amplified by |DF|
    tol = np.maximum(ONTO_TOL, 64 * np.finfo(float).eps * np.exp(logd[:, [0, -1]]))
    err_lo = np.abs(end[:, 0] - ylo)
    err_hi = np.abs(end[:, -1] - yhi)
    onto_err = np.maximum(err_lo, err_hi)
    onto_fail = [i for i in range(len(br)) if err_lo[i] > tol[i, 0] or err_hi[i] > tol[i, 1]]
    if onto_fail:
        failures.append("onto")

    chain_err = 0.0
    with_itin = [i for i, b in enumerate(br) if b.itinerary is not None]
    for i in with_itin[:: max(1, len(with_itin) // 500)]:
        for y in (ylo, 0.5 * (ylo + yhi), yhi):
            orb = _backward_orbit(m, y, br[i].itinerary)
            lfw = float(np.sum(_log_fprime(m, orb[:-1])))
            chain_err = max(chain_err, abs(math.expm1(lfw + _log_inverse_derivative(m, orb, br[i].itinerary))))

    # (b) distortion of log g = -log|DF|
    n_pairs = max(1, min(pairs_per_branch, max_pairs // len(br)))
    u = rng.uniform(size=(len(br), n_pairs, 2))
    x = lo[:, None, None] + u * (hi - lo)[:, None, None]
    _, lg = _forward(m, x.ravel(), np.repeat(R, 2 * n_pairs))
    lg = -lg.reshape(x.shape)
    dx = np.abs(x[..., 0] - x[..., 1])
    ok = dx > 0
    quot = np.where(ok, np.abs(lg[..., 0] - lg[..., 1]) / np.where(ok, dx, 1.0) ** epsilon, 0.0)
    distortion = float(quot.max())
    if not math.isfinite(distortion):
        failures.append("b")

    # (c) integrability of R
    tail, _ = return_time_tail(s)
    per_level = np.concatenate([tail[:-1] - tail[1:], tail[-1:]])
    partial = np.cumsum(np.arange(1, s.depth_cap + 1) * per_level)
    w = min(tail_window, s.depth_cap - 1)
    rel = (partial[-1] - partial[-1 - w]) / partial[-1] if w > 0 and partial[-1] > 0 else 0.0
    nz = per_level[per_level > 0]
    ratio = float(np.exp(np.mean(np.diff(np.log(nz[-(w + 1):]))))) if nz.size > 1 else 0.0
    if not (rel < tail_tol):
        failures.append("c")

    # (d) 0 stays outside f^k omega for 0 <= k < R: the closure for k >= 1 and,
    # since omega is a subinterval of Y, the open interval itself for k = 0
    d_viol = []
    for i, b in enumerate(br):
        bad = False
        if b.itinerary is not None:
            a_, b_ = ylo, yhi
            for k in range(b.R - 1, -1, -1):
                s_ = b.itinerary[k]
                a_, b_ = m.inverse(a_, s_), m.inverse(b_, s_)
                lo_, hi_ = min(a_, b_), max(a_, b_)
                inside = (lo_ >= 0.0 or hi_ <= 0.0) if k == 0 else (lo_ > 0.0 or hi_ < 0.0)
                if not inside or (k > 0 and np.sign(lo_) != s_):
                    bad = True
                    break
        else:
            a_, b_ = b.lo, b.hi
            for k in range(b.R):
                lo_, hi_ = min(a_, b_), max(a_, b_)
                inside = (lo_ >= 0.0 or hi_ <= 0.0) if k == 0 else (lo_ > 0.0 or hi_ < 0.0)
                if not inside:
                    bad = True
                    break
                side = 1 if lo_ + hi_ > 0 else -1
                a_ = _image_end(m, a_, side)
                b_ = _image_end(m, b_, side)
        if bad:
            d_viol.append(i)
    if d_viol:
        failures.append("d")

    return GibbsMarkovReport(lam, distortion, epsilon, tail, partial, ratio, d_viol,
                             float(onto_err.max()), onto_fail, chain_err, failures)
