"""Ulam discretisation of the transfer operator and Birkhoff cross-checks.

Entries of the Ulam matrix come from exact branch inversion.  The breakpoints
of each branch are refined by the preimages of all target bin edges, so every
resulting cell maps into a single target bin and contributes its exact length.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from numba import njit

from .errors import ConvergenceError, PreconditionError
from .lorenz_map import LorenzLikeMap
from .roof import RoofFunction

__all__ = [
    "UlamCells",
    "UlamDensity",
    "SuspensionNormalizer",
    "BirkhoffHistogram",
    "ulam_cells",
    "ulam_matrix",
    "stationary_density",
    "birkhoff_histogram",
    "roof_integral",
    "roof_moment",
    "neg_log_integral",
    "pushforward",
    "l1_distance",
]


@dataclass
class UlamCells:
    """Monotone cells ``[lo, hi]``, each inside source bin ``row`` with image inside target bin ``col``."""

    row: np.ndarray
    col: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    src_edges: np.ndarray
    dst_edges: np.ndarray

    @property
    def length(self) -> np.ndarray:
        return self.hi - self.lo


def _bin_index(edges: np.ndarray, x: np.ndarray) -> np.ndarray:
    return np.clip(np.searchsorted(edges, x, side="right") - 1, 0, edges.size - 2)


def ulam_cells(m: LorenzLikeMap, src_edges: np.ndarray, dst_edges: np.ndarray | None = None) -> UlamCells:
    src = np.asarray(src_edges, dtype=float)
    dst = src if dst_edges is None else np.asarray(dst_edges, dtype=float)
    rows, cols, los, his = [], [], [], []
    for side in (-1, 1):
        blo, bhi = (-1.0, 0.0) if side < 0 else (0.0, 1.0)
        ylo, yhi = m.branch_range(side)
        ys = dst[(dst > ylo) & (dst < yhi)]
        pre = m.inverse(ys, side)
        inner = src[(src > blo) & (src < bhi)]
        pts = np.unique(np.concatenate([[blo, bhi], pre, inner]))
        pts = pts[(pts >= blo) & (pts <= bhi)]
        a, b = pts[:-1], pts[1:]
        keep = b > a
        a, b = a[keep], b[keep]
        mid = 0.5 * (a + b)
        rows.append(_bin_index(src, mid))
        cols.append(_bin_index(dst, m.eval(mid)))
        los.append(a)
        his.append(b)
    return UlamCells(*(np.concatenate(v) for v in (rows, cols, los, his)), src, dst)


def ulam_matrix(m: LorenzLikeMap, n_bins: int) -> tuple[sp.csr_matrix, UlamCells]:
    """Row-stochastic ``P[i, j] = Leb(bin_i & f^-1 bin_j) / Leb(bin_i)`` on a uniform grid of ``[-1, 1]``."""
    if n_bins < 16:
        raise PreconditionError("n_bins must be at least 16")
    edges = np.linspace(-1.0, 1.0, n_bins + 1)
    cells = ulam_cells(m, edges)
    width = np.diff(edges)
    P = sp.csr_matrix((cells.length / width[cells.row], (cells.row, cells.col)), shape=(n_bins, n_bins))
    P.sum_duplicates()
    return P, cells


@dataclass
class UlamDensity:
    edges: np.ndarray
    density: np.ndarray
    residual: float
    iterations: int = 0

    def __post_init__(self):
        if np.any(self.density < 0):
            raise PreconditionError("densities must be non-negative")

    @property
    def n_bins(self) -> int:
        return self.density.size

    @property
    def width(self) -> np.ndarray:
        return np.diff(self.edges)

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.edges[:-1] + self.edges[1:])

    @property
    def mass(self) -> np.ndarray:
        return self.density * self.width

    @property
    def total(self) -> float:
        return math.fsum(self.mass)

    def __call__(self, x):
        return self.density[_bin_index(self.edges, np.asarray(x, dtype=float))]

    @property
    def mirrored_l1(self) -> float:
        """``L1`` distance between the density and its reflection ``x -> -x``."""
        return float(np.sum(np.abs(self.density - self.density[::-1]) * self.width))


@dataclass(frozen=True)
class SuspensionNormalizer:
    integral_r: float

    def __post_init__(self):
        if not (math.isfinite(self.integral_r) and self.integral_r > 0):
            raise PreconditionError(f"normaliser must be finite and positive, got {self.integral_r}")


def stationary_density(P: sp.spmatrix, edges: np.ndarray | None = None, tol: float = 1e-12,
                       max_iter: int = 100_000, start: np.ndarray | None = None) -> UlamDensity:
    """Power iteration ``p <- P^T p`` until successive iterates differ by less than ``tol`` in L1."""
    n = P.shape[0]
    if edges is None:
        edges = np.linspace(-1.0, 1.0, n + 1)
    rs = np.asarray(P.sum(axis=1)).ravel()
    if np.max(np.abs(rs - 1.0)) > 1e-10:
        raise PreconditionError("matrix is not row-stochastic")
    PT = P.T.tocsr()
    p = np.full(n, 1.0 / n) if start is None else np.asarray(start, dtype=float).copy()
    if np.any(p < 0) or p.sum() <= 0:
        raise PreconditionError("start vector must be a non-negative, nonzero measure")
    p /= math.fsum(p)
    res = math.inf
    for it in range(1, max_iter + 1):
        q = PT @ p
        q /= math.fsum(q)
        res = float(np.sum(np.abs(q - p)))
        p = q
        if res < tol:
            w = np.diff(edges)
            return UlamDensity(edges, np.maximum(p, 0.0) / w, res, it)
    raise ConvergenceError(f"power iteration did not reach {tol} in {max_iter} steps (residual {res:.3g})")


def pushforward(d: UlamDensity, m: LorenzLikeMap, dst_edges: np.ndarray, refine: int = 2) -> UlamDensity:
    """Exact image of the piecewise constant density under one step of ``f``.

    The source is first re-expressed on a ``refine``-times finer partition (the
    function is unchanged), and the transfer to ``dst_edges`` is assembled from
    fresh cells, independent of the matrix used to compute ``d``.
    """
    fine = np.linspace(d.edges[0], d.edges[-1], refine * d.n_bins + 1)
    rho = np.repeat(d.density, refine)
    cells = ulam_cells(m, fine, dst_edges)
    mass = np.bincount(cells.col, weights=rho[cells.row] * cells.length, minlength=dst_edges.size - 1)
    return UlamDensity(np.asarray(dst_edges), mass / np.diff(dst_edges), d.residual)


@njit(cache=True)
def _birkhoff_kernel(alpha, theta, x0, n_iter, lo, hi, n_bins, restarts, counts, segment):
    x = x0
    w = (hi - lo) / n_bins
    used = 0
    k = 0
    run = 0
    while k < n_iter:
        if x == 0.0 or not np.isfinite(x) or (segment > 0 and run >= segment):
            run = 0
            if used >= restarts.shape[0]:
                return k, used, x
            x = restarts[used]
            used += 1
            continue
        j = int((x - lo) / w)
        if j < 0:
            j = 0
        elif j >= n_bins:
            j = n_bins - 1
        counts[j] += 1
        k += 1
        run += 1
        if x > 0.0:
            x = theta * x ** alpha - 1.0
        else:
            x = 1.0 - theta * (-x) ** alpha
    return k, used, x


@dataclass
class BirkhoffHistogram:
    edges: np.ndarray
    density: np.ndarray
    n_iter: int
    restarts: int
    seed: int | None

    def as_density(self) -> UlamDensity:
        return UlamDensity(self.edges, self.density, math.nan)


def birkhoff_histogram(m: LorenzLikeMap, n_iter: int, n_bins: int, x0: float | None = None,
                       seed: int | None = 0, burn_in: int = 1000,
                       segment: int | None = None) -> BirkhoffHistogram:
    """Occupation histogram of one orbit.

    An orbit that lands exactly on 0 restarts from a fresh uniform point; the
    number of restarts is reported.  For the piecewise linear map (``alpha = 1``)
    a floating-point orbit loses one mantissa bit per step and collapses onto
    coarse dyadic points, so by default it is restarted every 32 steps
    (``segment``); Lebesgue measure is invariant there, so the restarts do not
    bias the histogram.
    """
    if segment is None:
        segment = 32 if m.alpha == 1.0 else 0
    if n_iter < 1:
        raise PreconditionError("n_iter must be positive")
    rng = np.random.default_rng(seed)
    x = float(rng.uniform(-1, 1)) if x0 is None else float(x0)
    counts = np.zeros(n_bins, dtype=np.int64)
    scratch = np.zeros(n_bins, dtype=np.int64)
    if burn_in:
        _, _, x = _birkhoff_kernel(m.alpha, m.theta, x, burn_in, -1.0, 1.0, n_bins,
                                   rng.uniform(-1, 1, 64), scratch, 0)
    done, restarts = 0, 0
    while done < n_iter:
        buf = rng.uniform(-1.0, 1.0, size=max(64, (n_iter - done) // (segment or 32) + 64))
        k, used, x = _birkhoff_kernel(m.alpha, m.theta, x, n_iter - done, -1.0, 1.0, n_bins, buf, counts, segment)
        done += k
        restarts += used
        if done < n_iter:
            x = 0.0
    edges = np.linspace(-1.0, 1.0, n_bins + 1)
    dens = counts / (n_iter * np.diff(edges))
    return BirkhoffHistogram(edges, dens, n_iter, restarts, seed)


def l1_distance(a: UlamDensity | BirkhoffHistogram, b: UlamDensity | BirkhoffHistogram) -> float:
    if a.edges.shape != b.edges.shape or np.max(np.abs(a.edges - b.edges)) > 1e-15:
        raise PreconditionError("densities live on different partitions")
    return float(np.sum(np.abs(a.density - b.density) * np.diff(a.edges)))


def _G1(u):
    # antiderivative of -ln u on (0, inf), continuous at 0
    u = np.asarray(u, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(u > 0, u - u * np.log(np.where(u > 0, u, 1.0)), 0.0)


def _G2(u):
    # antiderivative of ln^2 u
    u = np.asarray(u, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        lu = np.log(np.where(u > 0, u, 1.0))
        return np.where(u > 0, u * lu * lu - 2.0 * u * lu + 2.0 * u, 0.0)


def _signed_integral(G, a, b):
    """Integral over ``[a, b]`` of a function of ``|x|`` with antiderivative ``G`` on ``u > 0``."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    both_pos = a >= 0
    both_neg = b <= 0
    return np.where(both_pos, G(b) - G(np.maximum(a, 0.0)),
                    np.where(both_neg, G(-a) - G(np.maximum(-b, 0.0)), G(-a) + G(b)))


def neg_log_integral(a, b):
    """``int_a^b -ln|x| dx`` in closed form, including intervals that contain 0."""
    return _signed_integral(_G1, a, b)


def _log_sq_integral(a, b):
    return _signed_integral(_G2, a, b)


def _smooth_integral(r: RoofFunction, a, b, power: int, order: int = 8):
    xg, wg = np.polynomial.legendre.leggauss(order)
    mid, half = 0.5 * (a + b), 0.5 * (b - a)
    x = mid[:, None] + half[:, None] * xg[None, :]
    return np.sum(wg[None, :] * r.smooth(x) ** power, axis=1) * half


def _bin_integrals(r: RoofFunction, edges: np.ndarray, power: int) -> np.ndarray:
    a, b = edges[:-1] - r.x0, edges[1:] - r.x0
    if power == 1:
        if r.r1_is_constant:
            sm = float(r.r1) * (b - a)
        else:
            sm = _smooth_integral(r, a + r.x0, b + r.x0, 1)
        return r.coef * neg_log_integral(a, b) + sm
    if power == 2:
        if not r.r1_is_constant:
            raise PreconditionError("second moment needs a constant smooth part")
        c, k = r.coef, float(r.r1)
        return c * c * _log_sq_integral(a, b) + 2 * c * k * neg_log_integral(a, b) + k * k * (b - a)
    raise PreconditionError("only powers 1 and 2 are supported")


def roof_integral(d: UlamDensity, r: RoofFunction) -> SuspensionNormalizer:
    """``int r dmu`` for the piecewise constant density, with the log part integrated in closed form."""
    vals = d.density * _bin_integrals(r, d.edges, 1)
    total = math.fsum(vals)
    if not math.isfinite(total):
        raise ConvergenceError("roof integral diverged")
    return SuspensionNormalizer(total)


def roof_moment(d: UlamDensity, r: RoofFunction, power: int = 2) -> float:
    return math.fsum(d.density * _bin_integrals(r, d.edges, power))
