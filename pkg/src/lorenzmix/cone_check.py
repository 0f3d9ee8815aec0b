"""Cone-field and expansion checks for the Lorenz return map via tangent dynamics.

The section is the plane ``z = rho - 1`` crossed downward, with section
coordinates ``(x, y)``.  Between crossings the flow is integrated together with
its variational equation; the return derivative is

    dP = [(I - F n^T / (n . F)) Phi]_{xy, xy},   n = e_z,

where ``F`` is the vector field at the image point, so the flow-direction part
of the propagated tangent vector is projected out along the flow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _rk
from .errors import PreconditionError
from .ode_flow import (IntegratorConfig, LorenzParams, Section, State3, _check_status,
                       attractor_point, lorenz_vector_field, next_section_crossing)

__all__ = [
    "TangentVector",
    "ReturnDerivative",
    "ConeReport",
    "return_derivative",
    "variational_return",
    "multi_return_derivative",
    "cone_invariance_report",
]


@dataclass(frozen=True)
class TangentVector:
    base: State3
    direction: tuple[float, float]

    @classmethod
    def of(cls, base, v) -> "TangentVector":
        v = np.asarray(v, dtype=float)
        nv = float(np.hypot(v[0], v[1]))
        if not nv > 0:
            raise PreconditionError("tangent vector must be nonzero")
        return cls(State3.of(base), (float(v[0] / nv), float(v[1] / nv)))

    def as_array(self) -> np.ndarray:
        return np.array(self.direction)


@dataclass(frozen=True)
class ReturnDerivative:
    point: State3
    image: State3
    D: np.ndarray
    flight_time: float


def _section(p: LorenzParams) -> Section:
    return Section("plane", p.rho - 1.0)


def _project(Phi: np.ndarray, image: np.ndarray, p: LorenzParams) -> np.ndarray:
    F = np.asarray(lorenz_vector_field(image, p))
    if abs(F[2]) < 1e-14:
        raise PreconditionError("flow is tangent to the section at the image point")
    Pi = np.eye(3) - np.outer(F, [0.0, 0.0, 1.0]) / F[2]
    return (Pi @ Phi)[:2, :2]


def _variational_crossings(u, n: int, p: LorenzParams, cfg: IntegratorConfig):
    sec = _section(p)
    y0 = np.concatenate([State3.of(u).as_array(), np.eye(3).ravel()])
    ev_t, ev_y, found, _, t_end, _, status = _rk.crossings_kernel(
        _rk.MODEL_VARIATIONAL, y0, 0.0, p.as_array(), sec.code(), sec.level_for(p), -1, int(n),
        cfg.time_cap, cfg.rtol, cfg.atol, cfg.min_flight, cfg.max_steps)
    _check_status(status, "variational_return", t_end)
    return ev_t, ev_y


def return_derivative(u, p: LorenzParams = LorenzParams(),
                      cfg: IntegratorConfig = IntegratorConfig()) -> ReturnDerivative:
    """One return to the section with the 2x2 derivative in section coordinates."""
    ev_t, ev_y = _variational_crossings(u, 1, p, cfg)
    img = ev_y[0, :3].copy()
    img[2] = p.rho - 1.0
    D = _project(ev_y[0, 3:].reshape(3, 3), ev_y[0, :3], p)
    return ReturnDerivative(State3.of(u), State3.of(img), D, float(ev_t[0]))


def multi_return_derivative(u, n: int, p: LorenzParams = LorenzParams(),
                            cfg: IntegratorConfig = IntegratorConfig()) -> np.ndarray:
    """Derivative of ``P^n`` from one continuous variational integration across ``n`` returns."""
    _, ev_y = _variational_crossings(u, n, p, cfg)
    return _project(ev_y[-1, 3:].reshape(3, 3), ev_y[-1, :3], p)


def variational_return(u, v: TangentVector | np.ndarray, p: LorenzParams = LorenzParams(),
                       cfg: IntegratorConfig = IntegratorConfig()):
    """Image point, unit image vector and expansion factor ``|dP v| / |v|``."""
    tv = v if isinstance(v, TangentVector) else TangentVector.of(u, v)
    rd = return_derivative(u, p, cfg)
    w = rd.D @ tv.as_array()
    fac = float(np.hypot(w[0], w[1]))
    return rd.image, TangentVector.of(rd.image, w), fac


@dataclass
class ConeReport:
    slope: float
    sample_size: int
    per_n_min: np.ndarray
    axis_min_factors: np.ndarray
    c: float
    tau: float
    min_margin: float
    violations: list = field(default_factory=list)
    points: np.ndarray | None = field(default=None, repr=False)

    @property
    def n_violations(self) -> int:
        return len(self.violations)

    @property
    def bound_holds(self) -> bool:
        n = np.arange(1, self.per_n_min.size + 1)
        return bool(np.all(self.per_n_min >= self.c * self.tau ** n * (1 - 1e-12)))


def _orbit_derivatives(n_returns: int, p: LorenzParams, cfg: IntegratorConfig, u0, seed):
    if u0 is None:
        s0 = (1.0, 1.0, 1.0)
        if seed is not None:
            s0 = tuple(np.array(s0) + np.random.default_rng(seed).normal(scale=1e-3, size=3))
        u0 = next_section_crossing(attractor_point(p, s0=s0, cfg=cfg), _section(p), p, cfg).point
    u = State3.of(u0).as_array()
    pts = np.empty((n_returns, 3))
    mats = np.empty((n_returns, 2, 2))
    for i in range(n_returns):
        rd = return_derivative(u, p, cfg)
        pts[i] = u
        mats[i] = rd.D
        u = rd.image.as_array()
    return pts, mats


def cone_invariance_report(sample_size: int = 1000, slope: float = 1.0, n_max: int = 8,
                           p: LorenzParams = LorenzParams(), cfg: IntegratorConfig = IntegratorConfig(),
                           axis_burn: int = 100, n_angles: int = 33, u0=None, seed: int | None = None) -> ConeReport:
    """Cone containment and expansion along one long orbit of section returns.

    The cone at a point is ``{v : |<v, axis_perp>| <= slope |<v, axis>|}``, the
    axis being the pushed-forward tangent direction after ``axis_burn`` returns.
    Containment compares the images of the two boundary rays with the cone at
    the image point; the margin is ``1 - (image slope)/slope`` (0 for an
    infinite slope, where the cone is a half-plane and containment is trivial).
    Expansion minimises ``|dP^n v|`` over ``n_angles`` unit vectors spanning the
    cone and over all samples, then ``log min_n`` is fitted against ``n``; ``c``
    is lowered until ``min_n >= c tau^n`` holds for every tested ``n``.
    """
    if sample_size < 1 or n_max < 1:
        raise PreconditionError("sample_size and n_max must be positive")
    if not slope > 0:
        raise PreconditionError("cone slope must be positive")
    total = axis_burn + sample_size + n_max
    pts, mats = _orbit_derivatives(total, p, cfg, u0, seed)

    v = np.array([1.0, 0.0])
    axes = np.empty((total + 1, 2))
    for i in range(total):
        axes[i] = v
        w = mats[i] @ v
        v = w / np.hypot(w[0], w[1])
    axes[total] = v

    idx = np.arange(axis_burn, axis_burn + sample_size)
    infinite = math.isinf(slope)
    violations, margins = [], []
    for i in idx:
        a = axes[i]
        perp = np.array([-a[1], a[0]])
        an = axes[i + 1]
        pn = np.array([-an[1], an[0]])
        if infinite:
            margins.append(0.0)
            continue
        worst = 0.0
        for sgn in (1.0, -1.0):
            w = mats[i] @ (a + sgn * slope * perp)
            along = abs(w @ an)
            worst = max(worst, abs(w @ pn) / along if along > 0 else math.inf)
        margins.append(1.0 - worst / slope)
        if worst >= slope:
            violations.append((int(i), pts[i].copy(), float(worst)))

    half = math.pi / 2 if infinite else math.atan(slope)
    th = np.linspace(-half, half, n_angles)
    per_n = np.full(n_max, np.inf)
    axis_min = np.full(n_max, np.inf)
    for i in idx:
        a = axes[i]
        perp = np.array([-a[1], a[0]])
        W = np.outer(a, np.cos(th)) + np.outer(perp, np.sin(th))
        wa = a.copy()
        for n in range(n_max):
            W = mats[i + n] @ W
            wa = mats[i + n] @ wa
            per_n[n] = min(per_n[n], float(np.min(np.hypot(W[0], W[1]))))
            axis_min[n] = min(axis_min[n], float(np.hypot(wa[0], wa[1])))

    n = np.arange(1, n_max + 1)
    if n_max >= 2:
        slope_fit = np.polyfit(n, np.log(per_n), 1)[0]
        tau = float(np.exp(slope_fit))
    else:
        tau = float(per_n[0])
    c = float(np.min(per_n / tau ** n))
    return ConeReport(float(slope), int(sample_size), per_n, axis_min, c, tau,
                      float(min(margins)) if margins else 0.0, violations, pts[idx])
