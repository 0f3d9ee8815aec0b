"""Lorenz vector field, the saddle at the origin, trajectories and section events."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import _rk
from .errors import DivergenceError, NonSaddleSpectrum, PreconditionError, SectionTimeout

__all__ = [
    "State3",
    "LorenzParams",
    "OriginSpectrum",
    "IntegratorConfig",
    "Trajectory",
    "Section",
    "SectionEvent",
    "lorenz_vector_field",
    "lorenz_jacobian",
    "origin_spectrum",
    "integrate",
    "next_section_crossing",
    "section_events",
    "attractor_point",
]


class State3(NamedTuple):
    x: float
    y: float
    z: float

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z], dtype=float)

    @classmethod
    def of(cls, s) -> "State3":
        a = np.asarray(s, dtype=float).reshape(-1)
        if a.shape[0] < 3:
            raise PreconditionError("a state needs three coordinates")
        if not np.all(np.isfinite(a[:3])):
            raise PreconditionError(f"non-finite state {a[:3]}")
        return cls(float(a[0]), float(a[1]), float(a[2]))


@dataclass(frozen=True)
class LorenzParams:
    sigma: float = 10.0
    rho: float = 28.0
    beta: float = 8.0 / 3.0

    def __post_init__(self):
        for name in ("sigma", "rho", "beta"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise PreconditionError(f"{name} must be positive and finite, got {v}")

    def as_array(self) -> np.ndarray:
        return np.array([self.sigma, self.rho, self.beta], dtype=float)


@dataclass(frozen=True)
class OriginSpectrum:
    lambda_ss: float
    lambda_s: float
    lambda_u: float

    @property
    def eigenvalues(self) -> tuple[float, float, float]:
        return (self.lambda_ss, self.lambda_s, self.lambda_u)


@dataclass(frozen=True)
class IntegratorConfig:
    rtol: float = 1e-10
    atol: float = 1e-12
    max_steps: int = 50_000_000
    time_cap: float = 200.0
    min_flight: float = 1e-6

    def __post_init__(self):
        if not (self.rtol > 0 and self.atol > 0):
            raise PreconditionError("integrator tolerances must be positive")
        if not self.time_cap > 0:
            raise PreconditionError("time_cap must be positive")


@dataclass
class Trajectory:
    """Sampled orbit.  When built from accepted steps, ``dense`` holds the
    continuous-extension coefficients of every step and ``evaluate`` interpolates."""

    times: np.ndarray
    states: np.ndarray
    n_steps: int
    n_rejected: int
    max_error: float
    dense: np.ndarray | None = field(default=None, repr=False)

    def __len__(self) -> int:
        return self.times.shape[0]

    @property
    def end(self) -> State3:
        return State3.of(self.states[-1])

    def evaluate(self, t) -> np.ndarray:
        if self.dense is None:
            raise PreconditionError("trajectory was sampled on a grid; no dense output kept")
        ts = np.atleast_1d(np.asarray(t, dtype=float))
        if ts.min() < self.times[0] or ts.max() > self.times[-1]:
            raise PreconditionError("evaluation time outside the trajectory span")
        k = np.clip(np.searchsorted(self.times, ts, side="right") - 1, 0, len(self.times) - 2)
        out = np.empty((ts.shape[0], self.states.shape[1]))
        buf = np.empty(self.states.shape[1])
        for i, (ki, ti) in enumerate(zip(k, ts)):
            h = self.times[ki + 1] - self.times[ki]
            _rk.dense_eval(self.dense[ki], (ti - self.times[ki]) / h, buf)
            out[i] = buf
        return out[0] if np.ndim(t) == 0 else out


@dataclass(frozen=True)
class Section:
    """Poincare section.

    ``kind="zmax"`` is the surface of z-maxima (zdot = 0, zddot < 0);
    ``kind="plane"`` is ``z = level`` crossed downward (``level=None`` means rho - 1).
    """

    kind: str = "plane"
    level: float | None = None

    def __post_init__(self):
        if self.kind not in ("zmax", "plane"):
            raise PreconditionError(f"unknown section kind {self.kind!r}")

    def code(self) -> int:
        return _rk.SECTION_Z_MAX if self.kind == "zmax" else _rk.SECTION_PLANE_Z

    def level_for(self, p: LorenzParams) -> float:
        if self.kind == "zmax":
            return 0.0
        return p.rho - 1.0 if self.level is None else float(self.level)

    def residual(self, s, p: LorenzParams) -> float:
        a = np.asarray(s, dtype=float)
        return float(_rk.section_value(self.code(), self.level_for(p), a, p.as_array()))


@dataclass(frozen=True)
class SectionEvent:
    point: State3
    time: float
    flight_time: float
    direction: int = -1


def lorenz_vector_field(s, p: LorenzParams = LorenzParams()) -> State3:
    x, y, z = State3.of(s)
    return State3(p.sigma * (y - x), p.rho * x - y - x * z, x * y - p.beta * z)


def lorenz_jacobian(s, p: LorenzParams = LorenzParams()) -> np.ndarray:
    x, y, z = State3.of(s)
    return np.array([[-p.sigma, p.sigma, 0.0],
                     [p.rho - z, -1.0, -x],
                     [y, x, -p.beta]])


def origin_spectrum(p: LorenzParams = LorenzParams()) -> OriginSpectrum:
    """Eigenvalues of the linearisation at 0.

    The (x, y) block has characteristic polynomial
    ``l^2 + (sigma+1) l - sigma (rho-1)``; the z direction contributes ``-beta``.
    Raises ``NonSaddleSpectrum`` unless ``l_ss < l_s < 0 < l_u`` and ``l_u > |l_s|``.
    """
    b = p.sigma + 1.0
    disc = b * b + 4.0 * p.sigma * (p.rho - 1.0)
    if disc < 0:
        sq = 1j * math.sqrt(-disc)
        eig = ((-b + sq) / 2, (-b - sq) / 2, complex(-p.beta))
        raise NonSaddleSpectrum(eig)
    sq = math.sqrt(disc)
    # stable evaluation of the small root
    l_plus = (-b + sq) / 2.0 if b < 0 else -2.0 * p.sigma * (1.0 - p.rho) / (b + sq)
    l_minus = (-b - sq) / 2.0
    eig = sorted([l_plus, l_minus, -p.beta])
    lss, ls, lu = eig
    if not (lss < ls < 0.0 < lu):
        raise NonSaddleSpectrum(eig)
    if not lu > abs(ls):
        raise NonSaddleSpectrum(eig, f"lambda_u = {lu} does not exceed |lambda_s| = {abs(ls)}")
    return OriginSpectrum(lss, ls, lu)


def _check_status(status: int, where: str, t: float):
    if status == _rk.STATUS_OK:
        return
    if status == _rk.STATUS_TIMEOUT:
        raise SectionTimeout(f"{where}: no section crossing before the time cap (t={t:.6g}); "
                             "orbit is likely close to the stable manifold of the origin")
    reason = {
        _rk.STATUS_UNDERFLOW: "step size underflow",
        _rk.STATUS_NONFINITE: "non-finite state",
        _rk.STATUS_MAX_STEPS: "step budget exhausted",
    }[status]
    raise DivergenceError(f"{where}: {reason} at t={t:.6g}")


def integrate(s0, duration: float, p: LorenzParams = LorenzParams(),
              cfg: IntegratorConfig = IntegratorConfig(), sample_dt: float | None = None,
              t0: float = 0.0) -> Trajectory:
    """Adaptive Dormand-Prince 5(4) integration of the Lorenz system.

    Without ``sample_dt`` every accepted step is kept along with its dense output.
    """
    if not duration > 0:
        raise PreconditionError("duration must be positive")
    y0 = State3.of(s0).as_array()
    dt = float(sample_dt) if sample_dt else 0.0
    cap = int(duration / dt) + 2 if dt > 0 else 1024
    ts, ys, conts, nrec, nacc, nrej, emax, status = _rk.integrate_kernel(
        _rk.MODEL_LORENZ, y0, float(t0), float(duration), p.as_array(), cfg.rtol, cfg.atol,
        cfg.max_steps, dt, cap)
    _check_status(status, "integrate", ts[-1])
    return Trajectory(ts.copy(), ys.copy(), nacc, nrej, emax, None if dt > 0 else conts.copy())


def _run_crossings(model, y0, p, section, n, cfg):
    return _rk.crossings_kernel(model, y0, 0.0, p.as_array(), section.code(), section.level_for(p),
                                -1, int(n), cfg.time_cap, cfg.rtol, cfg.atol, cfg.min_flight,
                                cfg.max_steps)


def next_section_crossing(s0, section: Section = Section(), p: LorenzParams = LorenzParams(),
                          cfg: IntegratorConfig = IntegratorConfig()) -> SectionEvent:
    """First crossing strictly in the future of ``s0`` (a start on the section is skipped)."""
    y0 = State3.of(s0).as_array()
    ev_t, ev_y, found, _, t_end, _, status = _run_crossings(_rk.MODEL_LORENZ, y0, p, section, 1, cfg)
    _check_status(status, "next_section_crossing", t_end)
    return SectionEvent(State3.of(ev_y[0]), float(ev_t[0]), float(ev_t[0]))


def section_events(s0, n_events: int, section: Section = Section(), p: LorenzParams = LorenzParams(),
                   cfg: IntegratorConfig = IntegratorConfig(), allow_partial: bool = False):
    """Successive crossings along one orbit.

    Returns ``(times, points)``; ``times[0]`` is measured from the start, so
    ``flight_time[k] = times[k] - times[k-1]`` for ``k >= 1`` and ``times[0]`` for the first.
    """
    if n_events < 1:
        raise PreconditionError("n_events must be positive")
    y0 = State3.of(s0).as_array()
    ev_t, ev_y, found, _, t_end, _, status = _run_crossings(_rk.MODEL_LORENZ, y0, p, section,
                                                            n_events, cfg)
    if status != _rk.STATUS_OK and not (allow_partial and found > 0):
        _check_status(status, "section_events", t_end)
    return ev_t.copy(), ev_y.copy()


def attractor_point(p: LorenzParams = LorenzParams(), burn_in: float = 50.0,
                    s0=(1.0, 1.0, 1.0), cfg: IntegratorConfig = IntegratorConfig()) -> State3:
    """A point on the attractor: the end of a burn-in integration."""
    return integrate(s0, burn_in, p, cfg, sample_dt=burn_in).end
