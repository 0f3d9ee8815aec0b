"""Command line entry point: ``lorenzmix <subcommand> [options]``.

Every run writes its data as CSV (or to stdout with ``--output -``) and a JSON
manifest with the tool version, the full configuration, the seed, wall-clock
time and summary metrics.  Options can also come from an INI file given with
``--config``: keys in ``[common]`` apply to every subcommand, keys in a section
named after the subcommand apply to it alone, and flags on the command line
override both.  A manifest written by an earlier run is accepted as a config
file too, which reproduces that run.

Exit codes: 0 success, 2 bad input or configuration, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import configparser
import datetime as _dt
import json
import math
import os
import sys
import time
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from ._io import write_csv, write_json
from .errors import ConvergenceError, NumericalError, PreconditionError

warnings.filterwarnings("ignore", message=".*TBB threading layer.*")

ENV_THREADS = "LORENZMIX_THREADS"
ENV_OUT_DIR = "LORENZMIX_OUT_DIR"

EXIT_OK, EXIT_USAGE, EXIT_NUMERICAL = 0, 2, 3


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise _UsageError(f"{self.prog}: error: {message}")


def _say(args, msg: str):
    if not getattr(args, "quiet", False):
        print(msg, file=sys.stderr)


def _pair(s) -> tuple[float, float]:
    if isinstance(s, (list, tuple)):
        vals = [float(v) for v in s]
    else:
        vals = [float(v) for v in str(s).split(",")]
    if len(vals) != 2:
        raise argparse.ArgumentTypeError(f"expected two comma-separated numbers, got {s!r}")
    return vals[0], vals[1]


def _triple(s) -> tuple[float, float, float]:
    vals = [float(v) for v in (s if isinstance(s, (list, tuple)) else str(s).split(","))]
    if len(vals) != 3:
        raise argparse.ArgumentTypeError(f"expected three comma-separated numbers, got {s!r}")
    return tuple(vals)


def _floats(s) -> list[float]:
    if isinstance(s, (list, tuple)):
        return [float(v) for v in s]
    out = []
    for v in str(s).split(","):
        v = v.strip().lower()
        out.append(math.pi if v == "pi" else float(v))
    if not out:
        raise argparse.ArgumentTypeError("expected a comma-separated list of numbers")
    return out


def _count(s) -> int:
    v = float(s)
    if v != int(v):
        raise argparse.ArgumentTypeError(f"expected an integer, got {s!r}")
    return int(v)


def _positive(s) -> float:
    v = float(s)
    if not v > 0:
        raise argparse.ArgumentTypeError(f"expected a positive number, got {s!r}")
    return v


# ---------------------------------------------------------------- shared options


def _common(p: argparse.ArgumentParser):
    g = p.add_argument_group("run")
    g.add_argument("--config", help="INI config file or an earlier run manifest (JSON)")
    g.add_argument("--out-dir", help=f"output directory (env {ENV_OUT_DIR}, default .)")
    g.add_argument("--output", help="data file path; '-' writes CSV to stdout")
    g.add_argument("--seed", type=_count, default=0)
    g.add_argument("--threads", type=_count, help=f"worker threads (env {ENV_THREADS})")
    g.add_argument("--quiet", action="store_true", help="no human-readable summary on stderr")


def _map_opts(p):
    g = p.add_argument_group("map family f(x) = sgn(x)(theta |x|^alpha - 1)")
    g.add_argument("--alpha", type=float, default=0.75)
    g.add_argument("--theta", type=float, default=1.95)


def _roof_opts(p):
    g = p.add_argument_group("roof r(x) = -coef ln|x| + r1")
    g.add_argument("--roof", choices=["default", "constant", "unit-log"], default="default",
                   help="default: coef = 1/lambda_u; unit-log: -ln|x|")
    g.add_argument("--roof-c", type=_positive, default=1.0, help="value of the constant roof")
    g.add_argument("--r1", type=float, default=1.0, help="smooth part of the default roof")


def _flow_opts(p):
    g = p.add_argument_group("Lorenz flow and integrator")
    g.add_argument("--sigma", type=float, default=10.0)
    g.add_argument("--rho", type=float, default=28.0)
    g.add_argument("--beta", type=float, default=8.0 / 3.0)
    g.add_argument("--rtol", type=_positive, default=1e-10)
    g.add_argument("--atol", type=_positive, default=1e-12)
    g.add_argument("--time-cap", type=_positive, default=200.0)


def _make_map(a):
    from .lorenz_map import LorenzLikeMap
    return LorenzLikeMap(a.alpha, a.theta)


def _make_roof(a):
    from .roof import constant_roof, default_roof, unit_log_roof
    if a.roof == "constant":
        return constant_roof(a.roof_c)
    if a.roof == "unit-log":
        return unit_log_roof()
    return default_roof(r1=a.r1)


def _flow(a):
    from .ode_flow import IntegratorConfig, LorenzParams
    return LorenzParams(a.sigma, a.rho, a.beta), IntegratorConfig(rtol=a.rtol, atol=a.atol, time_cap=a.time_cap)


def _density(m, n_bins: int, tol: float = 1e-12):
    from .invariant_measure import stationary_density, ulam_matrix
    P, cells = ulam_matrix(m, n_bins)
    return stationary_density(P, cells.src_edges, tol=tol)


_OBSERVABLES = {
    "x": lambda x, u: x,
    "u": lambda x, u: u,
    "x2": lambda x, u: x * x,
    "absx": lambda x, u: np.abs(x),
}


# ---------------------------------------------------------------- subcommands


def cmd_simulate(a, out):
    from .ode_flow import integrate
    p, cfg = _flow(a)
    tr = integrate(a.x0, a.duration, p, cfg, sample_dt=a.dt)
    s = tr.states
    out.csv(["t", "x", "y", "z"], [tr.times, s[:, 0], s[:, 1], s[:, 2]])
    return {"n_samples": len(tr), "n_steps": tr.n_steps, "n_rejected": tr.n_rejected,
            "max_error": tr.max_error, "end": s[-1]}


def cmd_section(a, out):
    from .ode_flow import Section, attractor_point, section_events
    p, cfg = _flow(a)
    s0 = attractor_point(p, a.burn_in, a.x0, cfg) if a.burn_in > 0 else a.x0
    sec = Section(a.kind, a.level)
    t, pts = section_events(s0, a.n, sec, p, cfg)
    ft = np.diff(np.concatenate([[0.0], t]))
    out.csv(["t_cross", "x", "y", "z", "flight_time"], [t, pts[:, 0], pts[:, 1], pts[:, 2], ft])
    return {"n_events": int(t.size), "mean_flight_time": float(ft[1:].mean()) if t.size > 1 else float(ft[0]),
            "section": sec.kind, "level": sec.level_for(p)}


def cmd_passage(a, out):
    from .local_passage import integrate_linear_passage, passage_face, passage_time
    from .ode_flow import LorenzParams, origin_spectrum
    spec = origin_spectrum(LorenzParams(a.sigma, a.rho, a.beta))
    rng = np.random.default_rng(a.seed)
    x1 = rng.uniform(-1.0, 1.0, a.n)
    x1[x1 == 0.0] = 0.5
    x2 = rng.uniform(-1.0, 1.0, a.n)
    faces = [passage_face(u, v, spec) for u, v in zip(x1, x2)]
    r0 = np.array([passage_time(u, spec) for u in x1])
    out.csv(["x1", "x2", "out_sign", "out_y", "out_z", "r0"],
            [x1, x2, np.array([f.sign for f in faces]), np.array([f.y2 for f in faces]),
             np.array([f.y3 for f in faces]), r0])
    err = 0.0
    for f in faces[: a.verify]:
        y = integrate_linear_passage(f.x1, f.x2, spec)
        err = max(err, abs(y[0] - f.sign), abs(y[1] - f.y2), abs(y[2] - f.y3))
    return {"n": a.n, "verified": min(a.verify, a.n), "max_integration_error": err,
            "lambda_u": spec.lambda_u, "lambda_s": spec.lambda_s, "lambda_ss": spec.lambda_ss}


def cmd_check_map(a, out):
    from .lorenz_map import check_conditions, leo_sufficiency
    m = _make_map(a)
    rep = check_conditions(m, a.grid, a.n_max)
    out.csv(["n", "min_derivative"], [np.arange(1, len(rep.per_n_min) + 1), rep.per_n_min])
    return {"min_derivative": rep.min_derivative, "c": rep.c, "tau": rep.tau, "f3_constant": rep.f3_constant,
            "f3_ratio_range": rep.f3_ratio_range, "expanding": rep.expanding,
            "pointwise_expanding": rep.pointwise_expanding, "bound_holds": rep.bound_holds,
            "sqrt2_sufficiency": leo_sufficiency(m), "f_of_1": float(m.eval(1.0)),
            "satisfies_definition": m.satisfies_definition(), "grid_size": rep.grid_size}


def cmd_check_leo(a, out):
    from .lorenz_map import check_leo
    if a.u is None:
        raise PreconditionError("check-leo needs --u a,b")
    m = _make_map(a)
    res = check_leo(m, a.u, a.k_max, target=a.target)
    out.csv(["k", "measure"], [np.arange(1, res.measures.size + 1), res.measures])
    metrics = {"success": res.success, "k": res.k, "covered_interval": res.covered_interval,
               "target": a.target if a.target else m.leo_target(), "U": a.u}
    if not res.success:
        out.fail(ConvergenceError(f"target not covered after {a.k_max} iterations (inconclusive)"))
    return metrics


def cmd_induce(a, out):
    from .induced_map import build_scheme, verify_gibbs_markov
    m = _make_map(a)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        s = build_scheme(m, a.y, a.depth, a.threshold)
    lo, hi, R = s.as_arrays()
    out.csv(["omega_left", "omega_right", "R"], [lo, hi, R])
    rep = verify_gibbs_markov(s, m, epsilon=a.epsilon, rng=a.seed)
    return {"n_branches": len(s.branches), "covered_fraction": s.covered_fraction,
            "pruned_measure": s.pruned_measure, "warnings": [str(w.message) for w in caught],
            "lambda_min": rep.lambda_min, "distortion_constant": rep.distortion_constant,
            "holder_exponent": rep.holder_exponent, "tail_ratio": rep.tail_ratio,
            "d_violations": len(rep.d_violations), "onto_max_error": rep.onto_max_error,
            "chain_rule_max_rel_error": rep.chain_rule_max_rel_error, "failures": rep.failures,
            "passed": rep.passed}


def cmd_ulam(a, out):
    d = _density(_make_map(a), a.bins, a.tol)
    out.csv(["bin_center", "density"], [d.centers, d.density])
    return {"n_bins": d.n_bins, "residual": d.residual, "iterations": d.iterations,
            "mirrored_l1": d.mirrored_l1, "total": d.total}


def cmd_suspend(a, out):
    from .suspension_flow import SuspensionPoint, observe_on_grid
    m, r = _make_map(a), _make_roof(a)
    x, u = observe_on_grid(SuspensionPoint(a.x0, a.u0), a.dt, a.n, m, r)
    h = _OBSERVABLES[a.observable](x, u)
    out.csv(["t", "h"], [a.dt * np.arange(a.n), h])
    return {"n": a.n, "dt": a.dt, "mean_h": float(np.mean(h)), "observable": a.observable}


def cmd_correlate(a, out):
    from .mixing_diagnostics import correlation
    m, r = _make_map(a), _make_roof(a)
    d = _density(m, a.bins)
    obs = _OBSERVABLES[a.observable]
    t = np.arange(0.0, a.t_max + 0.5 * a.dt, a.dt)
    cs = correlation(obs, obs, t, m, r, d, a.ensemble, t_burn=a.t_burn, seed=a.seed)
    out.csv(["t", "C", "stderr"], [cs.t_grid, cs.C, cs.stderr])
    nc = cs.normalized
    win = cs.t_grid >= a.window_start
    return {"C0": float(cs.C[0]), "max_abs_normalized_in_window": float(np.max(np.abs(nc[win]))) if win.any() else None,
            "window": [a.window_start, a.t_max], "n_ensemble": cs.n_ensemble, "n_rejected": cs.n_rejected}


def cmd_cohomology(a, out):
    from .mixing_diagnostics import cohomology_residual
    m, r = _make_map(a), _make_roof(a)
    res = [cohomology_residual(v, m, r, a.bins, a.max_iter, a.tol) for v in a.a]
    out.csv(["a", "residual", "abs_eigenvalue", "iterations", "converged"],
            [np.array(a.a), np.array([x.residual for x in res]), np.array([abs(x.eigenvalue) for x in res]),
             np.array([x.iterations for x in res]), np.array([int(x.converged) for x in res])])
    bad = [x.a for x in res if not x.converged]
    if bad:
        out.fail(ConvergenceError(f"eigenvalue modulus did not settle for a = {bad} (inconclusive)"))
    return {"a": a.a, "residual": [x.residual for x in res], "converged": [x.converged for x in res],
            "min_residual": min(x.residual for x in res)}


def cmd_obstruct(a, out):
    from .mixing_diagnostics import obstruction_sequence
    r = _make_roof(a)
    s = obstruction_sequence(a.a, r, a.epsilon, a.n)
    pe = s.phase_errors()
    out.csv(["n", "b_n", "x_n", "neg_log_x_n", "phase_error"], [s.n, s.b, s.x, s.neg_log_x, pe])
    ok = bool(np.all(pe < 1e-9))
    return {"alternating_sign": ok, "max_phase_error": float(pe.max()),
            "strictly_decreasing": s.strictly_decreasing(), "above_thresholds": s.above_thresholds(r),
            "below_dyadic": s.below_dyadic(), "n": a.n, "a": a.a, "epsilon": a.epsilon}


def _read_series(path: str) -> tuple[np.ndarray, float]:
    data = np.genfromtxt(path, delimiter=",", names=True)
    t, h = np.asarray(data["t"], float), np.asarray(data["h"], float)
    dt = np.diff(t)
    if t.size < 2 or np.ptp(dt) > 1e-9 * max(1.0, abs(dt.mean())):
        raise PreconditionError(f"{path}: series must be sampled on a uniform grid")
    return h, float(dt.mean())


def cmd_spectrum(a, out):
    from .mixing_diagnostics import power_spectrum
    from .suspension_flow import SuspensionPoint, observe_on_grid
    if a.input:
        h, dt = _read_series(a.input)
    else:
        m, r = _make_map(a), _make_roof(a)
        x, u = observe_on_grid(SuspensionPoint(a.x0, a.u0), a.dt, a.n, m, r)
        h, dt = _OBSERVABLES[a.observable](x, u), a.dt
    sp = power_spectrum(h - h.mean(), dt)
    out.csv(["freq", "power"], [sp.freq, sp.power])
    return {"length": int(h.size), "dt": dt, "max_fraction": sp.max_fraction,
            "peak_frequency": sp.peak_frequency}


def cmd_cone_check(a, out):
    from .cone_check import cone_invariance_report
    p, cfg = _flow(a)
    rep = cone_invariance_report(a.samples, a.slope, a.n_max, p, cfg, axis_burn=a.axis_burn, seed=a.seed)
    n = np.arange(1, a.n_max + 1)
    out.csv(["n", "min_expansion", "axis_min_expansion"], [n, rep.per_n_min, rep.axis_min_factors])
    return {"violations": rep.n_violations, "min_margin": rep.min_margin, "c": rep.c, "tau": rep.tau,
            "slope": rep.slope, "sample_size": rep.sample_size, "bound_holds": rep.bound_holds}


def cmd_extract_map(a, out):
    from .poincare_extraction import extract_map, extract_roof, lorenz_section_data, synthetic_events
    from .ode_flow import Section
    if a.synthetic:
        w, ft = synthetic_events(_make_map(a), _make_roof(a), a.events)
        coord = "x"
    else:
        p, cfg = _flow(a)
        pts, ft = lorenz_section_data(a.events, p, Section(a.kind), cfg, a.burn_in)
        coord = a.coordinate
        w = pts[:, {"x": 0, "y": 1, "z": 2}[coord]]
    em = extract_map(w, n_bins=a.bins, max_violation=a.max_violation)
    er = extract_roof(w, ft, em.c, window=a.window)
    x, fx = w[:-1], w[1:]
    out.csv(["x", "fx", "branch"], [x, fx, np.where(x < em.c, -1, 1)])
    out.csv(["x", "r"], [x, ft], suffix="_roof")
    fit = {"c": em.c, "lo": em.lo, "hi": em.hi, "limits": em.limits, "continuous": em.continuous,
           "coordinate": coord,
           "branches": {str(b.side): {"increasing": b.increasing, "knots_x": b.knots_x, "knots_y": b.knots_y,
                                      "n_pairs": b.n_pairs, "n_kept": b.n_kept, "mad": b.mad}
                        for b in (em.left, em.right)},
           "roof": {str(f.side): {"slope": f.slope, "intercept": f.intercept, "n": f.n,
                                  "rms_residual": f.rms_residual, "window": f.window}
                    for f in (er.left, er.right)}}
    out.json(fit, suffix="_fit")
    metrics = {"c": em.c, "violation_fraction": em.violation_fraction,
               "raw_violation_fraction": em.raw_violation_fraction,
               "roof_slope_left": er.left.slope, "roof_slope_right": er.right.slope,
               "lambda_u_hat": er.lambda_u_hat, "roof_flat": er.flat, "n_events": int(w.size)}
    try:
        metrics["alpha_hat_left"] = 1.0 + em.local_exponent(-1)
        metrics["alpha_hat_right"] = 1.0 + em.local_exponent(1)
    except NumericalError as e:
        metrics["alpha_hat_error"] = str(e)
    return metrics


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    top = _Parser(prog="lorenzmix", description="Numerical lab for geometric Lorenz flows and their mixing.")
    top.add_argument("--version", action="version", version=f"lorenzmix {__version__}")
    sub = top.add_subparsers(dest="command", metavar="SUBCOMMAND", parser_class=_Parser)

    def add(name, fn, help_, *groups):
        p = sub.add_parser(name, help=help_, description=help_)
        _common(p)
        for g in groups:
            g(p)
        p.set_defaults(func=fn)
        return p

    p = add("simulate", cmd_simulate, "integrate the Lorenz system and sample the orbit", _flow_opts)
    p.add_argument("--x0", type=_triple, default=(1.0, 1.0, 1.0))
    p.add_argument("--duration", type=_positive, default=50.0)
    p.add_argument("--dt", type=_positive, default=0.01, help="sampling interval of the dense output")

    p = add("section", cmd_section, "successive Poincare section crossings", _flow_opts)
    p.add_argument("--x0", type=_triple, default=(1.0, 1.0, 1.0))
    p.add_argument("--n", type=_count, default=1000)
    p.add_argument("--burn-in", type=float, default=50.0)
    p.add_argument("--kind", choices=["plane", "zmax"], default="plane")
    p.add_argument("--level", type=float, default=None, help="plane height (default rho - 1)")

    p = add("passage", cmd_passage, "tabulate the closed-form passage near the origin", _flow_opts)
    p.add_argument("--n", type=_count, default=1000)
    p.add_argument("--verify", type=_count, default=100, help="rows cross-checked by integration")

    p = add("check-map", cmd_check_map, "expansion and power-law conditions of the map", _map_opts)
    p.add_argument("--grid", type=_count, default=10_000)
    p.add_argument("--n-max", type=_count, default=20)

    p = add("check-leo", cmd_check_leo, "locally eventually onto check for an interval", _map_opts)
    p.add_argument("--u", type=_pair, default=None, help="interval a,b")
    p.add_argument("--k-max", type=_count, default=100)
    p.add_argument("--target", type=_pair, default=None)

    p = add("induce", cmd_induce, "build and verify a Gibbs-Markov inducing scheme", _map_opts)
    p.add_argument("--y", type=_pair, default=(-0.5, 0.5))
    p.add_argument("--depth", type=_count, default=25)
    p.add_argument("--threshold", type=float, default=0.99)
    p.add_argument("--epsilon", type=_positive, default=0.5)

    p = add("ulam", cmd_ulam, "invariant density by Ulam's method", _map_opts)
    p.add_argument("--bins", type=_count, default=4096)
    p.add_argument("--tol", type=_positive, default=1e-12)

    p = add("suspend", cmd_suspend, "observable along one suspension-flow orbit", _map_opts, _roof_opts)
    p.add_argument("--x0", type=float, default=0.3)
    p.add_argument("--u0", type=float, default=0.0)
    p.add_argument("--dt", type=_positive, default=0.5)
    p.add_argument("--n", type=_count, default=10_000)
    p.add_argument("--observable", choices=sorted(_OBSERVABLES), default="x")

    p = add("correlate", cmd_correlate, "ensemble correlation function of the suspension flow",
            _map_opts, _roof_opts)
    p.add_argument("--ensemble", type=_count, default=100_000)
    p.add_argument("--t-max", type=_positive, default=50.0)
    p.add_argument("--dt", type=_positive, default=0.5)
    p.add_argument("--t-burn", type=float, default=0.0)
    p.add_argument("--window-start", type=float, default=20.0)
    p.add_argument("--bins", type=_count, default=4096)
    p.add_argument("--observable", choices=sorted(_OBSERVABLES), default="x")

    p = add("cohomology", cmd_cohomology, "twisted transfer operator residual per frequency",
            _map_opts, _roof_opts)
    p.add_argument("--a", type=_floats, default=[0.5, 1.0, 2.0, math.pi], help="frequencies; 'pi' allowed")
    p.add_argument("--bins", type=_count, default=4096)
    p.add_argument("--max-iter", type=_count, default=2000)
    p.add_argument("--tol", type=_positive, default=1e-12)

    p = add("obstruct", cmd_obstruct, "alternating-phase sequence approaching the singularity", _roof_opts)
    p.add_argument("--a", type=_positive, default=1.0)
    p.add_argument("--n", type=_count, default=30)
    p.add_argument("--epsilon", type=_positive, default=0.5)

    p = add("spectrum", cmd_spectrum, "power spectrum of an observable series", _map_opts, _roof_opts)
    p.add_argument("--input", help="CSV with columns t,h (e.g. from suspend); otherwise simulated")
    p.add_argument("--x0", type=float, default=0.3)
    p.add_argument("--u0", type=float, default=0.0)
    p.add_argument("--dt", type=_positive, default=0.5)
    p.add_argument("--n", type=_count, default=2 ** 16)
    p.add_argument("--observable", choices=sorted(_OBSERVABLES), default="x")

    p = add("cone-check", cmd_cone_check, "cone invariance and expansion of the return map", _flow_opts)
    p.add_argument("--samples", type=_count, default=1000)
    p.add_argument("--slope", type=_positive, default=1.0)
    p.add_argument("--n-max", type=_count, default=8)
    p.add_argument("--axis-burn", type=_count, default=100)

    p = add("extract-map", cmd_extract_map, "empirical map and roof from section data",
            _flow_opts, _map_opts, _roof_opts)
    p.add_argument("--events", type=_count, default=50_000)
    p.add_argument("--kind", choices=["plane", "zmax"], default="zmax")
    p.add_argument("--coordinate", choices=["x", "y", "z"], default="z")
    p.add_argument("--burn-in", type=float, default=50.0)
    p.add_argument("--bins", type=_count, default=200)
    p.add_argument("--max-violation", type=float, default=0.01)
    p.add_argument("--window", type=_positive, default=0.03)
    p.add_argument("--synthetic", action="store_true", help="use an orbit of the map family instead of the flow")
    return top


def _subparsers(top) -> dict:
    for act in top._actions:
        if isinstance(act, argparse._SubParsersAction):
            return act.choices
    return {}


def _config_values(path: str, command: str) -> dict:
    p = Path(path)
    if not p.is_file():
        raise PreconditionError(f"config file {path} not found")
    if p.suffix == ".json":
        data = json.loads(p.read_text())
        cfg = data.get("config", data)
        return {k: v for k, v in cfg.items() if v is not None}
    cp = configparser.ConfigParser()
    try:
        cp.read_string(p.read_text())
    except configparser.Error as e:
        raise PreconditionError(f"config file {path}: {e}") from None
    vals = {}
    for sec in ("common", command):
        if cp.has_section(sec):
            vals.update(cp.items(sec))
    return vals


_RUN_KEYS = {"config", "func", "command"}


def _apply_config(sp: argparse.ArgumentParser, values: dict):
    actions = {a.dest: a for a in sp._actions}
    defaults = {}
    for key, v in values.items():
        dest = key.replace("-", "_")
        if dest in _RUN_KEYS:
            continue
        if dest not in actions:
            raise PreconditionError(f"unknown config key {key!r}")
        act = actions[dest]
        if isinstance(act, argparse._StoreTrueAction):
            v = v if isinstance(v, bool) else str(v).strip().lower() in ("1", "true", "yes", "on")
        elif isinstance(v, list):
            v = ",".join(str(x) for x in v)
        elif not isinstance(v, str):
            v = str(v)
        if act.choices is not None and not isinstance(v, bool) and v not in act.choices:
            raise PreconditionError(f"config key {key!r}: {v!r} not in {sorted(act.choices)}")
        defaults[dest] = v
    sp.set_defaults(**defaults)


class _Outputs:
    """Resolves output paths and collects what was written."""

    def __init__(self, a):
        self.args = a
        out_dir = a.out_dir or os.environ.get(ENV_OUT_DIR) or "."
        self.dir = Path(out_dir)
        self.stdout = a.output == "-"
        base = Path(a.output) if a.output and not self.stdout else self.dir / f"{a.command}.csv"
        if a.output and not self.stdout and not base.is_absolute() and a.out_dir:
            base = self.dir / base
        self.base = base
        self.written: list[str] = []
        self.failure: Exception | None = None

    def _path(self, suffix: str, ext: str) -> Path:
        return self.base.with_name(self.base.stem + suffix + ext)

    def csv(self, header, columns, suffix: str = ""):
        if self.stdout and not suffix:
            write_csv(None, header, columns)
            self.written.append("-")
        else:
            self.written.append(write_csv(self._path(suffix, ".csv"), header, columns))

    def json(self, data, suffix: str):
        self.written.append(write_json(self._path(suffix, ".json"), data))

    def fail(self, exc: Exception):
        self.failure = exc

    @property
    def manifest_path(self) -> Path:
        return self.dir / f"{self.args.command}.json" if self.stdout else self._path("", ".json")


def _set_threads(a):
    n = a.threads if a.threads is not None else os.environ.get(ENV_THREADS)
    if n is None:
        return None
    n = int(n)
    import numba
    if not 1 <= n:
        raise PreconditionError("thread count must be at least 1")
    numba.set_num_threads(min(n, numba.config.NUMBA_NUM_THREADS))
    return numba.get_num_threads()


def _config_echo(a) -> dict:
    cfg = {}
    for k, v in vars(a).items():
        if k in _RUN_KEYS:
            continue
        cfg[k] = list(v) if isinstance(v, tuple) else v
    return cfg


def dispatch(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    top = build_parser()
    if not argv:
        top.print_help(sys.stderr)
        return EXIT_USAGE
    try:
        a = top.parse_args(argv)
        if a.command is None:
            top.print_help(sys.stderr)
            return EXIT_USAGE
        if a.config:
            sp = _subparsers(top)[a.command]
            _apply_config(sp, _config_values(a.config, a.command))
            a = top.parse_args(argv)
    except _UsageError as e:
        print(e, file=sys.stderr)
        return EXIT_USAGE
    except PreconditionError as e:
        print(f"lorenzmix: config error: {e}", file=sys.stderr)
        return EXIT_USAGE

    t0 = time.perf_counter()
    started = _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
    try:
        threads = _set_threads(a)
        out = _Outputs(a)
        metrics = a.func(a, out)
    except PreconditionError as e:
        print(f"lorenzmix {a.command}: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_USAGE
    except NumericalError as e:
        print(f"lorenzmix {a.command}: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_NUMERICAL
    manifest = {
        "tool": "lorenzmix",
        "version": __version__,
        "command": a.command,
        "config": _config_echo(a),
        "seed": a.seed,
        "threads": threads,
        "started_utc": started,
        "wall_clock_s": time.perf_counter() - t0,
        "metrics": metrics,
        "outputs": out.written,
        "status": "ok" if out.failure is None else type(out.failure).__name__,
    }
    write_json(out.manifest_path, manifest)
    for k in sorted(metrics):
        v = metrics[k]
        if isinstance(v, np.ndarray) or (isinstance(v, (list, tuple)) and len(v) > 8):
            continue
        _say(a, f"{k}: {v}")
    _say(a, f"manifest: {out.manifest_path}")
    if out.failure is not None:
        print(f"lorenzmix {a.command}: {type(out.failure).__name__}: {out.failure}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


def main() -> None:
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
