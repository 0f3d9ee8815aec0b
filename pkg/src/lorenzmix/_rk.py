"""Dormand-Prince 5(4) kernels compiled with numba.

Three right-hand sides share the stepper (selected by ``model``):

    0  Lorenz system, params (sigma, rho, beta)
    1  Lorenz system plus its variational equation, state (x, y, z, Phi row-major)
    2  diagonal linear system d/dt x_i = params[i] * x_i

Section crossings are detected on the first three components; ``kind`` 0 is the
plane ``z = level``, ``kind`` 1 is the z-maximum surface ``xy - beta z = 0``.
"""

import numpy as np
from numba import njit

MODEL_LORENZ = 0
MODEL_VARIATIONAL = 1
MODEL_LINEAR = 2

SECTION_PLANE_Z = 0
SECTION_Z_MAX = 1

STATUS_OK = 0
STATUS_UNDERFLOW = 1
STATUS_NONFINITE = 2
STATUS_MAX_STEPS = 3
STATUS_TIMEOUT = 4

C2, C3, C4, C5 = 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0
A21 = 1.0 / 5.0
A31, A32 = 3.0 / 40.0, 9.0 / 40.0
A41, A42, A43 = 44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0
A51, A52, A53, A54 = 19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0
A61, A62, A63, A64, A65 = (9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0,
                           49.0 / 176.0, -5103.0 / 18656.0)
A71, A73, A74, A75, A76 = (35.0 / 384.0, 500.0 / 1113.0, 125.0 / 192.0,
                           -2187.0 / 6784.0, 11.0 / 84.0)
# 5th-order weights minus embedded 4th-order weights
E1 = 71.0 / 57600.0
E3 = -71.0 / 16695.0
E4 = 71.0 / 1920.0
E5 = -17253.0 / 339200.0
E6 = 22.0 / 525.0
E7 = -1.0 / 40.0
# continuous extension (Hairer & Wanner, dopri5 contd5)
D1 = -12715105075.0 / 11282082432.0
D3 = 87487479700.0 / 32700410799.0
D4 = -10690763975.0 / 1880347072.0
D5 = 701980252875.0 / 199316789632.0
D6 = -1453857185.0 / 822651844.0
D7 = 69997945.0 / 29380423.0


@njit(cache=True)
def rhs(model, y, p, out):
    if model == MODEL_LINEAR:
        for i in range(y.shape[0]):
            out[i] = p[i] * y[i]
        return
    s, r, b = p[0], p[1], p[2]
    x, yy, z = y[0], y[1], y[2]
    out[0] = s * (yy - x)
    out[1] = r * x - yy - x * z
    out[2] = x * yy - b * z
    if model == MODEL_VARIATIONAL:
        # dPhi/dt = J Phi, Phi stored row-major in y[3:12]
        j00, j01, j02 = -s, s, 0.0
        j10, j11, j12 = r - z, -1.0, -x
        j20, j21, j22 = yy, x, -b
        for c in range(3):
            f0 = y[3 + c]
            f1 = y[6 + c]
            f2 = y[9 + c]
            out[3 + c] = j00 * f0 + j01 * f1 + j02 * f2
            out[6 + c] = j10 * f0 + j11 * f1 + j12 * f2
            out[9 + c] = j20 * f0 + j21 * f1 + j22 * f2


@njit(cache=True)
def section_value(kind, level, y, p):
    if kind == SECTION_PLANE_Z:
        return y[2] - level
    return y[0] * y[1] - p[2] * y[2]


@njit(cache=True)
def section_rate(kind, y, p):
    """Time derivative of ``section_value`` along the Lorenz flow."""
    s, r, b = p[0], p[1], p[2]
    dx = s * (y[1] - y[0])
    dy = r * y[0] - y[1] - y[0] * y[2]
    dz = y[0] * y[1] - b * y[2]
    if kind == SECTION_PLANE_Z:
        return dz
    return dx * y[1] + y[0] * dy - b * dz


@njit(cache=True)
def _step(model, y, f0, h, p, k2, k3, k4, k5, k6, k7, ytmp, ynew, err):
    n = y.shape[0]
    for i in range(n):
        ytmp[i] = y[i] + h * A21 * f0[i]
    rhs(model, ytmp, p, k2)
    for i in range(n):
        ytmp[i] = y[i] + h * (A31 * f0[i] + A32 * k2[i])
    rhs(model, ytmp, p, k3)
    for i in range(n):
        ytmp[i] = y[i] + h * (A41 * f0[i] + A42 * k2[i] + A43 * k3[i])
    rhs(model, ytmp, p, k4)
    for i in range(n):
        ytmp[i] = y[i] + h * (A51 * f0[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i])
    rhs(model, ytmp, p, k5)
    for i in range(n):
        ytmp[i] = y[i] + h * (A61 * f0[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i])
    rhs(model, ytmp, p, k6)
    for i in range(n):
        ynew[i] = y[i] + h * (A71 * f0[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i])
    rhs(model, ynew, p, k7)
    for i in range(n):
        err[i] = h * (E1 * f0[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i])


@njit(cache=True)
def _error_norm(y, ynew, err, rtol, atol):
    n = y.shape[0]
    acc = 0.0
    for i in range(n):
        sc = atol + rtol * max(abs(y[i]), abs(ynew[i]))
        q = err[i] / sc
        acc += q * q
    return np.sqrt(acc / n)


@njit(cache=True)
def _dense_coeffs(y, ynew, f0, k3, k4, k5, k6, k7, h, cont):
    n = y.shape[0]
    for i in range(n):
        ydiff = ynew[i] - y[i]
        bspl = h * f0[i] - ydiff
        cont[0, i] = y[i]
        cont[1, i] = ydiff
        cont[2, i] = bspl
        cont[3, i] = ydiff - h * k7[i] - bspl
        cont[4, i] = h * (D1 * f0[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i])


@njit(cache=True)
def dense_eval(cont, theta, out):
    th1 = 1.0 - theta
    for i in range(cont.shape[1]):
        out[i] = cont[0, i] + theta * (cont[1, i] + th1 * (cont[2, i] + theta * (cont[3, i] + th1 * cont[4, i])))


@njit(cache=True)
def _initial_step(model, y, f0, p, rtol, atol, direction_h):
    n = y.shape[0]
    d0 = 0.0
    d1 = 0.0
    for i in range(n):
        sc = atol + rtol * abs(y[i])
        d0 += (y[i] / sc) ** 2
        d1 += (f0[i] / sc) ** 2
    d0 = np.sqrt(d0 / n)
    d1 = np.sqrt(d1 / n)
    if not (np.isfinite(d0) and np.isfinite(d1)):
        # overflowing field: a zero step makes the caller report underflow
        return 0.0
    if d0 < 1e-5 or d1 < 1e-5:
        h0 = 1e-6
    else:
        h0 = 0.01 * d0 / d1
    y1 = y + h0 * f0
    f1 = np.empty(n)
    rhs(model, y1, p, f1)
    d2 = 0.0
    for i in range(n):
        sc = atol + rtol * abs(y[i])
        d2 += ((f1[i] - f0[i]) / sc) ** 2
    d2 = np.sqrt(d2 / n) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** 0.2
    return min(100.0 * h0, h1, direction_h)


@njit(cache=True)
def integrate_kernel(model, y0, t0, duration, p, rtol, atol, max_steps, out_dt, max_samples):
    """Integrate for ``duration``.

    With ``out_dt > 0`` the solution is sampled on the grid ``t0 + k*out_dt``
    through the dense output; otherwise every accepted step is recorded together
    with its dense-output coefficients.

    Returns (times, states, cont, n_recorded, n_accepted, n_rejected, max_err, status).
    """
    n = y0.shape[0]
    record_steps = out_dt <= 0.0
    cap = max_samples
    times = np.empty(cap)
    states = np.empty((cap, n))
    if record_steps:
        conts = np.empty((cap, 5, n))
    else:
        conts = np.empty((1, 5, n))
    times[0] = t0
    states[0] = y0
    nrec = 1

    y = y0.copy()
    f0 = np.empty(n)
    rhs(model, y, p, f0)
    k2 = np.empty(n)
    k3 = np.empty(n)
    k4 = np.empty(n)
    k5 = np.empty(n)
    k6 = np.empty(n)
    k7 = np.empty(n)
    ytmp = np.empty(n)
    ynew = np.empty(n)
    err = np.empty(n)
    cont = np.empty((5, n))
    sample = np.empty(n)

    t = t0
    t_end = t0 + duration
    h = _initial_step(model, y, f0, p, rtol, atol, duration)
    n_acc = 0
    n_rej = 0
    max_err = 0.0
    status = STATUS_OK
    next_sample = t0 + out_dt
    rejected_last = False
    while t < t_end:
        if n_acc + n_rej >= max_steps:
            status = STATUS_MAX_STEPS
            break
        last = False
        if t + h >= t_end:
            h = t_end - t
            last = True
        if h <= 1e-14 * max(1.0, abs(t)):
            if last:
                break
            status = STATUS_UNDERFLOW
            break
        _step(model, y, f0, h, p, k2, k3, k4, k5, k6, k7, ytmp, ynew, err)
        en = _error_norm(y, ynew, err, rtol, atol)
        if not np.isfinite(en):
            n_rej += 1
            rejected_last = True
            h *= 0.1
            if h <= 1e-14 * max(1.0, abs(t)):
                status = STATUS_NONFINITE
                break
            continue
        if en <= 1.0:
            if en > max_err:
                max_err = en
            t_new = t_end if last else t + h
            if record_steps:
                if nrec >= cap:
                    cap2 = 2 * cap
                    times2 = np.empty(cap2)
                    states2 = np.empty((cap2, n))
                    conts2 = np.empty((cap2, 5, n))
                    times2[:nrec] = times[:nrec]
                    states2[:nrec] = states[:nrec]
                    conts2[:nrec] = conts[:nrec]
                    times, states, conts, cap = times2, states2, conts2, cap2
                _dense_coeffs(y, ynew, f0, k3, k4, k5, k6, k7, h, cont)
                conts[nrec - 1] = cont
                times[nrec] = t_new
                states[nrec] = ynew
                nrec += 1
            else:
                if next_sample <= t_new + 1e-12 * out_dt:
                    _dense_coeffs(y, ynew, f0, k3, k4, k5, k6, k7, h, cont)
                    while next_sample <= t_new + 1e-12 * out_dt and nrec < cap:
                        theta = (next_sample - t) / h
                        if theta > 1.0:
                            theta = 1.0
                        dense_eval(cont, theta, sample)
                        times[nrec] = next_sample
                        states[nrec] = sample
                        nrec += 1
                        next_sample = t0 + nrec * out_dt
            t = t_new
            for i in range(n):
                y[i] = ynew[i]
                f0[i] = k7[i]
            n_acc += 1
            fac = 0.9 * en ** -0.2 if en > 0.0 else 10.0
            fac = min(10.0, max(0.2, fac))
            if rejected_last:
                fac = min(1.0, fac)
            rejected_last = False
            if not last:
                h = h * fac
        else:
            n_rej += 1
            rejected_last = True
            h = h * max(0.2, 0.9 * en ** -0.2)
    return times[:nrec], states[:nrec], conts[:max(nrec - 1, 0)], nrec, n_acc, n_rej, max_err, status


@njit(cache=True)
def _polish_crossing(model, y, f0, h, cont, kind, level, g_lo_sign, p,
                     k2, k3, k4, k5, k6, k7, ytmp, err, out):
    """Refine a crossing inside the accepted step of length ``h`` starting at ``y``.

    Works in the offset from the step start, so the result is not limited by the
    resolution of the absolute time.  Bisection on the dense output narrows the
    bracket; Newton iterations then use fresh Runge-Kutta sub-steps from ``y``,
    so the returned state in ``out`` is an integrated point, not an interpolant.
    Returns the offset.
    """
    n = y.shape[0]
    a = 0.0
    b = h
    for _ in range(200):
        if b - a <= 1e-13 * h:
            break
        m = 0.5 * (a + b)
        dense_eval(cont, m / h, ytmp)
        gm = section_value(kind, level, ytmp, p)
        if g_lo_sign * gm > 0.0:
            a = m
        else:
            b = m
    dc = 0.5 * (a + b)
    for _ in range(10):
        _step(model, y, f0, dc, p, k2, k3, k4, k5, k6, k7, ytmp, out, err)
        g = section_value(kind, level, out, p)
        gd = section_rate(kind, out, p)
        if gd == 0.0:
            break
        delta = g / gd
        dn = dc - delta
        if dn <= 0.0 or dn > h * (1.0 + 1e-6):
            break
        dc = dn
        if abs(delta) <= 1e-16 * h:
            break
    _step(model, y, f0, dc, p, k2, k3, k4, k5, k6, k7, ytmp, out, err)
    return dc


@njit(cache=True)
def crossings_kernel(model, y0, t0, p, kind, level, direction, n_events, time_cap,
                     rtol, atol, min_flight, max_steps):
    """Collect the next ``n_events`` crossings of a section along one orbit.

    ``direction = -1`` accepts crossings where the section function goes from
    positive to non-positive.  Crossings closer than ``min_flight`` to the
    previous event (or to ``t0``) are ignored, which makes a start point lying
    on the section return the next crossing.

    Returns (event_times, event_states, n_found, y_end, t_end, n_steps, status).
    """
    n = y0.shape[0]
    ev_t = np.empty(n_events)
    ev_y = np.empty((n_events, n))
    y = y0.copy()
    f0 = np.empty(n)
    rhs(model, y, p, f0)
    k2 = np.empty(n)
    k3 = np.empty(n)
    k4 = np.empty(n)
    k5 = np.empty(n)
    k6 = np.empty(n)
    k7 = np.empty(n)
    ytmp = np.empty(n)
    ynew = np.empty(n)
    err = np.empty(n)
    cont = np.empty((5, n))
    ycross = np.empty(n)
    s2 = np.empty(n)
    s3 = np.empty(n)
    s4 = np.empty(n)
    s5 = np.empty(n)
    s6 = np.empty(n)
    s7 = np.empty(n)
    stmp = np.empty(n)
    serr = np.empty(n)

    t = t0
    t_last = t0
    h = _initial_step(model, y, f0, p, rtol, atol, 1.0)
    g_prev = section_value(kind, level, y, p)
    found = 0
    steps = 0
    status = STATUS_OK
    rejected_last = False
    while found < n_events:
        if steps >= max_steps:
            status = STATUS_MAX_STEPS
            break
        if t - t_last > time_cap:
            status = STATUS_TIMEOUT
            break
        if h <= 1e-14 * max(1.0, abs(t)):
            status = STATUS_UNDERFLOW
            break
        _step(model, y, f0, h, p, k2, k3, k4, k5, k6, k7, ytmp, ynew, err)
        steps += 1
        en = _error_norm(y, ynew, err, rtol, atol)
        if not np.isfinite(en):
            h *= 0.1
            rejected_last = True
            continue
        if en > 1.0:
            rejected_last = True
            h = h * max(0.2, 0.9 * en ** -0.2)
            continue
        g_new = section_value(kind, level, ynew, p)
        crossed = (direction < 0 and g_prev > 0.0 and g_new <= 0.0) or \
                  (direction > 0 and g_prev < 0.0 and g_new >= 0.0)
        if crossed:
            _dense_coeffs(y, ynew, f0, k3, k4, k5, k6, k7, h, cont)
            dc = _polish_crossing(model, y, f0, h, cont, kind, level,
                                  1.0 if g_prev > 0.0 else -1.0, p,
                                  s2, s3, s4, s5, s6, s7, stmp, serr, ycross)
            tc = t + dc
            if tc - t_last > min_flight:
                ev_t[found] = tc
                ev_y[found] = ycross
                found += 1
                t_last = tc
        t = t + h
        for i in range(n):
            y[i] = ynew[i]
            f0[i] = k7[i]
        g_prev = g_new
        fac = 0.9 * en ** -0.2 if en > 0.0 else 10.0
        fac = min(10.0, max(0.2, fac))
        if rejected_last:
            fac = min(1.0, fac)
        rejected_last = False
        h = h * fac
    return ev_t[:found], ev_y[:found], found, y, t, steps, status
