"""Adaptive DOP853 (order 8, embedded 5th/3rd error, 7th-order dense output).

The stepping core follows Hairer's scheme; coefficients live in
_dop853_coefficients.  Written in nopython style so the jit engine can
compile it; the pure-Python path runs the same code.
"""

import math

import numpy as np

from ._engine import njit_or_py
from . import _dop853_coefficients as dc
from ._kernels import field_rhs, domain_violation

A_TAB = dc.A
B_TAB = dc.B
C_TAB = dc.C
E3_TAB = dc.E3
E5_TAB = dc.E5
D_TAB = dc.D

N_STAGES = dc.N_STAGES                  # 12
N_EXT = dc.N_STAGES_EXTENDED            # 16
I_POWER = dc.INTERPOLATOR_POWER         # 7

SAFETY = 0.9
MIN_FACTOR = 0.2
MAX_FACTOR = 10.0
ERR_EXP = -1.0 / 8.0

STATUS_DONE = 0
STATUS_SMALL_STEP = 1
STATUS_MAX_STEPS = 2
STATUS_DOMAIN = 3
STATUS_BAD_RHS = 4


@njit_or_py
def _rms(v):
    acc = 0.0
    for i in range(v.size):
        acc += v[i] * v[i]
    return math.sqrt(acc / v.size)


@njit_or_py
def _initial_step(fid, mu, delta, t0, y0, f0, direction, rtol, atol, max_step, span):
    n = y0.size
    scale = np.empty(n)
    for i in range(n):
        scale[i] = atol + abs(y0[i]) * rtol
    d0 = _rms(y0 / scale)
    d1 = _rms(f0 / scale)
    if d0 < 1e-5 or d1 < 1e-5:
        h0 = 1e-6
    else:
        h0 = 0.01 * d0 / d1
    h0 = min(h0, span)
    y1 = y0 + h0 * direction * f0
    f1 = np.empty(n)
    field_rhs(fid, y1, mu, delta, f1)
    d2 = _rms((f1 - f0) / scale) / h0
    if d1 <= 1e-15 and d2 <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** (1.0 / 8.0)
    return min(100.0 * h0, h1, span, max_step)


@njit_or_py
def dop853_integrate(fid, mu, delta, t0, y0, t_end, rtol, atol, max_step,
                     first_step, max_steps, coll_tol, c0, c1, check_domain):
    """Integrate field `fid` from (t0, y0) to t_end with dense output.

    Returns (status, ns, ts, ys, cont, nfev): ts has ns+1 entries, ys is
    (ns+1, n), cont is (ns, I_POWER, n) holding the interpolant of each step.
    """
    n = y0.size
    ts = np.empty(max_steps + 1)
    ys = np.empty((max_steps + 1, n))
    cont = np.empty((max_steps, I_POWER, n))
    K = np.empty((N_EXT, n))
    f0 = np.empty(n)
    field_rhs(fid, y0, mu, delta, f0)
    nfev = 1
    for i in range(n):
        if not math.isfinite(f0[i]):
            return STATUS_BAD_RHS, 0, ts, ys, cont, nfev

    direction = 1.0 if t_end >= t0 else -1.0
    span = abs(t_end - t0)
    if first_step > 0.0:
        h_abs = min(first_step, span, max_step)
    else:
        h_abs = _initial_step(fid, mu, delta, t0, y0, f0, direction,
                              rtol, atol, max_step, span)
        nfev += 1

    t = t0
    y = y0.copy()
    f = f0
    ts[0] = t0
    ys[0, :] = y0
    ns = 0
    status = STATUS_MAX_STEPS

    ytmp = np.empty(n)
    y_new = np.empty(n)
    f_new = np.empty(n)

    while ns < max_steps:
        if t == t_end:
            status = STATUS_DONE
            break
        min_step = 10.0 * abs(np.nextafter(t, direction * np.inf) - t)
        if h_abs > max_step:
            h_abs = max_step
        if h_abs < min_step:
            h_abs = min_step

        accepted = False
        rejected = False
        h = 0.0
        while not accepted:
            if h_abs < min_step and not rejected:
                # only fail when the controller drove us here
                pass
            h = h_abs * direction
            t_new = t + h
            if direction * (t_new - t_end) > 0.0:
                t_new = t_end
            h = t_new - t
            h_abs = abs(h)
            if h_abs < min_step * 0.5:
                status = STATUS_SMALL_STEP
                return status, ns, ts, ys, cont, nfev

            # 12-stage step
            for i in range(n):
                K[0, i] = f[i]
            bad = False
            for s in range(1, N_STAGES):
                for i in range(n):
                    acc = 0.0
                    for j in range(s):
                        acc += A_TAB[s, j] * K[j, i]
                    ytmp[i] = y[i] + h * acc
                field_rhs(fid, ytmp, mu, delta, K[s])
                nfev += 1
            for i in range(n):
                acc = 0.0
                for j in range(N_STAGES):
                    acc += B_TAB[j] * K[j, i]
                y_new[i] = y[i] + h * acc
                if not math.isfinite(y_new[i]):
                    bad = True
            if bad:
                return STATUS_BAD_RHS, ns, ts, ys, cont, nfev
            field_rhs(fid, y_new, mu, delta, f_new)
            nfev += 1
            for i in range(n):
                K[N_STAGES, i] = f_new[i]
                if not math.isfinite(f_new[i]):
                    bad = True
            if bad:
                return STATUS_BAD_RHS, ns, ts, ys, cont, nfev

            # blended 5th/3rd order error estimate
            err5_2 = 0.0
            err3_2 = 0.0
            for i in range(n):
                sc = atol + max(abs(y[i]), abs(y_new[i])) * rtol
                e5 = 0.0
                e3 = 0.0
                for j in range(N_STAGES + 1):
                    e5 += E5_TAB[j] * K[j, i]
                    e3 += E3_TAB[j] * K[j, i]
                e5 /= sc
                e3 /= sc
                err5_2 += e5 * e5
                err3_2 += e3 * e3
            if err5_2 == 0.0 and err3_2 == 0.0:
                err_norm = 0.0
            else:
                denom = err5_2 + 0.01 * err3_2
                err_norm = h_abs * err5_2 / math.sqrt(denom * n)

            if err_norm < 1.0:
                if err_norm == 0.0:
                    factor = MAX_FACTOR
                else:
                    factor = min(MAX_FACTOR, SAFETY * err_norm ** ERR_EXP)
                if rejected:
                    factor = min(1.0, factor)
                h_abs *= factor
                accepted = True
            else:
                h_abs *= max(MIN_FACTOR, SAFETY * err_norm ** ERR_EXP)
                rejected = True
                if h_abs < min_step:
                    status = STATUS_SMALL_STEP
                    return status, ns, ts, ys, cont, nfev

        # dense output: three extra stages, then the interpolant block
        for s in range(N_STAGES + 1, N_EXT):
            for i in range(n):
                acc = 0.0
                for j in range(s):
                    acc += A_TAB[s, j] * K[j, i]
                ytmp[i] = y[i] + h * acc
            field_rhs(fid, ytmp, mu, delta, K[s])
            nfev += 1

        for i in range(n):
            dy = y_new[i] - y[i]
            cont[ns, 0, i] = dy
            cont[ns, 1, i] = h * K[0, i] - dy
            cont[ns, 2, i] = 2.0 * dy - h * (K[N_STAGES, i] + K[0, i])
        for rr in range(4):
            for i in range(n):
                acc = 0.0
                for j in range(N_EXT):
                    acc += D_TAB[rr, j] * K[j, i]
                cont[ns, 3 + rr, i] = h * acc

        t = t_new
        for i in range(n):
            y[i] = y_new[i]
            f[i] = f_new[i]
        ns += 1
        ts[ns] = t
        ys[ns, :] = y

        if check_domain != 0:
            viol = domain_violation(fid, y, mu, delta, coll_tol, c0, c1)
            if viol != 0:
                status = STATUS_DOMAIN
                return status, ns, ts, ys, cont, nfev

    if t == t_end:
        status = STATUS_DONE
    return status, ns, ts, ys, cont, nfev


@njit_or_py
def dense_eval(t_old, h, y_old, F, t, out):
    """Evaluate one step's interpolant at time t."""
    x = (t - t_old) / h
    n = y_old.size
    for i in range(n):
        out[i] = 0.0
    for irow in range(I_POWER - 1, -1, -1):
        k = (I_POWER - 1) - irow
        if k % 2 == 0:
            for i in range(n):
                out[i] = (out[i] + F[irow, i]) * x
        else:
            for i in range(n):
                out[i] = (out[i] + F[irow, i]) * (1.0 - x)
    for i in range(n):
        out[i] += y_old[i]
