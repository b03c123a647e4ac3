"""Scalar math kernels for the rotating-frame three-body charts.

Everything here is nopython-compatible (see _engine) and operates on plain
floats / small ndarrays.  Complex secular pairs are stored on the real slice
as (Re, Im) of the first member; the partner is implied by conjugation.

State layouts (all length-4 float64 unless noted):
    cartesian : (q1, q2, p1, p2)        rotating synodic frame
    polar     : (r, theta, R, G)
    poincare  : (lambda, L, eta_re, eta_im)
    scaled    : (lambda, Lambda, x_re, x_im)

Chart conventions (ours; moduli/distances are convention independent):
    eta = L * (e1 + i*e2) / sqrt(L + G)  with (e1, e2) the Laplace vector in
    rotating axes, so eta = sqrt(L - G) * exp(i*g) and etadot ~ -i*eta for
    the Kepler flow.  Equations of motion on the real slice (x = u + i*v):
        du/dt = +0.5 * dH/dv,   dv/dt = -0.5 * dH/du.
"""

import math

import numpy as np

from ._engine import njit_or_py

# field ids used by the RK driver
FID_CART = 0
FID_POLAR = 1
FID_POIN = 2
FID_SCALED = 3
FID_PEND = 4
FID_CART_STM = 5
FID_PEND_STM = 6
FID_HARM = 7

NU_PEND = math.sqrt(21.0 / 8.0)        # saddle exponent of the slow system
LAMBDA0 = math.acos(0.5 - math.sqrt(2.0))  # separatrix apex


@njit_or_py
def _norm2(a, b):
    """sqrt(a*a + b*b); plain form so numba and CPython round identically."""
    return math.sqrt(a * a + b * b)


@njit_or_py
def wrap_angle(x):
    """Wrap to [-pi, pi)."""
    return (x + math.pi) % (2.0 * math.pi) - math.pi


# ----------------------------------------------------------------------
# pendulum potential V(lambda) = 1 - cos(l) - 1/sqrt(2 + 2cos(l))

@njit_or_py
def pot_V(lam):
    c = 2.0 + 2.0 * math.cos(lam)
    return 1.0 - math.cos(lam) - 1.0 / math.sqrt(c)


@njit_or_py
def pot_Vp(lam):
    c = 2.0 + 2.0 * math.cos(lam)
    return math.sin(lam) * (1.0 - c ** (-1.5))


@njit_or_py
def pot_Vpp(lam):
    c = 2.0 + 2.0 * math.cos(lam)
    s = math.sin(lam)
    return math.cos(lam) * (1.0 - c ** (-1.5)) - 3.0 * s * s * c ** (-2.5)


# ----------------------------------------------------------------------
# perturbing potential h1 with the 1/mu cancellation removed analytically:
#   mu*h1 = 1/|q| - (1-mu)/rS - mu/rP,  primaries at (mu,0) and (mu-1,0)

@njit_or_py
def h1_value(q1, q2, mu):
    r = _norm2(q1, q2)
    s1 = q1 - mu
    rs = _norm2(s1, q2)
    p1_ = q1 - mu + 1.0
    rp = _norm2(p1_, q2)
    # (1/mu) * (1/r - 1/rS) without subtractive cancellation
    bracket = (-2.0 * q1 + mu) / ((rs + r) * rs * r)
    return bracket + 1.0 / rs - 1.0 / rp


@njit_or_py
def h1_grad(q1, q2, mu):
    r = _norm2(q1, q2)
    s1 = q1 - mu
    rs = _norm2(s1, q2)
    t1 = q1 - mu + 1.0
    rp = _norm2(t1, q2)
    r3 = r * r * r
    rs3 = rs * rs * rs
    rp3 = rp * rp * rp
    # (1/mu) * d/dq [sS/rS^3 - q/r^3] assembled exactly
    fac = (2.0 * q1 - mu) * (r * r + r * rs + rs * rs) / (r + rs)
    den = 1.0 / (rs3 * r3)
    g1 = (s1 * fac - rs3) * den - s1 / rs3 + t1 / rp3
    g2 = (q2 * fac) * den - q2 / rs3 + q2 / rp3
    return g1, g2


# ----------------------------------------------------------------------
# cartesian chart

@njit_or_py
def cart_hamiltonian(y, mu):
    q1, q2, p1, p2 = y[0], y[1], y[2], y[3]
    rs = _norm2(q1 - mu, q2)
    rp = _norm2(q1 - mu + 1.0, q2)
    return 0.5 * (p1 * p1 + p2 * p2) + q2 * p1 - q1 * p2 \
        - (1.0 - mu) / rs - mu / rp


@njit_or_py
def cart_rhs(y, mu, out):
    q1, q2, p1, p2 = y[0], y[1], y[2], y[3]
    s1 = q1 - mu
    t1 = q1 - mu + 1.0
    rs = _norm2(s1, q2)
    rp = _norm2(t1, q2)
    rs3 = rs * rs * rs
    rp3 = rp * rp * rp
    out[0] = p1 + q2
    out[1] = p2 - q1
    out[2] = p2 - (1.0 - mu) * s1 / rs3 - mu * t1 / rp3
    out[3] = -p1 - (1.0 - mu) * q2 / rs3 - mu * q2 / rp3


@njit_or_py
def cart_field_jac(y, mu, A):
    """Jacobian of cart_rhs at y into the 4x4 array A."""
    q1, q2 = y[0], y[1]
    s1 = q1 - mu
    t1 = q1 - mu + 1.0
    rs2 = s1 * s1 + q2 * q2
    rp2 = t1 * t1 + q2 * q2
    rs = math.sqrt(rs2)
    rp = math.sqrt(rp2)
    rs5 = rs2 * rs2 * rs
    rp5 = rp2 * rp2 * rp
    ms = 1.0 - mu
    uxx = ms * (rs2 - 3.0 * s1 * s1) / rs5 + mu * (rp2 - 3.0 * t1 * t1) / rp5
    uyy = ms * (rs2 - 3.0 * q2 * q2) / rs5 + mu * (rp2 - 3.0 * q2 * q2) / rp5
    uxy = -3.0 * (ms * s1 * q2 / rs5 + mu * t1 * q2 / rp5)
    A[0, 0] = 0.0
    A[0, 1] = 1.0
    A[0, 2] = 1.0
    A[0, 3] = 0.0
    A[1, 0] = -1.0
    A[1, 1] = 0.0
    A[1, 2] = 0.0
    A[1, 3] = 1.0
    A[2, 0] = -uxx
    A[2, 1] = -uxy
    A[2, 2] = 0.0
    A[2, 3] = 1.0
    A[3, 0] = -uxy
    A[3, 1] = -uyy
    A[3, 2] = -1.0
    A[3, 3] = 0.0


# ----------------------------------------------------------------------
# polar chart

@njit_or_py
def polar_hamiltonian(y, mu):
    r, th, R, G = y[0], y[1], y[2], y[3]
    ct = math.cos(th)
    ds = math.sqrt(r * r - 2.0 * mu * r * ct + mu * mu)
    mp_ = mu - 1.0
    dp = math.sqrt(r * r - 2.0 * mp_ * r * ct + mp_ * mp_)
    return 0.5 * R * R + 0.5 * G * G / (r * r) - G \
        - (1.0 - mu) / ds - mu / dp


@njit_or_py
def polar_rhs(y, mu, out):
    r, th, R, G = y[0], y[1], y[2], y[3]
    ct = math.cos(th)
    st = math.sin(th)
    ds2 = r * r - 2.0 * mu * r * ct + mu * mu
    mp_ = mu - 1.0
    dp2 = r * r - 2.0 * mp_ * r * ct + mp_ * mp_
    ds3 = ds2 * math.sqrt(ds2)
    dp3 = dp2 * math.sqrt(dp2)
    out[0] = R
    out[1] = G / (r * r) - 1.0
    out[2] = G * G / (r * r * r) \
        - (1.0 - mu) * (r - mu * ct) / ds3 - mu * (r - mp_ * ct) / dp3
    out[3] = mu * (1.0 - mu) * r * st * (1.0 / dp3 - 1.0 / ds3)


@njit_or_py
def cart_to_polar(y, out):
    q1, q2, p1, p2 = y[0], y[1], y[2], y[3]
    r = _norm2(q1, q2)
    out[0] = r
    out[1] = math.atan2(q2, q1)
    out[2] = (q1 * p1 + q2 * p2) / r
    out[3] = q1 * p2 - q2 * p1


@njit_or_py
def polar_to_cart(y, out):
    r, th, R, G = y[0], y[1], y[2], y[3]
    ct = math.cos(th)
    st = math.sin(th)
    out[0] = r * ct
    out[1] = r * st
    out[2] = R * ct - G * st / r
    out[3] = R * st + G * ct / r


# ----------------------------------------------------------------------
# poincare chart.  cart -> poincare is explicit; the reverse needs a
# regularised Kepler solve in the eccentric longitude F.

@njit_or_py
def cart_to_poin(y, out):
    """Rotating osculating elements -> (lambda, L, Re eta, Im eta).

    Returns 0 on success, 1 if the osculating orbit is not elliptic,
    2 if the prograde secular pair is undefined (L + G <= 0).
    """
    q1, q2, p1, p2 = y[0], y[1], y[2], y[3]
    r = _norm2(q1, q2)
    e2b = 0.5 * (p1 * p1 + p2 * p2) - 1.0 / r
    if e2b >= -1e-12:
        return 1
    a = -0.5 / e2b
    L = math.sqrt(a)
    G = q1 * p2 - q2 * p1
    if L + G <= 1e-12:
        return 2
    ev1 = G * p2 - q1 / r
    ev2 = -G * p1 - q2 / r
    w = L / math.sqrt(L + G)
    theta = math.atan2(q2, q1)
    ecos_e = 1.0 - r / a
    esin_e = (q1 * p1 + q2 * p2) / L
    ecc = _norm2(ecos_e, esin_e)
    if ecc < 1e-14:
        lam = theta
    else:
        sE = esin_e / ecc
        cE = ecos_e / ecc
        beta = ecc / (1.0 + math.sqrt(max(1.0 - ecc * ecc, 0.0)))
        nu_m_e = 2.0 * math.atan2(beta * sE, 1.0 - beta * cE)
        lam = theta - nu_m_e - esin_e
    out[0] = wrap_angle(lam)
    out[1] = L
    out[2] = w * ev1
    out[3] = w * ev2
    return 0


@njit_or_py
def kepler_longitude(lam, k, h):
    """Solve F - k sinF + h cosF = lambda (eccentric longitude form).

    Newton with tolerance 1e-14, at most 50 iterations; returns (F, ok).
    """
    F = lam + k * math.sin(lam) - h * math.cos(lam)
    for _ in range(50):
        sF = math.sin(F)
        cF = math.cos(F)
        res = F - k * sF + h * cF - lam
        d = 1.0 - k * cF - h * sF
        dF = res / d
        F -= dF
        if abs(dF) < 1e-14:
            return F, 0
    return F, 1


@njit_or_py
def poin_to_cart(y, out):
    """(lambda, L, Re eta, Im eta) -> cartesian.  Returns 0 on success."""
    lam, L, er, ei = y[0], y[1], y[2], y[3]
    J = er * er + ei * ei
    G = L - J
    if L <= 0.0 or L + G <= 1e-12:
        return 2
    a = L * L
    w = math.sqrt(L + G) / L
    k = w * er
    h = w * ei
    m = k * k + h * h
    if m >= 1.0:
        return 1
    F, bad = kepler_longitude(lam, k, h)
    if bad != 0:
        return 3
    s = math.sqrt(1.0 - m)
    zeta = complex(k, h)
    ep = complex(math.cos(F), math.sin(F))
    em = ep.conjugate()
    D = 1.0 - (zeta * em + zeta.conjugate() * ep).real * 0.5
    qc = a * (ep * (1.0 + s) * 0.5 + em * zeta * zeta / (2.0 * (1.0 + s)) - zeta)
    pc = (1j / (2.0 * L * D)) * (ep * (1.0 + s) - em * zeta * zeta / (1.0 + s))
    out[0] = qc.real
    out[1] = qc.imag
    out[2] = pc.real
    out[3] = pc.imag
    return 0


@njit_or_py
def poin_to_cart_jac(y, out, jac):
    """Forward map and its 4x4 real Jacobian d(q,p)/d(lambda,L,eta_re,eta_im).

    Returns 0 on success (same failure codes as poin_to_cart).
    """
    lam, L, er, ei = y[0], y[1], y[2], y[3]
    J = er * er + ei * ei
    G = L - J
    if L <= 0.0 or L + G <= 1e-12:
        return 2
    a = L * L
    P = L + G
    sqP = math.sqrt(P)
    w = sqP / L
    eta = complex(er, ei)
    zeta = eta * w
    zb = eta.conjugate() * w
    m = (zeta * zb).real
    if m >= 1.0:
        return 1
    F, bad = kepler_longitude(lam, zeta.real, zeta.imag)
    if bad != 0:
        return 3
    s = math.sqrt(1.0 - m)
    ep = complex(math.cos(F), math.sin(F))
    em = ep.conjugate()
    D = 1.0 - (zeta * em + zb * ep).real * 0.5
    ops = 1.0 + s
    Q = ep * ops * 0.5 + em * zeta * zeta / (2.0 * ops) - zeta
    Bv = (ep * ops - em * zeta * zeta / ops) * 0.5
    qc = a * Q
    pc = (1j / (L * D)) * Bv
    out[0] = qc.real
    out[1] = qc.imag
    out[2] = pc.real
    out[3] = pc.imag

    # parameter loop: j = 0..3 over (lambda, L, eta_re, eta_im)
    for j in range(4):
        dlam = 1.0 if j == 0 else 0.0
        dL = 1.0 if j == 1 else 0.0
        if j == 2:
            deta = complex(1.0, 0.0)
        elif j == 3:
            deta = complex(0.0, 1.0)
        else:
            deta = complex(0.0, 0.0)
        dJ = (eta.conjugate() * deta + eta * deta.conjugate()).real
        dG = dL - dJ
        dP = dL + dG
        dw = dP / (2.0 * sqP * L) - sqP * dL / (L * L)
        dzeta = deta * w + eta * dw
        dzb = deta.conjugate() * w + eta.conjugate() * dw
        dm = (zb * dzeta + zeta * dzb).real
        ds = -dm / (2.0 * s)
        da = 2.0 * L * dL
        dF = (dlam - ((em * dzeta - ep * dzb) / 2j).real) / D
        dep = 1j * ep * dF
        dem = -1j * em * dF
        dQ = dep * ops * 0.5 + ep * ds * 0.5 \
            + dem * zeta * zeta / (2.0 * ops) \
            + em * (zeta * dzeta / ops - zeta * zeta * ds / (2.0 * ops * ops)) \
            - dzeta
        dBv = (dep * ops + ep * ds
               - dem * zeta * zeta / ops
               - em * (2.0 * zeta * dzeta / ops - zeta * zeta * ds / (ops * ops))) * 0.5
        dD = -((em * dzeta + ep * dzb) * 0.5).real \
            - ((zb * ep - zeta * em) * 1j * dF * 0.5).real
        dqc = da * Q + a * dQ
        dpc = pc * (-dL / L - dD / D) + (1j / (L * D)) * dBv
        jac[0, j] = dqc.real
        jac[1, j] = dqc.imag
        jac[2, j] = dpc.real
        jac[3, j] = dpc.imag
    return 0


@njit_or_py
def poin_hamiltonian(y, mu):
    lam, L, er, ei = y[0], y[1], y[2], y[3]
    out = np.empty(4)
    st = poin_to_cart(y, out)
    if st != 0:
        return math.nan
    return -0.5 / (L * L) - L + (er * er + ei * ei) \
        + mu * h1_value(out[0], out[1], mu)


@njit_or_py
def poin_rhs(y, mu, out):
    """Hamiltonian field of H^Poi in real-slice coordinates."""
    L = y[1]
    q = np.empty(4)
    jac = np.empty((4, 4))
    st = poin_to_cart_jac(y, q, jac)
    if st != 0:
        out[0] = math.nan
        out[1] = math.nan
        out[2] = math.nan
        out[3] = math.nan
        return
    g1, g2 = h1_grad(q[0], q[1], mu)
    hq_lam = g1 * jac[0, 0] + g2 * jac[1, 0]
    hq_L = g1 * jac[0, 1] + g2 * jac[1, 1]
    hq_er = g1 * jac[0, 2] + g2 * jac[1, 2]
    hq_ei = g1 * jac[0, 3] + g2 * jac[1, 3]
    out[0] = (1.0 / (L * L * L) - 1.0) + mu * hq_L
    out[1] = -mu * hq_lam
    out[2] = y[3] + 0.5 * mu * hq_ei
    out[3] = -y[2] - 0.5 * mu * hq_er


# ----------------------------------------------------------------------
# scaled chart

@njit_or_py
def scaled_to_poin(y, delta, out):
    out[0] = y[0]
    out[1] = 1.0 + delta * delta * y[1]
    out[2] = delta * y[2]
    out[3] = delta * y[3]


@njit_or_py
def poin_to_scaled(y, delta, out):
    out[0] = y[0]
    out[1] = (y[1] - 1.0) / (delta * delta)
    out[2] = y[2] / delta
    out[3] = y[3] / delta


@njit_or_py
def scaled_kepler_part(Lam, delta):
    """Exact -Lam^2 (3+2z)/(2(1+z)^2), z = delta^2 Lam: the scaled Kepler term."""
    z = delta * delta * Lam
    opz = 1.0 + z
    return -Lam * Lam * (3.0 + 2.0 * z) / (2.0 * opz * opz)


@njit_or_py
def scaled_kepler_part_d(Lam, delta):
    """d/dLam of scaled_kepler_part."""
    z = delta * delta * Lam
    opz = 1.0 + z
    return -Lam * (3.0 + 3.0 * z + z * z) / (opz * opz * opz)


@njit_or_py
def scaled_hamiltonian(y, mu, delta):
    pz = np.empty(4)
    scaled_to_poin(y, delta, pz)
    q = np.empty(4)
    st = poin_to_cart(pz, q)
    if st != 0:
        return math.nan
    return scaled_kepler_part(y[1], delta) \
        + (y[2] * y[2] + y[3] * y[3]) / (delta * delta) \
        + h1_value(q[0], q[1], mu)


@njit_or_py
def scaled_rhs(y, mu, delta, out):
    """Hamiltonian field of the scaled Hamiltonian (slow-fast time)."""
    pz = np.empty(4)
    scaled_to_poin(y, delta, pz)
    q = np.empty(4)
    jac = np.empty((4, 4))
    st = poin_to_cart_jac(pz, q, jac)
    if st != 0:
        out[0] = math.nan
        out[1] = math.nan
        out[2] = math.nan
        out[3] = math.nan
        return
    g1, g2 = h1_grad(q[0], q[1], mu)
    hq_lam = g1 * jac[0, 0] + g2 * jac[1, 0]
    hq_L = g1 * jac[0, 1] + g2 * jac[1, 1]
    hq_er = g1 * jac[0, 2] + g2 * jac[1, 2]
    hq_ei = g1 * jac[0, 3] + g2 * jac[1, 3]
    d2 = delta * delta
    out[0] = scaled_kepler_part_d(y[1], delta) + d2 * hq_L
    out[1] = -hq_lam
    out[2] = y[3] / d2 + 0.5 * delta * hq_ei
    out[3] = -y[2] / d2 - 0.5 * delta * hq_er


# ----------------------------------------------------------------------
# pendulum (slow subsystem, mu = 0 limit)

@njit_or_py
def pend_rhs(y, out):
    out[0] = -3.0 * y[1]
    out[1] = -pot_Vp(y[0])


# ----------------------------------------------------------------------
# dispatch for the RK driver

@njit_or_py
def field_rhs(fid, y, mu, delta, out):
    if fid == FID_CART:
        cart_rhs(y, mu, out)
    elif fid == FID_POLAR:
        polar_rhs(y, mu, out)
    elif fid == FID_POIN:
        poin_rhs(y, mu, out)
    elif fid == FID_SCALED:
        scaled_rhs(y, mu, delta, out)
    elif fid == FID_PEND:
        pend_rhs(y, out)
    elif fid == FID_CART_STM:
        cart_rhs(y[:4], mu, out[:4])
        A = np.empty((4, 4))
        cart_field_jac(y[:4], mu, A)
        for i in range(4):
            for j in range(4):
                acc = 0.0
                for k in range(4):
                    acc += A[i, k] * y[4 + 4 * k + j]
                out[4 + 4 * i + j] = acc
    elif fid == FID_PEND_STM:
        pend_rhs(y[:2], out[:2])
        vpp = pot_Vpp(y[0])
        # A = [[0, -3], [-V'', 0]]
        out[2] = -3.0 * y[4]
        out[3] = -3.0 * y[5]
        out[4] = -vpp * y[2]
        out[5] = -vpp * y[3]
    elif fid == FID_HARM:
        out[0] = y[1]
        out[1] = -y[0]


@njit_or_py
def domain_violation(fid, y, mu, delta, coll_tol, c0, c1):
    """Nonzero when y has left the chart's admissible region."""
    if fid == FID_CART or fid == FID_CART_STM:
        if _norm2(y[0] - mu, y[1]) < coll_tol:
            return 1
        if _norm2(y[0] - mu + 1.0, y[1]) < coll_tol:
            return 1
    elif fid == FID_POLAR:
        ct = math.cos(y[1])
        r = y[0]
        if r * r - 2.0 * mu * r * ct + mu * mu < coll_tol * coll_tol:
            return 1
        mp_ = mu - 1.0
        if r * r - 2.0 * mp_ * r * ct + mp_ * mp_ < coll_tol * coll_tol:
            return 1
    elif fid == FID_SCALED:
        if abs(wrap_angle(y[0] - math.pi)) <= c0:
            return 2
        if math.sqrt(y[1] * y[1] + y[2] * y[2] + y[3] * y[3]) >= c1:
            return 2
    elif fid == FID_POIN:
        if y[1] <= 0.1:
            return 2
    return 0


@njit_or_py
def batch_scaled_samples(ts, ys, cont, nsub, delta, tg, lam, Lam, xr, xi):
    """Scaled-chart coordinates on a refined grid over a raw cartesian
    trajectory's dense output (NaN where the element chart fails)."""
    n4 = 4
    tmp = np.empty(n4)
    w = np.empty(n4)
    sc = np.empty(n4)
    m = 0
    nsteps = ts.size - 1
    for i in range(nsteps):
        h = ts[i + 1] - ts[i]
        for j in range(nsub):
            t = ts[i] + h * j / nsub
            dense_eval_cart(ts[i], h, ys[i], cont[i], t, tmp)
            st = cart_to_poin(tmp, w)
            tg[m] = t
            if st == 0:
                poin_to_scaled(w, delta, sc)
                lam[m] = sc[0]
                Lam[m] = sc[1]
                xr[m] = sc[2]
                xi[m] = sc[3]
            else:
                lam[m] = np.nan
                Lam[m] = np.nan
                xr[m] = np.nan
                xi[m] = np.nan
            m += 1
    tg[m] = ts[nsteps]
    dense_eval_cart(ts[nsteps - 1], ts[nsteps] - ts[nsteps - 1],
                    ys[nsteps - 1], cont[nsteps - 1], ts[nsteps], tmp)
    st = cart_to_poin(tmp, w)
    if st == 0:
        poin_to_scaled(w, delta, sc)
        lam[m] = sc[0]
        Lam[m] = sc[1]
        xr[m] = sc[2]
        xi[m] = sc[3]
    else:
        lam[m] = np.nan
        Lam[m] = np.nan
        xr[m] = np.nan
        xi[m] = np.nan
    return m + 1


@njit_or_py
def dense_eval_cart(t_old, h, y_old, F, t, out):
    """Local copy of the 7-row dense evaluation for 4-vectors."""
    x = (t - t_old) / h
    for i in range(4):
        out[i] = 0.0
    for irow in range(6, -1, -1):
        k = 6 - irow
        if k % 2 == 0:
            for i in range(4):
                out[i] = (out[i] + F[irow, i]) * x
        else:
            for i in range(4):
                out[i] = (out[i] + F[irow, i]) * (1.0 - x)
    for i in range(4):
        out[i] += y_old[i]


@njit_or_py
def batch_section_scan(ts, ys, cont, nsub, delta, tg, theta, Lam_a, ok):
    """Chart-free section diagnostics over a raw cartesian trajectory:
    position angle, the action-based Lambda = (sqrt(a)-1)/delta^2 (defined
    whenever the osculating orbit is elliptic) and a chart-validity flag."""
    tmp = np.empty(4)
    w = np.empty(4)
    m = 0
    nsteps = ts.size - 1
    for i in range(nsteps):
        h = ts[i + 1] - ts[i]
        for j in range(nsub):
            t = ts[i] + h * j / nsub
            dense_eval_cart(ts[i], h, ys[i], cont[i], t, tmp)
            tg[m] = t
            r = _norm2(tmp[0], tmp[1])
            e2b = 0.5 * (tmp[2] * tmp[2] + tmp[3] * tmp[3]) - 1.0 / r
            theta[m] = math.atan2(tmp[1], tmp[0])
            if e2b < -1e-12:
                L = math.sqrt(-0.5 / e2b)
                Lam_a[m] = (L - 1.0) / (delta * delta)
                ok[m] = 1.0 if cart_to_poin(tmp, w) == 0 else 0.0
            else:
                Lam_a[m] = np.nan
                ok[m] = 0.0
            m += 1
    t = ts[nsteps]
    dense_eval_cart(ts[nsteps - 1], ts[nsteps] - ts[nsteps - 1],
                    ys[nsteps - 1], cont[nsteps - 1], t, tmp)
    tg[m] = t
    r = _norm2(tmp[0], tmp[1])
    e2b = 0.5 * (tmp[2] * tmp[2] + tmp[3] * tmp[3]) - 1.0 / r
    theta[m] = math.atan2(tmp[1], tmp[0])
    if e2b < -1e-12:
        L = math.sqrt(-0.5 / e2b)
        Lam_a[m] = (L - 1.0) / (delta * delta)
        ok[m] = 1.0 if cart_to_poin(tmp, w) == 0 else 0.0
    else:
        Lam_a[m] = np.nan
        ok[m] = 0.0
    return m + 1
