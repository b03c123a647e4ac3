"""The unperturbed slow system: separatrix parametrization, the exponent
constant A, and the fundamental matrix of the variational equations along
the separatrix.

The slow Hamiltonian is H_p(lambda, Lambda) = -(3/2) Lambda^2 + V(lambda)
with V(l) = 1 - cos l - (2 + 2 cos l)^(-1/2); the right separatrix passes
through the apex (lambda_0, 0), lambda_0 = arccos(1/2 - sqrt(2)), at the
energy level -1/2.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels as _k
from . import _rk as _rk

LAMBDA0 = _k.LAMBDA0
NU = _k.NU_PEND                     # sqrt(21/8), the saddle exponent
X_PLUS = (math.sqrt(2.0) - 1.0) / 2.0
X_MINUS = -(math.sqrt(2.0) + 1.0) / 2.0

V = _k.pot_V
Vp = _k.pot_Vp
Vpp = _k.pot_Vpp

U_MAX_DEFAULT = 30.0


@dataclass(frozen=True)
class SeparatrixPoint:
    u: float
    lambda_p: float
    Lambda_p: float

    @property
    def energy(self):
        return -1.5 * self.Lambda_p ** 2 + V(self.lambda_p)


# beyond |u| = U_TAIL the shot trajectory leaves the stable manifold
# (local error amplified by e^{nu u}); the evaluation switches to the
# saddle-manifold expansion lambda_p = w + a3 w^3, w = C e^{-nu u}, whose
# cubic coefficient is exact (V is even, so even orders vanish):
U_TAIL = 4.0
A3_TAIL = -37.0 / 1344.0     # V''''(0) / (16 nu^2) with V''''(0) = -37/32


class _SeparatrixCache:
    """Dense separatrix trajectory, built once per (u_max, tol)."""

    def __init__(self, u_max, rtol=1e-13, atol=1e-14):
        self.u_max = u_max
        y0 = np.array([LAMBDA0, 0.0])
        sides = {}
        span = min(u_max, U_TAIL + 0.5)
        for sgn in (+1.0, -1.0):
            status, ns, ts, ys, cont, _ = _rk.dop853_integrate(
                _k.FID_PEND, 0.0, 0.0, 0.0, y0.copy(), sgn * span,
                rtol, atol, np.inf, 0.0, 200000, 0.0, 0.0, 0.0, 0)
            if status != _rk.STATUS_DONE:
                raise RuntimeError(f"separatrix integration failed ({status})")
            sides[sgn] = (ts[:ns + 1].copy(), ys[:ns + 1].copy(), cont[:ns].copy())
        self.sides = sides
        lam_m = self._eval_cache(U_TAIL)[0]
        w_m = lam_m
        for _ in range(4):   # invert lam = w + a3 w^3 exactly
            w_m -= (w_m + A3_TAIL * w_m ** 3 - lam_m) / (1.0 + 3.0 * A3_TAIL * w_m ** 2)
        self.tail_C = w_m * math.exp(NU * U_TAIL)

    def _eval_cache(self, u):
        sgn = 1.0 if u > 0 else -1.0
        ts, ys, cont = self.sides[sgn]
        if sgn > 0:
            i = min(max(int(np.searchsorted(ts, u, side="right")) - 1, 0),
                    len(ts) - 2)
        else:
            i = min(max(int(np.searchsorted(-ts, -u, side="right")) - 1, 0),
                    len(ts) - 2)
        out = np.empty(2)
        _rk.dense_eval(ts[i], ts[i + 1] - ts[i], ys[i], cont[i], u, out)
        return out

    def eval(self, u):
        if u == 0.0:
            return np.array([LAMBDA0, 0.0])
        if abs(u) > self.u_max:
            raise ValueError(f"|u| = {abs(u):g} beyond separatrix domain "
                             f"({self.u_max:g})")
        if abs(u) <= U_TAIL:
            return self._eval_cache(u)
        w = self.tail_C * math.exp(-NU * abs(u))
        lam = w + A3_TAIL * w ** 3
        Lam = (NU / 3.0) * (w + 3.0 * A3_TAIL * w ** 3)
        return np.array([lam, Lam if u > 0 else -Lam])


_CACHE = {}


def _cache(u_max=U_MAX_DEFAULT):
    key = round(u_max, 9)
    if key not in _CACHE:
        _CACHE[key] = _SeparatrixCache(u_max)
    return _CACHE[key]


def separatrix(u, u_max=U_MAX_DEFAULT) -> SeparatrixPoint:
    """Separatrix point at time parameter u (cached dense evaluation)."""
    lam, Lam = _cache(u_max).eval(float(u))
    return SeparatrixPoint(float(u), float(lam), float(Lam))


def separatrix_raw(u, u_max=U_MAX_DEFAULT):
    return _cache(u_max).eval(float(u))


def separatrix_direct(u, rtol=1e-13):
    """Re-integrated (uncached) separatrix point, for validation."""
    y0 = np.array([LAMBDA0, 0.0])
    if u == 0.0:
        return SeparatrixPoint(0.0, LAMBDA0, 0.0)
    status, ns, ts, ys, _, _ = _rk.dop853_integrate(
        _k.FID_PEND, 0.0, 0.0, 0.0, y0, float(u), rtol, 1e-14, np.inf,
        0.0, 200000, 0.0, 0.0, 0.0, 0)
    if status != _rk.STATUS_DONE:
        raise RuntimeError("separatrix integration failed")
    return SeparatrixPoint(float(u), float(ys[ns][0]), float(ys[ns][1]))


def u_of_lambda(lam_star, u_max=U_MAX_DEFAULT):
    """The u > 0 with lambda_p(u) = lam_star (returning branch, Lambda > 0)."""
    if not 0.0 < lam_star < LAMBDA0:
        raise ValueError("lambda_star must lie in (0, lambda_0)")
    a, b = 0.0, u_max
    fa = LAMBDA0 - lam_star
    cache = _cache(u_max)
    for _ in range(200):
        m = 0.5 * (a + b)
        fm = cache.eval(m)[0] - lam_star
        if fa * fm <= 0.0:
            b = m
        else:
            a, fa = m, fm
        if b - a < 1e-14 * (1.0 + abs(m)):
            break
    return 0.5 * (a + b)


# ----------------------------------------------------------------------
# the constant A = int_0^{(sqrt2-1)/2} 2/(1-x) sqrt(x / (3(x+1)(1-4x-4x^2)))

def a_integrand(x):
    """Integrand of the exponent constant (vanishes at x = 0; the quadratic
    under the root is factored exactly as 4(x_+ - x)(x - x_-))."""
    if x <= 0.0 or x >= X_PLUS:
        return 0.0
    return 2.0 / (1.0 - x) * math.sqrt(
        x / (3.0 * (x + 1.0) * 4.0 * (X_PLUS - x) * (x - X_MINUS)))


def constant_A(n_nodes=96):
    """A by the singularity-absorbing substitution x = x_+ sin^2(phi)."""
    nodes, weights = np.polynomial.legendre.leggauss(n_nodes)
    phi = 0.25 * math.pi * (nodes + 1.0)
    w = 0.25 * math.pi * weights
    acc = 0.0
    for p, ww in zip(phi, w):
        x = X_PLUS * math.sin(p) ** 2
        f = 2.0 / (1.0 - x) / math.sqrt(3.0 * (x + 1.0)) \
            * X_PLUS * math.sin(p) ** 2 / math.sqrt(x - X_MINUS)
        acc += ww * f
    return acc


def constant_A_tanh_sinh(levels=14):
    """A by double-exponential (tanh-sinh) quadrature on the raw integral.

    Distances to both endpoints are evaluated in closed form so the
    inverse-square-root endpoint singularity is handled without cancellation.
    """
    result_prev = None
    for lev in range(4, levels + 1):
        h = 1.0 / 2 ** (lev - 4) * 0.5
        kmax = int(4.5 / h)
        acc = 0.0
        for k in range(-kmax, kmax + 1):
            t = k * h
            s = math.sinh(t) * math.pi / 2.0
            # x = X_PLUS/(1+e^{-2s}),  X_PLUS - x = X_PLUS/(1+e^{2s})
            d_low = X_PLUS / (1.0 + math.exp(-2.0 * s))
            d_up = X_PLUS / (1.0 + math.exp(2.0 * s))
            x = d_low
            wnode = X_PLUS * (math.pi / 4.0) * math.cosh(t) / math.cosh(s) ** 2
            f = 2.0 / (1.0 - x) * math.sqrt(
                d_low / (3.0 * (x + 1.0) * 4.0 * d_up * (x - X_MINUS)))
            acc += wnode * f
        val = acc * h
        if result_prev is not None and abs(val - result_prev) < 5e-14:
            return val
        result_prev = val
    return result_prev


# ----------------------------------------------------------------------
# fundamental matrix along the separatrix

@dataclass(frozen=True)
class FundamentalMatrix:
    """Phi(u) with Phi(0) = Id, det = 1: pendulum block from the separatrix
    solutions, oscillator block from the fast phases."""
    u: float
    matrix: np.ndarray    # (4,4) complex
    f_phi: float
    g_phi: float
    xi: float             # the auxiliary second-solution function at u


class _XiMachine:
    """The regularized second solution xi(u) = Lambda_p(u) I(u; u0) where
    I = int du / Lambda_p^2, with the double pole at 0 removed analytically
    (the residue vanishes, so the real-line principal part is canonical)."""

    def __init__(self, u_max=U_MAX_DEFAULT, split=1e-2, series_tol=1e-3):
        self.cache = _cache(u_max)
        self.split = split
        self.series_tol = series_tol
        self.dLam0 = -Vp(LAMBDA0)                  # Lambda_p'(0) > 0
        # Lambda_p = dLam0*u + Lam3*u^3 + ...,  Lam3 = -V''(l0) V'(l0)/2
        self.Lam3 = -Vpp(LAMBDA0) * Vp(LAMBDA0) / 2.0
        self.Q0 = -2.0 * self.Lam3 / self.dLam0 ** 3
        # curvature of Q by Richardson at two small offsets
        q1 = self._q_direct(0.02)
        q2 = self._q_direct(0.01)
        self.Q2 = (4.0 * (q2 - self.Q0) / 1e-4 - (q1 - self.Q0) / 4e-4) / 3.0

    def lam_p(self, u):
        return self.cache.eval(u)[0]

    def Lam_p(self, u):
        if u == 0.0:
            return 0.0
        return self.cache.eval(u)[1]

    def dLam_p(self, u):
        return -Vp(self.cache.eval(u)[0])

    def _q_direct(self, v):
        L = self.Lam_p(v)
        return 1.0 / (L * L) - 1.0 / (self.dLam0 * v) ** 2

    def q(self, v):
        if abs(v) < self.series_tol:
            return self.Q0 + self.Q2 * v * v
        return self._q_direct(v)

    def t_integral(self, v, n_panel_nodes=32):
        """T(v) = int_0^v Q, adaptive fixed-order panels."""
        if v == 0.0:
            return 0.0
        nodes, weights = np.polynomial.legendre.leggauss(n_panel_nodes)
        n_panels = max(4, int(abs(v) * 8) + 1)
        edges = np.linspace(0.0, v, n_panels + 1)
        acc = 0.0
        for a, b in zip(edges[:-1], edges[1:]):
            mid = 0.5 * (a + b)
            rad = 0.5 * (b - a)
            for x, w in zip(nodes, weights):
                acc += rad * w * self.q(mid + rad * x)
        return acc

    def s_reg(self, v):
        """S(v) = -1/(dLam0^2 v) + T(v): an antiderivative of 1/Lambda_p^2."""
        return -1.0 / (self.dLam0 ** 2 * v) + self.t_integral(v)

    def xi(self, u, u0):
        if u0 == 0.0:
            raise ValueError("u0 = 0 is not admissible for xi")
        s0 = self.s_reg(u0)
        if abs(u) < self.series_tol:
            c2 = self.dLam0 * self.Q0 - self.Lam3 / self.dLam0 ** 2
            return (-1.0 / self.dLam0 - self.dLam0 * s0 * u
                    + c2 * u * u - self.Lam3 * s0 * u ** 3)
        return self.Lam_p(u) * (self.s_reg(u) - s0)

    def xi_dot(self, u, u0):
        if u0 == 0.0:
            raise ValueError("u0 = 0 is not admissible for xi")
        s0 = self.s_reg(u0)
        if abs(u) < self.series_tol:
            c2 = self.dLam0 * self.Q0 - self.Lam3 / self.dLam0 ** 2
            return -self.dLam0 * s0 + 2.0 * c2 * u - 3.0 * self.Lam3 * s0 * u * u
        return self.dLam_p(u) * (self.s_reg(u) - s0) + 1.0 / self.Lam_p(u)


_XI = {}


def _xi_machine(split=1e-2):
    key = round(split, 12)
    if key not in _XI:
        _XI[key] = _XiMachine(split=split)
    return _XI[key]


def xi_var(u, u0, split=1e-2):
    """The normalized second variational solution along the separatrix:
    Lambda_p(u) * int_{u0}^{u} dv / Lambda_p(v)^2 (named xi_var to avoid a
    clash with the secular coordinate)."""
    return _xi_machine(split).xi(float(u), float(u0))


def fundamental_matrix(u, u0, mp=None, split=1e-2) -> FundamentalMatrix:
    """Phi(u): pendulum block + fast oscillator phases (needs mp for delta).

    Phi(0) = Id and det Phi = 1; the pendulum block is independent of u0.
    """
    m = _xi_machine(split)
    if u0 == 0.0:
        raise ValueError("u0 = 0 is not admissible")
    u = float(u)
    xi0 = -1.0 / m.dLam0
    xid0 = -m.dLam0 * m.s_reg(float(u0))
    xiu = m.xi(u, u0)
    xidu = m.xi_dot(u, u0)
    Lam = m.Lam_p(u)
    dLam = m.dLam_p(u)
    f = (xiu - (xid0 / m.dLam0) * Lam) / (3.0 * xi0)
    fd = (xidu - (xid0 / m.dLam0) * dLam) / (3.0 * xi0)
    g = -Lam / m.dLam0
    gd = -dLam / m.dLam0
    M = np.zeros((4, 4), dtype=complex)
    M[0, 0] = 3.0 * f
    M[0, 1] = 3.0 * g
    M[1, 0] = -fd
    M[1, 1] = -gd
    if mp is not None and mp.mu > 0.0:
        ph = u / mp.delta ** 2
        M[2, 2] = np.exp(-1j * ph)   # x rotates clockwise in our convention
        M[3, 3] = np.exp(1j * ph)
    else:
        M[2, 2] = 1.0
        M[3, 3] = 1.0
    return FundamentalMatrix(u=u, matrix=M, f_phi=f, g_phi=g, xi=xiu)


def pend_block_by_integration(u, rtol=1e-13):
    """The 2x2 pendulum variational block by direct STM integration
    (independent check of the closed form)."""
    y0 = np.array([LAMBDA0, 0.0, 1.0, 0.0, 0.0, 1.0])
    if u == 0.0:
        return np.eye(2)
    status, ns, ts, ys, _, _ = _rk.dop853_integrate(
        _k.FID_PEND_STM, 0.0, 0.0, 0.0, y0, float(u), rtol, 1e-14, np.inf,
        0.0, 200000, 0.0, 0.0, 0.0, 0)
    if status != _rk.STATUS_DONE:
        raise RuntimeError("pendulum STM integration failed")
    return ys[ns][2:].reshape(2, 2)
