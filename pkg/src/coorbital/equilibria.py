"""Lagrange points: location, linearization, scaled fixed point and the
explicit diagonalizing frame of the saddle x center linear blocks."""

from dataclasses import dataclass

import numpy as np

from . import _kernels as _k
from .charts import (ChartState, MassParam, chart_jacobian, convert,
                     vector_field, DEFAULT_DOMAIN)

SQRT218 = np.sqrt(21.0 / 8.0)


class NewtonError(RuntimeError):
    pass


@dataclass(frozen=True)
class EquilibriumRecord:
    mp: MassParam
    cartesian: ChartState
    polar: ChartState
    poincare: ChartState
    scaled: ChartState
    jacobian: np.ndarray          # cartesian field Jacobian at the point
    eigvals: np.ndarray           # (4,) complex
    nu_hyp: float                 # positive real eigenvalue
    nu_ell: float                 # positive imaginary part of elliptic pair
    unstable_cart: np.ndarray     # unit, "+" oriented (scaled lambda-comp > 0)
    stable_cart: np.ndarray
    unstable_scaled: np.ndarray   # unit in (lambda, Lambda, Re x, Im x)
    stable_scaled: np.ndarray

    @property
    def d_mu(self):
        return float(self.cartesian.vec[0])

    @property
    def nu_hyp_scaled(self):
        """Saddle exponent in the scaled (slow-fast) time."""
        return self.nu_hyp / self.mp.delta ** 2


def _newton_equilibrium(mp, seed, tol=1e-14, max_iter=30):
    y = np.array(seed, dtype=float)
    f = np.empty(4)
    A = np.empty((4, 4))
    for _ in range(max_iter):
        _k.cart_rhs(y, mp.mu, f)
        if np.max(np.abs(f)) < tol:
            return y
        _k.cart_field_jac(y, mp.mu, A)
        y = y - np.linalg.solve(A, f)
    _k.cart_rhs(y, mp.mu, f)
    if np.max(np.abs(f)) < 100 * tol:
        return y
    raise NewtonError(f"equilibrium Newton stalled, |f| = {np.max(np.abs(f)):.2e}")


def locate_L3(mp: MassParam) -> EquilibriumRecord:
    """Newton-converged L3 with linearization and oriented eigenvectors."""
    d0 = 1.0 + (5.0 / 12.0) * mp.mu
    y = _newton_equilibrium(mp, (d0, 0.0, 0.0, d0))
    A = np.empty((4, 4))
    _k.cart_field_jac(y, mp.mu, A)
    vals, vecs = np.linalg.eig(A)
    # hyperbolic pair: dominant |Re|; elliptic pair: dominant |Im|
    i_h = np.argsort(-np.abs(vals.real))[:2]
    i_e = np.argsort(-np.abs(vals.imag))[:2]
    if set(i_h) & set(i_e):
        raise NewtonError("eigenvalue pairing failed (defective spectrum?)")
    nu_hyp = float(np.max(vals[i_h].real))
    nu_ell = float(np.max(np.abs(vals[i_e].imag)))
    iu = i_h[0] if vals[i_h[0]].real > 0 else i_h[1]
    ist = i_h[0] if vals[i_h[0]].real < 0 else i_h[1]
    vu = np.real(vecs[:, iu])
    vs = np.real(vecs[:, ist])
    cart = ChartState("cartesian", y, mp)
    jl = chart_jacobian(cart, "scaled")     # d scaled / d cart
    vu_s = jl @ vu
    vs_s = jl @ vs
    if vu_s[0] < 0:
        vu_s, vu = -vu_s, -vu
    if vs_s[0] < 0:
        vs_s, vs = -vs_s, -vs
    vu /= np.linalg.norm(vu)
    vs /= np.linalg.norm(vs)
    vu_s /= np.linalg.norm(vu_s)
    vs_s /= np.linalg.norm(vs_s)
    return EquilibriumRecord(
        mp=mp, cartesian=cart,
        polar=convert(cart, "polar"),
        poincare=convert(cart, "poincare"),
        scaled=convert(cart, "scaled"),
        jacobian=A, eigvals=vals, nu_hyp=nu_hyp, nu_ell=nu_ell,
        unstable_cart=vu, stable_cart=vs,
        unstable_scaled=vu_s, stable_scaled=vs_s)


def scaled_fixed_point(mp: MassParam) -> ChartState:
    """L3 in the scaled chart: (0, delta^2 L_Lambda, delta^3 L_x, ...)."""
    return locate_L3(mp).scaled


def spectrum_L3(mp: MassParam):
    """(nu_hyp, nu_ell, eigvals) of the L3 linearization (rotating time)."""
    rec = locate_L3(mp)
    return rec.nu_hyp, rec.nu_ell, rec.eigvals


@dataclass(frozen=True)
class LinearFrame:
    """Affine frame at the scaled fixed point diagonalizing the limit blocks.

    `matrix` maps local coordinates (v1, w1, v2, w2) to full scaled
    coordinates (lambda, Lambda, x, y); conformally symplectic with
    multiplier sqrt(8/21) (the slow-time normalization).
    """
    origin: ChartState
    matrix: np.ndarray    # (4,4) complex
    inverse: np.ndarray


def frame_matrices():
    """The explicit delta -> 0 frame matrix and its exact inverse."""
    a = 2.0 / np.sqrt(7.0)
    b = 1.0 / np.sqrt(6.0)
    c = (2.0 / 21.0) ** 0.25
    M = np.array([
        [a, a, 0, 0],
        [-b, b, 0, 0],
        [0, 0, c, 1j * c],
        [0, 0, c, -1j * c],
    ], dtype=complex)
    Minv = np.array([
        [1 / (2 * a), -1 / (2 * b), 0, 0],
        [1 / (2 * a), 1 / (2 * b), 0, 0],
        [0, 0, 1 / (2 * c), 1 / (2 * c)],
        [0, 0, -1j / (2 * c), 1j / (2 * c)],
    ], dtype=complex)
    return M, Minv


def linear_frame(mp: MassParam) -> LinearFrame:
    M, Minv = frame_matrices()
    return LinearFrame(origin=scaled_fixed_point(mp), matrix=M, inverse=Minv)


_CRIT_SEEDS = ("L1", "L2", "L3", "L4", "L5")


def find_critical_points(mp: MassParam) -> dict:
    """All five Lagrange points (smoke-test quality seeds)."""
    mu = mp.mu
    cbrt = (mu / 3.0) ** (1.0 / 3.0)
    seeds = {
        "L1": (mu - 1.0 + cbrt, 0.0),
        "L2": (mu - 1.0 - cbrt, 0.0),
        "L3": (1.0 + (5.0 / 12.0) * mu, 0.0),
        "L5": (mu - 0.5, np.sqrt(3.0) / 2.0),
        "L4": (mu - 0.5, -np.sqrt(3.0) / 2.0),
    }
    points = {}
    for name, (q1, q2) in seeds.items():
        y = _newton_equilibrium(mp, (q1, q2, -q2, q1))
        points[name] = ChartState("cartesian", y, mp)
    return points


def gradient_norm(state: ChartState) -> float:
    """|grad h| at a cartesian state (equals |X_h| in the euclidean norm)."""
    return float(np.linalg.norm(vector_field(state, DEFAULT_DOMAIN)))
