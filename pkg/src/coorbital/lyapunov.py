"""Lyapunov periodic orbits of the scaled fixed point, two independent ways:
a Fourier fixed-point scheme on the oscillator-phase graph, and a
differential corrector; plus Floquet analysis of the monodromy.

The orbit of amplitude rho lives on the energy level
H = rho^2/delta^2 + H(L) and is parametrized by the fast phase, with
frequency omega close to 1 in the tau-time d(tau)/dt = omega/delta^2.
"""

import math
from dataclasses import dataclass, replace

import numpy as np

from . import _kernels as _k
from .charts import ChartState, MassParam, hamiltonian
from .equilibria import locate_L3
from .flow import DEFAULT_FLOW, EventSpec, FlowConfig, find_event, integrate, \
    integrate_with_stm

PEND_BLOCK = np.array([[0.0, -3.0], [-7.0 / 8.0, 0.0]])


class FixedPointError(RuntimeError):
    pass


class CorrectorError(RuntimeError):
    pass


@dataclass(frozen=True)
class LyapunovOrbit:
    """Fourier representation over the oscillator phase phi."""
    mp: MassParam
    rho: float
    omega: float
    energy: float
    coef_lambda: np.ndarray    # complex FFT coefficients (numpy fft order)
    coef_J: np.ndarray
    coef_I: np.ndarray
    coef_tau: np.ndarray       # periodic part of tau-hat(phi) - phi
    fixed_point: np.ndarray    # scaled coordinates of L(delta)

    @property
    def n_grid(self):
        return self.coef_lambda.size

    @property
    def period_scaled(self):
        return 2.0 * math.pi * self.mp.delta ** 2 / self.omega

    def _eval_series(self, coef, phi):
        n = coef.size
        ks = np.fft.fftfreq(n, d=1.0 / n)
        return float(np.real(np.sum(coef * np.exp(1j * ks * phi))) / n)

    def w_lambda(self, phi):
        return self._eval_series(self.coef_lambda, phi)

    def w_J(self, phi):
        return self._eval_series(self.coef_J, phi)

    def w_I(self, phi):
        return self._eval_series(self.coef_I, phi)

    def tau_of_phi(self, phi):
        return phi + self._eval_series(self.coef_tau, phi)

    def phi_of_tau(self, tau):
        phi = tau
        for _ in range(60):
            f = self.tau_of_phi(phi) - tau
            if abs(f) < 1e-14:
                break
            # d tau/d phi = 1 + d(periodic)/d phi, evaluate by differences
            h = 1e-6
            d = (self.tau_of_phi(phi + h) - self.tau_of_phi(phi - h)) / (2 * h)
            phi -= f / d
        return phi

    def state_at_phi(self, phi):
        lam = self.w_lambda(phi)
        J = self.w_J(phi)
        I = self.w_I(phi)
        return _lya_to_scaled(lam, J, phi, I, self.rho, self.fixed_point,
                              self.mp)

    def state_at_tau(self, tau):
        return self.state_at_phi(self.phi_of_tau(tau))

    def state_at_time(self, t):
        """State at scaled time t (tau advances at omega/delta^2)."""
        return self.state_at_tau(t * self.omega / self.mp.delta ** 2)

    def sample(self, n=256):
        taus = np.linspace(0.0, 2.0 * math.pi, n, endpoint=False)
        return taus, np.array([self.state_at_tau(t) for t in taus])


def _lya_to_scaled(lam, J, phi, I, rho, L_vec, mp):
    amp = math.sqrt(rho * rho + I)
    return np.array([
        lam,
        J + L_vec[1],
        amp * math.cos(phi) + L_vec[2],
        -amp * math.sin(phi) + L_vec[3],
    ])


def level_set_I(lam, J, phi, rho, mp: MassParam, L_vec=None, H_L=None,
                tol=1e-12, max_iter=60):
    """The I resolving H(phi_Lya(lam, J, phi, I)) = rho^2/delta^2 + H(L).

    Fixed point of F[I] = I + rho^2 + delta^2 (H(L) - H^Lya(I)); the
    contraction constant is O(delta^4).
    """
    if L_vec is None or H_L is None:
        rec = locate_L3(mp)
        L_vec = rec.scaled.vec
        H_L = hamiltonian(rec.scaled)
    d2 = mp.delta ** 2
    I = 0.0
    last = np.inf
    for _ in range(max_iter):
        s = _lya_to_scaled(lam, J, phi, I, rho, L_vec, mp)
        Hs = _k.scaled_hamiltonian(s, mp.mu, mp.delta)
        F = I + rho * rho + d2 * (H_L - Hs)
        last = abs(F - I)
        I = F
        if rho * rho + I < -1e-15:      # beyond the level-equation noise
            raise FixedPointError("rho^2 + I left the positive cone")
        I = max(I, -rho * rho)
        if last < tol:
            return I
    raise FixedPointError(f"level-set iteration stalled (|dI| = {last:.2e})")


def _reduced_rhs(lam, J, phi, rho, mp, L_vec, H_L):
    """(f1, f2, g) of the graph system over the oscillator phase."""
    I = level_set_I(lam, J, phi, rho, mp, L_vec, H_L)
    s = _lya_to_scaled(lam, J, phi, I, rho, L_vec, mp)
    out = np.empty(4)
    _k.scaled_rhs(s, mp.mu, mp.delta, out)
    zr = s[2] - L_vec[2]
    zi = s[3] - L_vec[3]
    r2 = zr * zr + zi * zi
    phidot = -(out[3] * zr - out[2] * zi) / r2
    d2 = mp.delta ** 2
    f1 = out[0] + 3.0 * J
    f2 = out[1] + (7.0 / 8.0) * lam
    g = phidot - 1.0 / d2
    return f1, f2, g, I


def solve_orbit_fourier(rho, mp: MassParam, n_modes=32, tol=1e-13,
                        max_iter=80, max_grid=512) -> LyapunovOrbit:
    """Fixed point w = G[R[w]] in Fourier space (right inverse of the
    linearized operator solved mode by mode); adaptive mode doubling until
    the retained tail is negligible."""
    rec = locate_L3(mp)
    L_vec = rec.scaled.vec
    H_L = hamiltonian(rec.scaled)
    d2 = mp.delta ** 2
    n = max(4 * n_modes, 64)
    while True:
        phis = np.linspace(0.0, 2.0 * math.pi, n, endpoint=False)
        w = np.zeros((2, n))
        ks = np.fft.fftfreq(n, d=1.0 / n)
        # per-mode inverse of (ik - delta^2 A)
        inv = np.empty((n, 2, 2), dtype=complex)
        for j, k in enumerate(ks):
            M = 1j * k * np.eye(2) - d2 * PEND_BLOCK
            inv[j] = np.linalg.inv(M)
        err = np.inf
        err_prev = np.inf
        stagnant = 0
        for it in range(max_iter):
            R = np.empty((2, n))
            gs = np.empty(n)
            for j in range(n):
                f1, f2, g, _ = _reduced_rhs(w[0, j], w[1, j], phis[j], rho,
                                            mp, L_vec, H_L)
                Aw = PEND_BLOCK @ w[:, j]
                fac = 1.0 / (1.0 + d2 * g)
                R[0, j] = d2 * ((Aw[0] + f1) * fac - Aw[0])
                R[1, j] = d2 * ((Aw[1] + f2) * fac - Aw[1])
                gs[j] = g
            Rh = np.fft.fft(R, axis=1)
            wh = np.einsum("jab,bj->aj", inv, Rh)
            w_new = np.real(np.fft.ifft(wh, axis=1))
            damp = 0.5 if it < 3 else 1.0
            w_new = w + damp * (w_new - w)
            err = float(np.max(np.abs(w_new - w)))
            w = w_new
            if err < tol * max(1.0, float(np.max(np.abs(w)))):
                break
            # noise floor of the level-set evaluation: accept stagnation
            stagnant = stagnant + 1 if err > 0.5 * err_prev else 0
            err_prev = err
            if stagnant >= 3 and err < 1e-10:
                break
        else:
            raise FixedPointError(f"orbit iteration stalled (err = {err:.2e})")
        ch = np.fft.fft(w[0])
        tail = np.max(np.abs(ch[n // 4: 3 * n // 4])) if n >= 8 else 0.0
        head = np.max(np.abs(ch[1:])) if np.max(np.abs(ch[1:])) > 0 else 1.0
        if tail <= 1e-12 * head or n >= max_grid:
            break
        n *= 2
    # frequency and the tau(phi) reparametrization
    integrand = 1.0 / (1.0 + d2 * gs)
    c0 = float(np.mean(integrand))
    omega = 1.0 / c0
    # periodic part of tau-hat(phi) - phi via spectral antiderivative
    fh = np.fft.fft(omega * integrand - 1.0)
    ks = np.fft.fftfreq(n, d=1.0 / n)
    Gh = np.zeros_like(fh)
    nz = ks != 0
    Gh[nz] = fh[nz] / (1j * ks[nz])
    Gh[0] = -np.sum(Gh[nz])        # pin tau-hat(0) = 0
    Iv = np.array([level_set_I(w[0, j], w[1, j], phis[j], rho, mp, L_vec, H_L)
                   for j in range(n)])
    energy = rho * rho / d2 + H_L
    return LyapunovOrbit(mp=mp, rho=rho, omega=omega, energy=energy,
                         coef_lambda=np.fft.fft(w[0]), coef_J=np.fft.fft(w[1]),
                         coef_I=np.fft.fft(Iv), coef_tau=Gh,
                         fixed_point=L_vec.copy())


@dataclass(frozen=True)
class ShootingOrbit:
    """Dense differential-corrector solution (scaled chart)."""
    mp: MassParam
    rho: float
    energy: float
    state0: np.ndarray        # on the section Im x = Im x_L, Re x > Re x_L
    period_scaled: float
    closure_error: float

    def trajectory(self, config=DEFAULT_FLOW):
        return integrate(ChartState("scaled", self.state0, self.mp),
                         (0.0, self.period_scaled), config,
                         via_cartesian=True)

    def sample(self, n=256):
        traj = self.trajectory()
        taus = np.linspace(0.0, self.period_scaled, n, endpoint=False)
        return taus, np.array([traj(t) for t in taus])


def solve_orbit_shooting(mp: MassParam, energy=None, rho=None,
                         config: FlowConfig = DEFAULT_FLOW, tol=1e-12,
                         max_iter=40) -> ShootingOrbit:
    """Differential correction of the periodic orbit at the given scaled
    energy (or amplitude), seeded from the linear center flow."""
    rec = locate_L3(mp)
    L_vec = rec.scaled.vec
    H_L = hamiltonian(rec.scaled)
    if energy is None:
        if rho is None:
            raise ValueError("give energy or rho")
        energy = rho * rho / mp.delta ** 2 + H_L
    rho_eff = mp.delta * math.sqrt(max(energy - H_L, 0.0))
    if rho_eff <= 0.0:
        raise ValueError("energy must exceed the fixed point level")
    cfg = replace(config, energy_drift_bound=None)
    lam, J = 0.0, 0.0
    period_guess = 2.0 * math.pi * mp.delta ** 2

    def section_state(lam, J):
        # Im x pinned at the fixed point's; Re x from the energy level
        s = np.array([lam, J + L_vec[1], L_vec[2] + rho_eff, L_vec[3]])
        xr = rho_eff
        for _ in range(80):
            s[2] = L_vec[2] + xr
            F = _k.scaled_hamiltonian(s, mp.mu, mp.delta) - energy
            h = 1e-8 * max(1.0, abs(xr))
            s[2] = L_vec[2] + xr + h
            Fp = _k.scaled_hamiltonian(s, mp.mu, mp.delta) - energy
            d = (Fp - F) / h
            step = F / d
            xr -= step
            if abs(step) < 1e-15 + 1e-14 * abs(xr):
                break
        s[2] = L_vec[2] + xr
        return s

    def return_map(lam, J):
        s0 = section_state(lam, J)
        ev = EventSpec(lambda t, v: v[3] - L_vec[3], direction=-1, k=1,
                       admissible=lambda t, v: v[2] > L_vec[2],
                       name="oscillator section")
        t1, hit, _ = find_event(ChartState("scaled", s0, mp), ev,
                                2.2 * period_guess, cfg, t0=0.0,
                                via_cartesian=True, n_chunks=1,
                                t_skip=0.3 * period_guess)
        return t1, hit.vec, s0

    for it in range(max_iter):
        T, v1, s0 = return_map(lam, J)
        res = np.array([v1[0] - s0[0], v1[1] - s0[1]])
        if np.max(np.abs(res)) < tol:
            return ShootingOrbit(mp=mp, rho=rho_eff, energy=energy,
                                 state0=s0, period_scaled=T,
                                 closure_error=float(np.max(np.abs(res))))
        # finite-difference Jacobian of the 2d return residual
        Jm = np.empty((2, 2))
        hfd = 1e-8
        for c, (dl, dj) in enumerate(((hfd, 0.0), (0.0, hfd))):
            _, v1p, s0p = return_map(lam + dl, J + dj)
            rp = np.array([v1p[0] - s0p[0], v1p[1] - s0p[1]])
            Jm[:, c] = (rp - res) / hfd
        dlt = np.linalg.solve(Jm, res)
        lam -= dlt[0]
        J -= dlt[1]
    raise CorrectorError(f"corrector stalled (residual {np.max(np.abs(res)):.2e})")


@dataclass(frozen=True)
class FloquetData:
    multipliers: np.ndarray
    lam_h: float                  # the multiplier > 1
    unstable: np.ndarray          # scaled-chart direction at tau = 0
    stable: np.ndarray
    monodromy: np.ndarray
    det_error: float


def floquet(orbit, config: FlowConfig = DEFAULT_FLOW) -> FloquetData:
    """Monodromy over one period (variational flow transported to the
    scaled chart) and its multiplier structure {L_h, 1/L_h, 1, 1}."""
    mp = orbit.mp
    if isinstance(orbit, LyapunovOrbit):
        s0 = orbit.state_at_tau(0.0)
        T = orbit.period_scaled
    else:
        s0 = orbit.state0
        T = orbit.period_scaled
    cfg = replace(config, energy_drift_bound=None)
    traj = integrate_with_stm(ChartState("scaled", s0, mp), (0.0, T), cfg)
    M = traj.stm[-1]
    vals, vecs = np.linalg.eig(M)
    order = np.argsort(-np.abs(vals))
    lam_h = float(np.real(vals[order[0]]))
    vu = np.real(vecs[:, order[0]])
    vs = np.real(vecs[:, order[-1]])
    if vu[0] < 0:
        vu = -vu
    if vs[0] < 0:
        vs = -vs
    return FloquetData(multipliers=vals[order], lam_h=lam_h,
                       unstable=vu / np.linalg.norm(vu),
                       stable=vs / np.linalg.norm(vs), monodromy=M,
                       det_error=float(abs(np.linalg.det(M) - 1.0)))
