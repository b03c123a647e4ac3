import math

import numpy as np
import pytest

from coorbital.charts import ChartState, MassParam, hamiltonian, involution
from coorbital.equilibria import locate_L3
from coorbital.lyapunov import (floquet, level_set_I, solve_orbit_fourier,
                                solve_orbit_shooting)


def test_level_set_trivial(mp001):
    assert level_set_I(0.0, 0.0, 0.3, 0.0, mp001) == 0.0


def test_level_set_size_and_residual(mp001):
    rho = 0.05
    d = mp001.delta
    rec = locate_L3(mp001)
    H_L = hamiltonian(rec.scaled)
    for lam, J, phi in ((0.001, 0.001, 0.3), (-0.002, 0.0005, 2.0),
                        (0.0, -0.001, 4.4)):
        I = level_set_I(lam, J, phi, rho, mp001)
        assert abs(I) <= 10.0 * d ** 4 * rho ** 2
        # defining-equation residual at the fixed point
        from coorbital.lyapunov import _lya_to_scaled
        import coorbital._kernels as K
        s = _lya_to_scaled(lam, J, phi, I, rho, rec.scaled.vec, mp001)
        resid = mp001.delta ** 2 * (
            K.scaled_hamiltonian(s, mp001.mu, d) - rho ** 2 / d ** 2 - H_L)
        assert abs(resid) < 1e-12


def test_orbit_degenerates_at_zero_amplitude(mp001):
    # the graph amplitude shrinks linearly with rho (the measurable floor
    # of the level-set equation sits near rho ~ 1e-7, so the limit is
    # verified through the scaling rather than at literal zero)
    sups = []
    for rho in (1e-4, 1e-5, 1e-6):
        orb = solve_orbit_fourier(rho, mp001)
        sups.append(max(abs(orb.w_lambda(p)) + abs(orb.w_J(p))
                        for p in np.linspace(0, 2 * np.pi, 17)))
    assert sups[2] < 2e-7
    assert sups[0] / sups[1] == pytest.approx(10.0, rel=0.1)
    assert sups[1] / sups[2] == pytest.approx(10.0, rel=0.1)


def test_orbit_sup_norm_bound(mp001):
    for rho in (0.01, 0.05):
        orb = solve_orbit_fourier(rho, mp001)
        sup = max(abs(orb.w_lambda(p)) + abs(orb.w_J(p))
                  for p in np.linspace(0, 2 * np.pi, 33))
        assert sup <= 10.0 * mp001.delta * rho


def test_frequency_defect_stable_across_delta():
    vals = []
    for delta in (0.25, 0.3, 0.35):
        orb = solve_orbit_fourier(0.05, MassParam(delta ** 4))
        v = abs(orb.omega - 1.0) / delta ** 4
        assert v <= 10.0
        vals.append(v)
    assert max(vals) / min(vals) < 4.0


def test_energy_constant_along_orbit(lyapunov_pair, mp001):
    orb, _ = lyapunov_pair
    for tau in np.linspace(0, 2 * np.pi, 17):
        s = ChartState("scaled", orb.state_at_tau(tau), mp001)
        assert abs(hamiltonian(s) - orb.energy) < 1e-11


def test_fourier_vs_shooting_agreement(lyapunov_pair):
    orb, sh = lyapunov_pair
    assert abs(orb.period_scaled - sh.period_scaled) < 1e-8 * orb.period_scaled
    traj = sh.trajectory()
    ts = np.linspace(0, sh.period_scaled, 64, endpoint=False)
    sup = 0.0
    for t in ts:
        ref = sh.state0 if t == 0 else traj(t)
        sup = max(sup, float(np.max(np.abs(orb.state_at_time(t) - ref))))
    assert sup <= 1e-9


def test_shooting_periodicity(lyapunov_pair):
    _, sh = lyapunov_pair
    assert sh.closure_error < 1e-11
    assert sh.period_scaled == pytest.approx(
        2 * math.pi * sh.mp.delta ** 2 / 1.0086, rel=1e-3)


def test_orbit_circles_fixed_point(lyapunov_pair, mp001):
    orb, _ = lyapunov_pair
    rec = locate_L3(mp001)
    xs = np.array([complex(*orb.state_at_tau(t)[2:])
                   for t in np.linspace(0, 2 * np.pi, 64, endpoint=False)])
    center = complex(rec.scaled.vec[2], rec.scaled.vec[3])
    radii = np.abs(xs - center)
    assert abs(np.mean(radii) - orb.rho) <= 10.0 * mp001.delta * orb.rho
    assert np.max(np.abs(radii - np.mean(radii))) <= 10.0 * mp001.delta * orb.rho


def test_flow_residual_of_reconstruction(lyapunov_pair, mp001):
    from coorbital.charts import vector_field
    orb, _ = lyapunov_pair
    h = 1e-6
    worst = 0.0
    for tau in np.linspace(0, 2 * np.pi, 64, endpoint=False):
        t0 = tau * orb.period_scaled / (2 * np.pi)
        dstate = (orb.state_at_time(t0 + h) - orb.state_at_time(t0 - h)) / (2 * h)
        f = vector_field(ChartState("scaled", orb.state_at_time(t0), mp001))
        worst = max(worst, float(np.max(np.abs(dstate - f))))
    assert worst < 1e-6   # FD differentiation noise dominates


def test_orbit_reversibility(lyapunov_pair, mp001):
    # Phi maps the orbit to itself with reversed phase
    orb, _ = lyapunov_pair
    worst = 0.0
    for tau in np.linspace(0, 2 * np.pi, 16, endpoint=False):
        a = involution(ChartState("scaled", orb.state_at_tau(tau), mp001)).vec
        b = orb.state_at_tau(-tau)
        worst = max(worst, float(np.max(np.abs(a - b))))
    assert worst < 1e-9


def test_energy_labeling_both_ways(lyapunov_pair, mp001):
    # scaled level rho^2/delta^2 + H(L) corresponds to the rotating-frame
    # level sqrt(mu) rho^2 + h(L3)
    orb, _ = lyapunov_pair
    rec = locate_L3(mp001)
    h_L3 = hamiltonian(rec.cartesian)
    s0 = ChartState("scaled", orb.state_at_tau(0.3), mp001)
    from coorbital.charts import convert
    h_orbit = hamiltonian(convert(s0, "cartesian"))
    varrho2 = math.sqrt(mp001.mu) * orb.rho ** 2
    assert h_orbit - h_L3 == pytest.approx(varrho2, rel=1e-8)
    # and back: the scaled energy difference equals rho^2/delta^2
    assert orb.energy - hamiltonian(rec.scaled) == pytest.approx(
        orb.rho ** 2 / mp001.delta ** 2, rel=1e-10)


def test_floquet_structure(lyapunov_pair):
    orb, _ = lyapunov_pair
    fl = floquet(orb)
    assert abs(np.prod(fl.multipliers) - 1.0) < 1e-9
    assert fl.det_error <= 1e-9
    assert fl.lam_h > 1.0
    mults = sorted(np.abs(fl.multipliers))
    assert mults[1] == pytest.approx(1.0, abs=1e-6)
    assert mults[2] == pytest.approx(1.0, abs=1e-6)
    assert fl.lam_h * mults[0] == pytest.approx(1.0, abs=1e-9)
    assert fl.unstable[0] > 0     # "+" orientation convention


def test_floquet_linearization_limit(mp001):
    rec = locate_L3(mp001)
    orb = solve_orbit_fourier(1e-3, mp001)
    fl = floquet(orb)
    pred = math.exp(orb.period_scaled * rec.nu_hyp_scaled)
    assert fl.lam_h == pytest.approx(pred, rel=0.05)
