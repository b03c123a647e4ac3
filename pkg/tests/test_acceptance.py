"""Acceptance suite: one test per criterion, each printing a pass/fail line
at the stated tolerance.  Three clauses are expected to fail at desk scale
and are asserted anyway (see the repository notes): the 5% exponent-fit
tolerance, the 10% transport consistency, and the larger of the two quoted
two-round mass ratios."""

import math
import time

import numpy as np
import pytest
from dataclasses import replace

from coorbital import pendulum
from coorbital.charts import ChartState, MassParam, convert, hamiltonian, \
    involution
from coorbital.equilibria import SQRT218, locate_L3
from coorbital.flow import DEFAULT_FLOW, FlowConfig, integrate, \
    integrate_with_stm
from coorbital.lyapunov import floquet
from coorbital.manifolds1d import splitting_distance, law_distance, \
    transport_to_sigma0
from coorbital.manifolds2d import curves_at_rho, intersect_curves

A_REF = 0.177744


def _line(cid, ok, detail):
    print(f"[criterion {cid}] {'PASS' if ok else 'FAIL'}: {detail}")
    return ok


def test_criterion_1_constant_A():
    t0 = time.perf_counter()
    A1 = pendulum.constant_A()
    dt = time.perf_counter() - t0
    ok = abs(A1 - A_REF) <= 1e-5 and dt < 1.0
    assert _line(1, ok, f"A = {A1:.9f} (|A - 0.177744| = {abs(A1-A_REF):.2e},"
                        f" {dt*1e3:.0f} ms)")


def test_criterion_2_expansions():
    ok = True
    details = []
    for mu in (1e-4, 1e-3, 1e-2):
        rec = locate_L3(MassParam(mu))
        e1 = abs(rec.d_mu - 1 - (5 / 12) * mu)
        e2 = abs(rec.nu_ell - 1 - (7 / 8) * mu)
        e3 = abs(rec.nu_hyp / math.sqrt(mu) - SQRT218)
        ok &= e1 <= 5 * mu ** 3 and e2 <= 5 * mu ** 2 and e3 <= 5 * mu
        details.append(f"mu={mu:g}: {e1:.1e}/{e2:.1e}/{e3:.1e}")
    assert _line(2, ok, "; ".join(details))


def test_criterion_3_splitting_law(sigma0_sweep, sigma0_fit):
    positive = all(s.distance > 0 for s in sigma0_sweep)
    theta_ok = sigma0_fit.absTheta_fit > 0
    a_err = abs(sigma0_fit.A_fit - A_REF) / A_REF
    ok = positive and theta_ok and a_err <= 0.05
    _line(3, ok, f"A_fit = {sigma0_fit.A_fit:.6f} ({100*a_err:.1f}% off), "
                 f"|Theta|_fit = {sigma0_fit.absTheta_fit:.4f}, "
                 f"all 12 distances positive = {positive}")
    assert positive and theta_ok
    # the O(1/|log delta|) prefactor drift at reachable mu biases the
    # fitted exponent by ~9%; the 5% tolerance is asserted as stated
    assert a_err <= 0.05, (
        f"A_fit off by {100*a_err:.1f}% (> 5%): the splitting prefactor "
        f"drifts like 1/|log delta| across mu in [0.002, 0.02]")


def test_criterion_4_transport(sigma0_sweep):
    cfg = replace(DEFAULT_FLOW, energy_drift_bound=None)
    rows = []
    worst = 0.0
    functional = True
    for mu in (0.005, 0.01, 0.02):
        mp = MassParam(mu)
        s0 = next((s for s in sigma0_sweep if abs(s.mu - mu) / mu < 0.25),
                  None)
        if s0 is None:
            s0 = splitting_distance(mp, "sigma0", config=cfg)
        try:
            sl = splitting_distance(mp, "lambda-star", config=cfg)
            pred_mod, _ = transport_to_sigma0(mp, sl)
            ratio = pred_mod / abs(s0.x_diff)
            worst = max(worst, abs(ratio - 1.0))
            rows.append(f"mu={mu:g}: ratio={ratio:.3f}")
        except Exception as e:
            functional = False
            rows.append(f"mu={mu:g}: no return crossing ({type(e).__name__})")
    ok = functional and worst <= 0.10
    _line(4, ok, "; ".join(rows))
    # asserted as stated; at these mass ratios the between-section growth
    # is log-order, not 10%, and the mu=0.02 branch is ejected before the
    # return section
    assert ok, "transport/direct ratios exceed 10% at desk-scale mu"


def test_criterion_5_two_round_roots(reconnect_roots):
    from coorbital.reconnect import asymptotic_check, verify_two_round
    roots = reconnect_roots
    near_small = min(roots, key=lambda r: abs(r.mu - 0.004192))
    ok_small = abs(near_small.mu - 0.004192) <= 1e-3
    near_big = min(roots, key=lambda r: abs(r.mu - 0.012144))
    ok_big = abs(near_big.mu - 0.012144) <= 1e-3
    rep = verify_two_round(MassParam(near_small.mu), near_small)
    ok_reentry = rep.re_entry <= 1e-6 and rep.n_components == 2
    table = asymptotic_check(roots)
    spacing_ok = all(
        abs(row["spacing_ratio"] - 1.0) <= 0.2
        for row in table[1:] if "spacing_ratio" in row)
    _line(5, ok_small and ok_big and ok_reentry and spacing_ok,
          f"root near 0.004192: {near_small.mu:.6f} (|d|={abs(near_small.mu-0.004192):.1e}); "
          f"nearest to 0.012144: {near_big.mu:.6f} (|d|={abs(near_big.mu-0.012144):.1e}); "
          f"re-entry={rep.re_entry:.1e}, components={rep.n_components}; "
          f"equispacing(asymptotic part)={spacing_ok}")
    assert ok_small and ok_reentry and spacing_ok
    # asserted as stated: the scan (validated against the smaller paper
    # value and the full asymptotic ladder) finds no symmetric 2-round
    # connection of this family near mu = 0.012144
    assert ok_big, "no root within 1e-3 of 0.012144"


def test_criterion_6_lyapunov(lyapunov_pair):
    from coorbital.lyapunov import solve_orbit_fourier
    orb, sh = lyapunov_pair
    mp = orb.mp
    traj = sh.trajectory()
    ts = np.linspace(0, sh.period_scaled, 64, endpoint=False)
    sup = max(float(np.max(np.abs(orb.state_at_time(t)
                                  - (sh.state0 if t == 0 else traj(t)))))
              for t in ts)
    e_err = max(abs(hamiltonian(ChartState("scaled", orb.state_at_tau(t), mp))
                    - orb.energy) for t in np.linspace(0, 2 * np.pi, 17))
    defects = []
    for delta in (0.25, 0.3, 0.35):
        o = solve_orbit_fourier(0.05, MassParam(delta ** 4))
        defects.append(abs(o.omega - 1.0) / delta ** 4)
    stable = max(defects) / min(defects) < 4.0
    fl = floquet(orb)
    mults = sorted(np.abs(fl.multipliers))
    pairing = (fl.lam_h > 1.0 and abs(fl.lam_h * mults[0] - 1) < 1e-9
               and abs(mults[1] - 1) < 1e-6 and abs(mults[2] - 1) < 1e-6
               and fl.det_error <= 1e-9)
    ok = sup <= 1e-9 and e_err <= 1e-11 and stable and pairing
    assert _line(6, ok,
                 f"sup|fourier-shooting|={sup:.1e}; max|H-E|={e_err:.1e}; "
                 f"omega-defect spread={max(defects)/min(defects):.2f}; "
                 f"multipliers {np.round(np.abs(fl.multipliers), 6)} "
                 f"det_err={fl.det_error:.1e}")


def test_criterion_7_tangency(tangency_report, sigma0_fit):
    rep = tangency_report
    mp = rep.mp
    cu, cs = curves_at_rho(mp, 1.5 * rep.rho_min, n_tau=96)
    irep = intersect_curves(cu, cs)
    two = len(irep.crossings) == 2
    transversal = all(abs(c.jac_det) / (1.5 * rep.rho_min) ** 2 > 0.3
                      for c in irep.crossings)
    quad = rep.quad_residual <= 0.05 and rep.quad_coeff != 0.0
    unfold = abs(rep.unfolding_speed) > 0.5
    theta_consistency = abs(rep.absTheta_from_rho_min
                            / sigma0_fit.absTheta_fit - 1.0)
    ok = two and transversal and quad and unfold and theta_consistency <= 0.10
    assert _line(7, ok,
                 f"rho_min={rep.rho_min:.6f}; crossings at 1.5rho_min: "
                 f"{len(irep.crossings)} (min |det|/rho^2="
                 f"{min((abs(c.jac_det) for c in irep.crossings), default=0)/(1.5*rep.rho_min)**2:.2f}); "
                 f"quad residual={rep.quad_residual:.3f}; "
                 f"unfolding speed={rep.unfolding_speed:.2f}; "
                 f"|Theta| tangency/fit={rep.absTheta_from_rho_min:.4f}/"
                 f"{sigma0_fit.absTheta_fit:.4f} "
                 f"({100*theta_consistency:.1f}%)")


def test_criterion_8_infrastructure(tmp_path):
    mp = MassParam(1e-3)
    rng = np.random.default_rng(42)
    worst_rt = 0.0
    for _ in range(200):
        v = np.array([rng.uniform(-2, 2), rng.uniform(-0.7, 0.7),
                      rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5)])
        s = ChartState("scaled", v, mp)
        for tgt in ("cartesian", "polar", "poincare"):
            back = convert(convert(s, tgt), "scaled")
            worst_rt = max(worst_rt, float(np.max(np.abs(back.vec - v))))
    s0 = ChartState("cartesian", np.array([-0.97, 0.3, -0.3, -0.95]),
                    MassParam(0.01))
    drift = integrate(s0, (0.0, 100.0)).energy_drift()
    stm = integrate_with_stm(s0, (0.0, 5.0))
    det_err = max(abs(np.linalg.det(M) - 1.0) for M in stm.stm)
    fwd = integrate(involution(s0), (0.0, 9.0))
    mirrored = involution(ChartState("cartesian", fwd.states[-1],
                                     s0.mp)).vec
    bwd = integrate(s0, (0.0, -9.0)).states[-1]
    rev = float(np.max(np.abs(bwd - mirrored)))
    # determinism of artifacts
    from coorbital.cli import main as cli_main
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    cli_main(["equilibria", "--mu", "0.004", "--json", str(a)])
    cli_main(["equilibria", "--mu", "0.004", "--json", str(b)])
    deterministic = a.read_bytes() == b.read_bytes()
    ok = (worst_rt < 1e-12 and drift <= 1e-10 and det_err <= 1e-9
          and rev < 1e-9 and deterministic)
    assert _line(8, ok,
                 f"roundtrip={worst_rt:.1e}; drift(|t|<=100)={drift:.1e}; "
                 f"STM det err={det_err:.1e}; reversibility={rev:.1e}; "
                 f"deterministic={deterministic}")
