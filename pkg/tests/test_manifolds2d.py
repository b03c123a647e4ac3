import math

import numpy as np
import pytest

from coorbital.charts import MassParam, involution, ChartState
from coorbital.lyapunov import solve_orbit_fourier
from coorbital.manifolds2d import (curves_at_rho, intersect_curves,
                                   model_G_reference, model_solutions,
                                   section_curve, signed_distance_to_curve,
                                   signed_separation)


def test_model_reference_identities():
    theta = 0.3
    # the one-parameter family of solutions at leading order
    for a in (-0.4, 0.0, 0.5):
        tu = math.pi - a - theta
        ts = a - theta
        r = 1.0 / math.cos(a)
        g = model_G_reference(tu, ts, r, theta)
        assert np.max(np.abs(g)) < 1e-14
    g0 = model_G_reference(math.pi - theta, -theta, 1.0, theta)
    assert np.max(np.abs(g0)) < 1e-14


def test_model_counts_brute_force():
    # brute-force sweep of the trigonometric system confirms the crossing
    # count for r above and below the tangent value
    theta = 0.77
    for r, expected in ((1.2, 2), (0.8, 0)):
        n = 400
        taus = np.linspace(0, 2 * np.pi, n, endpoint=False)
        count = 0
        sols = []
        for i, tu in enumerate(taus):
            for j, ts in enumerate(taus):
                g = model_G_reference(tu, ts, r, theta)
                if np.linalg.norm(g) < 2.0 * r * (2 * np.pi / n):
                    sols.append((tu, ts))
        # cluster the near-zeros
        clusters = []
        for tu, ts in sols:
            for c in clusters:
                if abs((tu - c[0] + np.pi) % (2 * np.pi) - np.pi) < 0.3 and \
                   abs((ts - c[1] + np.pi) % (2 * np.pi) - np.pi) < 0.3:
                    break
            else:
                clusters.append((tu, ts))
        assert len(clusters) == expected
        assert len(model_solutions(r, theta)) == expected


def test_model_transversality_vanishes_at_minimum():
    theta = 0.3
    # the reduced transversality function 2 tan(tau_s + theta) has its only
    # zero where r_* is minimal
    taus = np.linspace(-1.2, 1.2, 40)   # even count straddles zero
    vals = 2.0 * np.tan(taus)
    assert np.count_nonzero(np.sign(vals[:-1]) != np.sign(vals[1:])) == 1


def test_curve_collapse_to_1d(mp001):
    from coorbital.manifolds1d import BranchId, first_hit, _stable_hit
    from coorbital.flow import DEFAULT_FLOW
    from dataclasses import replace
    cfg = replace(DEFAULT_FLOW, energy_drift_bound=None)
    _, hu, _ = first_hit(mp001, BranchId("u", "+"), "sigma0", config=cfg)
    _, hs = _stable_hit(mp001, "+", "sigma0", 1.5, 1e-8, cfg)
    orbit = solve_orbit_fourier(1e-4, mp001)
    cu = section_curve(orbit, "u", n_tau=24)
    cs = section_curve(orbit, "s", n_tau=24)
    xu = complex(hu.vec[2], hu.vec[3])
    xs = complex(hs.vec[2], hs.vec[3])
    assert abs(cu.centroid() - xu) < 1e-3
    assert abs(cs.centroid() - xs) < 1e-3
    assert 2 * np.mean(np.abs(cu.x[cu.valid] - cu.centroid())) <= 1e-3


def test_curve_circle_approximation(mp001):
    rho = 0.05
    orbit = solve_orbit_fourier(rho, mp001)
    cu = section_curve(orbit, "u", n_tau=48)
    radii = np.abs(cu.x[cu.valid] - cu.centroid())
    assert np.max(np.abs(radii - rho)) <= 10.0 * mp001.delta * rho
    assert cu.closure_defect() < 1e-4


def test_section_constraints(mp001):
    from coorbital.charts import hamiltonian
    rho = 0.1
    orbit = solve_orbit_fourier(rho, mp001)
    cu = section_curve(orbit, "u", n_tau=32)
    for i in np.flatnonzero(cu.valid)[::4]:
        assert abs(cu.hits[i, 1] - cu.Lambda_level) < 1e-10
        st = ChartState("scaled", cu.hits[i], mp001)
        assert abs(hamiltonian(st) - orbit.energy) < 1e-9


def test_intersections_at_supercritical_rho(tangency_report, mp001):
    rho = 1.5 * tangency_report.rho_min
    cu, cs = curves_at_rho(mp001, rho, n_tau=96)
    rep = intersect_curves(cu, cs)
    assert len(rep.crossings) == 2
    for c in rep.crossings:
        assert c.mismatch < 1e-9
        assert abs(c.jac_det) / rho ** 2 > 0.3
        assert 0.0 < c.angle <= math.pi / 2


def test_even_crossing_count_away_from_tangency(tangency_report, mp001):
    for mult in (1.2, 1.5):
        cu, cs = curves_at_rho(mp001, mult * tangency_report.rho_min,
                               n_tau=96)
        rep = intersect_curves(cu, cs)
        assert len(rep.crossings) % 2 == 0
    cu, cs = curves_at_rho(mp001, 0.8 * tangency_report.rho_min, n_tau=96)
    rep = intersect_curves(cu, cs)
    assert len(rep.crossings) == 0


def test_tangency_report(tangency_report):
    rep = tangency_report
    assert rep.rho_min > 0
    assert rep.quad_coeff != 0.0
    assert rep.quad_residual <= 0.05
    assert abs(rep.unfolding_speed) > 0.5
    assert rep.absTheta_from_rho_min > 0


def test_tangency_separation_sign_change(tangency_report, mp001):
    rm = tangency_report.rho_min
    cu, cs = curves_at_rho(mp001, 0.93 * rm, n_tau=96)
    s_below, _ = signed_separation(cu, cs)
    cu2, cs2 = curves_at_rho(mp001, 1.07 * rm, n_tau=96)
    s_above, _ = signed_separation(cu2, cs2)
    assert s_below > 0 > s_above
    # linear unfolding: the two slopes agree to ~10%
    slope1 = s_below / (0.07 * rm)
    slope2 = -s_above / (0.07 * rm)
    assert slope1 == pytest.approx(slope2, rel=0.35)


def test_rho_min_scaling_across_delta(tangency_report):
    # the rho_min-normalized constant is delta-stable; the grid stays below
    # delta ~ 0.33 because the stable-branch first-intersection curve
    # degenerates at larger mass ratios (desk-scale limitation)
    from coorbital.manifolds2d import find_tangency
    vals = [tangency_report.absTheta_from_rho_min]
    for delta in (0.28, 0.30):
        rep = find_tangency(MassParam(delta ** 4), n_tau=64)
        vals.append(rep.absTheta_from_rho_min)
    assert max(vals) / min(vals) < 1.25


def test_reversibility_of_curve_system(mp001):
    # Phi maps the unstable plus-branch onto the stable minus-branch: the
    # mirrored u-curve point must lie on a stable fiber, i.e. its forward
    # orbit contracts onto the periodic orbit at the Floquet rate
    from coorbital.flow import integrate, DEFAULT_FLOW
    from dataclasses import replace
    rho = 0.1
    orbit = solve_orbit_fourier(rho, mp001)
    cu = section_curve(orbit, "u", n_tau=32)
    i0 = int(np.flatnonzero(cu.valid)[0])
    mirrored = involution(ChartState("scaled", cu.hits[i0], mp001))
    cfg = replace(DEFAULT_FLOW, energy_drift_bound=None)
    traj = integrate(mirrored, (0.0, 6.0 * orbit.period_scaled), cfg,
                     via_cartesian=True)

    def dist_to_orbit(v):
        taus = np.linspace(0, 2 * np.pi, 128, endpoint=False)
        return min(np.linalg.norm(v - orbit.state_at_tau(t)) for t in taus)

    d0 = dist_to_orbit(traj(0.0))
    d1 = dist_to_orbit(traj(4.0 * orbit.period_scaled))
    assert d1 < 0.2 * d0
