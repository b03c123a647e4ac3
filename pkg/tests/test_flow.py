import math

import numpy as np
import pytest
from dataclasses import replace

from coorbital.charts import ChartState, MassParam, convert, involution, \
    vector_field
from coorbital.flow import (DEFAULT_FLOW, EventSpec, EventNotFoundError,
                            FlowConfig, Trajectory, find_event, integrate,
                            integrate_with_stm)
from coorbital import _kernels as K
from coorbital import _rk as R

MP = MassParam(0.01)
COORBITAL_STATE = ChartState("cartesian",
                             np.array([-0.97, 0.3, -0.3, -0.95]), MP)


def test_forward_backward_roundtrip():
    traj = integrate(COORBITAL_STATE, (0.0, 50.0))
    back = integrate(traj.state_at(traj.t1), (traj.t1, 0.0))
    assert np.max(np.abs(back.states[-1] - COORBITAL_STATE.vec)) < 1e-9


def test_energy_drift_over_100():
    traj = integrate(COORBITAL_STATE, (0.0, 100.0))
    assert traj.energy_drift() < 1e-10


def test_short_time_taylor():
    # fourth-order Taylor comparison at t = 1e-3
    y0 = COORBITAL_STATE.vec
    t = 1e-3

    def f(y):
        out = np.empty(4)
        K.cart_rhs(y, MP.mu, out)
        return out

    h = 1e-5
    f0 = f(y0)
    # chain-rule derivatives by nested finite differences of the field
    def df(y, v):
        return (f(y + h * v) - f(y - h * v)) / (2 * h)

    y1 = f0
    y2 = df(y0, f0)
    y3 = df(y0, y2) + (df(y0 + h * f0, f0) - df(y0 - h * f0, f0)) / (2 * h)
    taylor = y0 + t * y1 + t ** 2 / 2 * y2 + t ** 3 / 6 * y3
    traj = integrate(COORBITAL_STATE, (0.0, t))
    err = np.max(np.abs(traj.states[-1] - taylor))
    assert err < 5e-12       # O(t^4) with FD noise


def test_stm_identity_and_fd():
    traj = integrate_with_stm(COORBITAL_STATE, (0.0, 1.0))
    assert np.allclose(traj.stm[0], np.eye(4), atol=1e-14)
    M = traj.stm[-1]
    assert abs(np.linalg.det(M) - 1.0) < 1e-9
    h = 1e-6
    JFD = np.zeros((4, 4))
    for j in range(4):
        vp, vm = np.array(COORBITAL_STATE.vec), np.array(COORBITAL_STATE.vec)
        vp[j] += h
        vm[j] -= h
        tp = integrate(ChartState("cartesian", vp, MP), (0, 1.0))
        tm = integrate(ChartState("cartesian", vm, MP), (0, 1.0))
        JFD[:, j] = (tp.states[-1] - tm.states[-1]) / (2 * h)
    assert np.max(np.abs(M - JFD)) < 1e-6


def test_stm_symplectic_along_orbit(lyapunov_pair):
    orb, _ = lyapunov_pair
    s0 = ChartState("scaled", orb.state_at_tau(0.0), orb.mp)
    traj = integrate_with_stm(s0, (0.0, orb.period_scaled),
                              replace(DEFAULT_FLOW, energy_drift_bound=None))
    for Mstm in traj.stm[:: max(1, len(traj.stm) // 8)]:
        assert abs(np.linalg.det(Mstm) - 1.0) < 1e-9


def test_harmonic_oscillator_event():
    # closed-form oracle: from (1, 0), x = 0 descending at t = pi/2
    status, ns, ts, ys, cont, _ = R.dop853_integrate(
        K.FID_HARM, 0.0, 0.0, 0.0, np.array([1.0, 0.0]), 3.0,
        1e-13, 1e-13, np.inf, 0.0, 10000, 0.0, 0.0, 0.0, 0)
    assert status == R.STATUS_DONE
    # locate the descending zero of x on the dense output
    tlo, thi = 1.0, 2.0
    out = np.empty(2)

    def xval(t):
        i = min(max(int(np.searchsorted(ts[:ns + 1], t)) - 1, 0), ns - 1)
        R.dense_eval(ts[i], ts[i + 1] - ts[i], ys[i], cont[i], t, out)
        return out[0]

    for _ in range(80):
        tm = 0.5 * (tlo + thi)
        if xval(tm) > 0:
            tlo = tm
        else:
            thi = tm
    assert 0.5 * (tlo + thi) == pytest.approx(math.pi / 2, abs=1e-10)


def test_event_direction_and_missing():
    def g(t, vec):
        pol = convert(ChartState("cartesian", vec, MP), "polar").vec
        return pol[1] - math.pi / 2

    ev = EventSpec(g, direction=0, k=1, name="theta=pi/2")
    t1, hit, _ = find_event(COORBITAL_STATE, ev, 20.0)
    assert abs(g(t1, hit.vec)) < 1e-12
    ev_bad = EventSpec(g, direction=+1, k=9, name="too many")
    with pytest.raises(EventNotFoundError):
        find_event(COORBITAL_STATE, ev_bad, 10.0)


def test_event_tolerance_stability():
    def g(t, vec):
        pol = convert(ChartState("cartesian", vec, MP), "polar").vec
        return pol[1] - math.pi / 2

    ev = EventSpec(g, direction=-1, k=1, name="theta")
    t_ref, _, _ = find_event(COORBITAL_STATE, ev, 20.0,
                             FlowConfig(rtol=1e-12, atol=1e-12))
    t_alt, _, _ = find_event(COORBITAL_STATE, ev, 20.0,
                             FlowConfig(rtol=1e-12, atol=1e-12,
                                        first_step=1e-3))
    assert abs(t_ref - t_alt) < 1e-9
    t_tight, hit_tight, _ = find_event(COORBITAL_STATE, ev, 20.0,
                                       FlowConfig(rtol=1e-13, atol=1e-13))
    assert abs(t_ref - t_tight) < 1e-11
    _, hit_ref, _ = find_event(COORBITAL_STATE, ev, 20.0,
                               FlowConfig(rtol=1e-12, atol=1e-12))
    # a 10x tolerance refinement moves the event state by less than the
    # coarser tolerance scale
    assert np.max(np.abs(hit_tight.vec - hit_ref.vec)) < 1e-11


def test_reversibility_of_flow():
    # backward flow equals involution-conjugated forward flow
    T = 7.0
    fwd = integrate(involution(COORBITAL_STATE), (0.0, T))
    mirrored = involution(ChartState("cartesian", fwd.states[-1], MP))
    bwd = integrate(COORBITAL_STATE, (0.0, -T))
    assert np.max(np.abs(bwd.states[-1] - mirrored.vec)) < 1e-10


def test_trajectory_csv_and_cache_roundtrip(tmp_path):
    traj = integrate(COORBITAL_STATE, (0.0, 2.0))
    csv_path = tmp_path / "traj.csv"
    traj.to_csv(csv_path)
    lines = csv_path.read_text().splitlines()
    assert lines[0].startswith("t_rotating,")
    assert len(lines) == len(traj.t) + 1
    npz = tmp_path / "traj.npz"
    traj.save(npz)
    loaded = Trajectory.load(npz)
    assert np.allclose(loaded(1.377), traj(1.377), atol=0.0)


def test_scaled_chart_direct_vs_via_cartesian():
    mp = MassParam(0.01)
    s = ChartState("scaled", np.array([1.2, 0.1, 0.02, 0.01]), mp)
    t_direct = integrate(s, (0.0, 1.0))
    t_via = integrate(s, (0.0, 1.0), via_cartesian=True)
    assert np.max(np.abs(t_direct.states[-1] - t_via.states[-1])) < 1e-10
    assert np.max(np.abs(t_direct(0.377) - t_via(0.377))) < 1e-10
