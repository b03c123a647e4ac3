"""Adaptive integration of the chart vector fields, dense output, variational
(state-transition) propagation and root-refined event detection.

Integration can run directly in any chart, or in the cartesian chart with
results presented in another chart (``via_cartesian``) -- the latter is what
the heavy sweeps use, since the cartesian right-hand side is cheap and the
charts are exact diffeomorphisms.
"""

import io
import json
from dataclasses import dataclass, replace

import numpy as np

from . import _kernels as _k
from . import _rk as _rk
from .charts import (ChartState, CollisionError, ChartDomainError, Domain,
                     DEFAULT_DOMAIN, MassParam, chart_jacobian, convert,
                     field_id, hamiltonian)

TRAJECTORY_SCHEMA = 1


class IntegrationError(RuntimeError):
    pass


class DomainExitError(IntegrationError):
    """Trajectory left the chart's admissible region (collision or scaled
    region); carries the partial trajectory."""

    def __init__(self, msg, trajectory=None):
        super().__init__(msg)
        self.trajectory = trajectory


class EnergyDriftError(IntegrationError):
    pass


class EventNotFoundError(RuntimeError):
    """No admissible crossing before the time horizon; carries the trajectory
    searched so far for diagnosis."""

    def __init__(self, msg, trajectory=None):
        super().__init__(msg)
        self.trajectory = trajectory


class TangentialCrossingError(RuntimeError):
    """A crossing was located but is tangential (|dg/dt| below tolerance)."""


@dataclass(frozen=True)
class FlowConfig:
    rtol: float = 1e-12
    atol: float = 1e-12
    max_step: float = np.inf        # scaled chart defaults to 0.1*delta^2
    first_step: float = 0.0         # 0 -> automatic
    max_steps: int = 200_000
    check_domain: bool = True
    energy_drift_bound: float | None = 1e-10
    domain: Domain = DEFAULT_DOMAIN
    event_subsamples: int = 6       # dense samples per step when scanning
    event_g_tol: float = 1e-12
    event_tangency_tol: float = 1e-8


DEFAULT_FLOW = FlowConfig()


@dataclass(frozen=True)
class EventSpec:
    """Scalar crossing function g(t, vec) of the presented chart's coordinates.

    direction: +1 ascending, -1 descending, 0 either; k-th admissible
    crossing is returned; `admissible(t, vec)` may veto crossings.
    """
    func: object
    direction: int = 0
    k: int = 1
    admissible: object = None
    name: str = "event"


class Trajectory:
    """Densely sampled flow segment with interpolant and energy log.

    The presented samples live in `chart`; the underlying integration ran in
    `raw_chart` (time_scale converts raw time to presented time).  Presented
    samples and energies are built lazily; the drift diagnostic uses the raw
    chart's energy, which is what measures integration quality.
    """

    def __init__(self, chart, mp, raw_chart, raw_t, raw_y, cont, time_scale,
                 config, stm=None, exit_status=0):
        self.chart = chart
        self.mp = mp
        self.raw_chart = raw_chart
        self._raw_t = raw_t
        self._raw_y = raw_y
        self._cont = cont
        self.time_scale = time_scale
        self.config = config
        self.stm = stm
        self.exit_status = exit_status
        self.t = raw_t * time_scale
        self._states = None
        self._energy = None
        fid = field_id(raw_chart)
        self.raw_energy = np.array([
            _raw_hamiltonian(fid, raw_y[i, :4], mp)
            for i in range(raw_y.shape[0])])

    @property
    def states(self):
        if self._states is None:
            if self.chart == self.raw_chart:
                self._states = self._raw_y[:, :4].copy()
            else:
                self._states = np.empty((self._raw_y.shape[0], 4))
                for i in range(self._raw_y.shape[0]):
                    self._states[i] = convert(
                        ChartState(self.raw_chart, self._raw_y[i, :4], self.mp),
                        self.chart, self.config.domain).vec
        return self._states

    @property
    def energy(self):
        if self._energy is None:
            self._energy = np.array([
                hamiltonian(ChartState(self.chart, s, self.mp),
                            self.config.domain)
                for s in self.states])
        return self._energy

    @property
    def t0(self):
        return self.t[0]

    @property
    def t1(self):
        return self.t[-1]

    def energy_drift(self):
        e0 = self.raw_energy[0]
        scale = max(abs(e0), 1e-300)
        return float(np.max(np.abs(self.raw_energy - e0)) / scale)

    def _locate(self, traw):
        ts = self._raw_t
        if ts[-1] >= ts[0]:
            i = int(np.searchsorted(ts, traw, side="right")) - 1
        else:
            i = int(np.searchsorted(-ts, -traw, side="right")) - 1
        return min(max(i, 0), len(ts) - 2)

    def eval_raw(self, t):
        """Interpolated raw-chart state at presented time t."""
        traw = t / self.time_scale
        i = self._locate(traw)
        out = np.empty(self._raw_y.shape[1])
        _rk.dense_eval(self._raw_t[i], self._raw_t[i + 1] - self._raw_t[i],
                       self._raw_y[i], self._cont[i], traw, out)
        return out

    def __call__(self, t):
        """Interpolated state (presented chart) at presented time t."""
        if np.ndim(t) > 0:
            return np.array([self(ti) for ti in np.asarray(t)])
        raw = self.eval_raw(float(t))
        if self.chart == self.raw_chart:
            return raw[:4]
        return convert(ChartState(self.raw_chart, raw[:4], self.mp),
                       self.chart, self.config.domain).vec

    def state_at(self, t) -> ChartState:
        return ChartState(self.chart, self(t), self.mp)

    def to_csv(self, path, n_samples=None, header_extra=""):
        names = {
            "cartesian": ("q1", "q2", "p1", "p2"),
            "polar": ("r_", "theta_rad", "R_", "G_"),
            "poincare": ("lambda_rad", "L_", "eta_re", "eta_im"),
            "scaled": ("lambda_rad", "Lambda_", "x_re", "x_im"),
        }[self.chart]
        buf = io.StringIO()
        if header_extra:
            buf.write("# " + header_extra + "\n")
        unit = "scaled" if self.chart == "scaled" else "rotating"
        buf.write("t_%s,%s,energy\n" % (unit, ",".join(names)))
        if n_samples is None:
            ts, ys, es = self.t, self.states, self.energy
        else:
            ts = np.linspace(self.t[0], self.t[-1], n_samples)
            ys = self(ts)
            es = [hamiltonian(ChartState(self.chart, y, self.mp),
                              self.config.domain) for y in ys]
        for t, y, e in zip(ts, ys, es):
            buf.write("%.17g,%s,%.17g\n" % (t, ",".join("%.17g" % v for v in y), e))
        data = buf.getvalue()
        if hasattr(path, "write"):
            path.write(data)
        else:
            with open(path, "w") as f:
                f.write(data)

    def save(self, path):
        meta = {"schema": TRAJECTORY_SCHEMA, "chart": self.chart,
                "raw_chart": self.raw_chart, "mu": self.mp.mu,
                "time_scale": self.time_scale}
        np.savez_compressed(path, meta=json.dumps(meta), raw_t=self._raw_t,
                            raw_y=self._raw_y, cont=self._cont,
                            stm=(self.stm if self.stm is not None else np.empty(0)))

    @classmethod
    def load(cls, path, config=DEFAULT_FLOW):
        with np.load(path, allow_pickle=False) as z:
            meta = json.loads(str(z["meta"]))
            if meta["schema"] != TRAJECTORY_SCHEMA:
                raise ValueError("trajectory cache schema mismatch")
            stm = z["stm"]
            return cls(meta["chart"], MassParam(meta["mu"]), meta["raw_chart"],
                       z["raw_t"], z["raw_y"], z["cont"], meta["time_scale"],
                       config, stm=(stm if stm.size else None))


def _raw_hamiltonian(fid, vec, mp):
    if fid == _k.FID_CART:
        return _k.cart_hamiltonian(vec, mp.mu)
    if fid == _k.FID_POLAR:
        return _k.polar_hamiltonian(vec, mp.mu)
    if fid == _k.FID_POIN:
        return _k.poin_hamiltonian(vec, mp.mu)
    return _k.scaled_hamiltonian(vec, mp.mu, mp.delta)


_STATUS_MSG = {
    _rk.STATUS_SMALL_STEP: "step size underflow",
    _rk.STATUS_MAX_STEPS: "maximum number of steps exceeded",
    _rk.STATUS_DOMAIN: "trajectory left the chart domain",
    _rk.STATUS_BAD_RHS: "vector field evaluation failed",
}


def _default_max_step(chart, mp, config):
    if np.isfinite(config.max_step):
        return config.max_step
    if chart == "scaled" and mp.mu > 0.0:
        return 0.1 * mp.delta ** 2
    return np.inf


def _run_raw(fid, mp, t0, y0, t1, config, max_step):
    dom = config.domain
    status, ns, ts, ys, cont, nfev = _rk.dop853_integrate(
        fid, mp.mu, mp.delta, t0, y0, t1, config.rtol, config.atol,
        max_step, config.first_step, config.max_steps,
        dom.collision_tol, dom.scaled_lambda_margin, dom.scaled_radius,
        1 if config.check_domain else 0)
    return status, ts[:ns + 1].copy(), ys[:ns + 1].copy(), cont[:ns].copy(), nfev


def integrate(state: ChartState, t_span, config: FlowConfig = DEFAULT_FLOW,
              via_cartesian=False, allow_partial=False,
              present=None) -> Trajectory:
    """Integrate the state's chart field over t_span=(t0, t1).

    Times are in the `present` chart's convention (present defaults to the
    state's chart).  With allow_partial a trajectory that exits the chart
    domain is returned truncated (exit_status set) instead of raising.
    """
    t0, t1 = float(t_span[0]), float(t_span[1])
    mp = state.mp
    present = present or state.chart
    if (via_cartesian or state.chart == "cartesian") and present != "cartesian" \
            or (state.chart == "cartesian" and present != "cartesian"):
        via_cartesian = True
    if via_cartesian and present != "cartesian":
        scale = mp.delta ** -2 if present == "scaled" else 1.0
        c0 = convert(state, "cartesian", config.domain)
        status, ts, ys, cont, _ = _run_raw(
            _k.FID_CART, mp, t0 * scale, c0.vec.copy(), t1 * scale, config,
            _default_max_step("cartesian", mp, config))
        traj = Trajectory(present, mp, "cartesian", ts, ys, cont,
                          1.0 / scale, config, exit_status=status)
    else:
        fid = field_id(present)
        c0 = convert(state, present, config.domain)
        status, ts, ys, cont, _ = _run_raw(
            fid, mp, t0, c0.vec.copy(), t1, config,
            _default_max_step(present, mp, config))
        traj = Trajectory(present, mp, present, ts, ys, cont, 1.0,
                          config, exit_status=status)
    if status != _rk.STATUS_DONE:
        if allow_partial and len(traj.t) > 1:
            return traj
        if status == _rk.STATUS_DOMAIN:
            raise DomainExitError(_STATUS_MSG[status], traj)
        raise IntegrationError(_STATUS_MSG.get(status, f"status {status}"))
    if config.energy_drift_bound is not None and len(traj.t) > 1:
        d = traj.energy_drift()
        if d > config.energy_drift_bound:
            raise EnergyDriftError(
                f"relative energy drift {d:.3e} above bound "
                f"{config.energy_drift_bound:.1e}")
    return traj


def integrate_with_stm(state: ChartState, t_span,
                       config: FlowConfig = DEFAULT_FLOW) -> Trajectory:
    """Integrate together with the 4x4 state-transition matrices.

    The variational equations run in the cartesian chart; transition matrices
    for other charts are obtained by conjugating with the chart Jacobians.
    """
    t0, t1 = float(t_span[0]), float(t_span[1])
    mp = state.mp
    scale = mp.delta ** -2 if state.chart == "scaled" else 1.0
    c0 = convert(state, "cartesian", config.domain)
    y0 = np.empty(20)
    y0[:4] = c0.vec
    y0[4:] = np.eye(4).ravel()
    status, ts, ys, cont, _ = _run_raw(
        _k.FID_CART_STM, mp, t0 * scale, y0, t1 * scale, config, config.max_step)
    if status != _rk.STATUS_DONE:
        if status == _rk.STATUS_DOMAIN:
            raise DomainExitError(_STATUS_MSG[status])
        raise IntegrationError(_STATUS_MSG.get(status, f"status {status}"))
    n = ys.shape[0]
    stms = ys[:, 4:].reshape(n, 4, 4).copy()
    if state.chart != "cartesian":
        j0 = chart_jacobian(c0, state.chart, config.domain)      # d chart/d cart
        j0_inv = np.linalg.inv(j0)
        for i in range(n):
            ji = chart_jacobian(ChartState("cartesian", ys[i, :4], mp),
                                state.chart, config.domain)
            stms[i] = ji @ stms[i] @ j0_inv
    traj = Trajectory(state.chart, mp, "cartesian", ts, ys, cont, 1.0 / scale,
                      config, stm=stms)
    if config.energy_drift_bound is not None and len(traj.t) > 1:
        d = traj.energy_drift()
        if d > config.energy_drift_bound:
            raise EnergyDriftError(f"relative energy drift {d:.3e}")
    return traj


def find_event(state: ChartState, event: EventSpec, t_max,
               config: FlowConfig = DEFAULT_FLOW, t0=0.0,
               via_cartesian=True, trajectory=None, n_chunks=6, t_skip=None):
    """First k-th admissible crossing of the event before t_max.

    Returns (t_star, ChartState, trajectory).  The crossing function is
    evaluated on the presented chart's coordinates; |g| at the returned state
    is below config.event_g_tol.  When no trajectory is supplied the
    integration proceeds in chunks so the search stops at the event.
    """
    if trajectory is not None:
        found, count = _scan_trajectory(trajectory, event, config, 0, t_skip)
        if found is not None:
            return found[0], found[1], trajectory
        raise EventNotFoundError(
            f"{event.name}: crossing {event.k} not found in "
            f"[{trajectory.t[0]:.6g}, {trajectory.t[-1]:.6g}]", trajectory)
    edges = np.linspace(t0, t_max, max(1, n_chunks) + 1)
    cursor = state
    mp = state.mp
    count = 0
    traj = None
    for a, b in zip(edges[:-1], edges[1:]):
        traj = integrate(cursor, (a, b), config, via_cartesian=via_cartesian,
                         allow_partial=True, present=state.chart)
        found, count = _scan_trajectory(traj, event, config, count, t_skip)
        if found is not None:
            return found[0], found[1], traj
        if traj.exit_status != 0:
            raise EventNotFoundError(
                f"{event.name}: crossing {event.k} not found before the "
                f"trajectory left the domain at t={traj.t[-1]:.6g}", traj)
        # continue from the raw endpoint: presentation-chart conversion can
        # be undefined there (post-encounter osculating spikes)
        cursor = ChartState(traj.raw_chart, traj._raw_y[-1, :4], mp)
    raise EventNotFoundError(
        f"{event.name}: crossing {event.k} not found in "
        f"[{t0:.6g}, {t_max:.6g}]", traj)


def _safe_g(func, t, traj):
    try:
        return func(t, traj(t))
    except (ChartDomainError, CollisionError, ValueError):
        return np.nan


def _scan_trajectory(traj, event, config, count, t_skip=None):
    nsub = max(2, config.event_subsamples)
    g_prev = None
    for i in range(len(traj.t) - 1):
        ta, tb = traj.t[i], traj.t[i + 1]
        tloc = np.linspace(ta, tb, nsub + 1)
        if g_prev is None:
            gs = [_safe_g(event.func, t, traj) for t in tloc]
        else:
            gs = [g_prev] + [_safe_g(event.func, t, traj) for t in tloc[1:]]
        for j in range(nsub):
            g1, g2 = gs[j], gs[j + 1]
            if not (np.isfinite(g1) and np.isfinite(g2)):
                continue
            hit_t = None
            if g1 == 0.0:
                hit_t = tloc[j]
            elif g1 * g2 < 0.0:
                hit_t = _refine_root(event.func, traj, tloc[j], tloc[j + 1],
                                     g1, g2, config)
            if hit_t is None:
                continue
            if t_skip is not None and abs(hit_t - traj.t[0]) >= 0 and \
                    (hit_t - t_skip) * np.sign(traj.t[-1] - traj.t[0]) <= 0:
                continue
            vec = traj(hit_t)
            gdot = _g_derivative(event.func, traj, hit_t, ta, tb)
            if abs(gdot) < config.event_tangency_tol:
                raise TangentialCrossingError(
                    f"tangential crossing of {event.name} at t={hit_t:.6g} "
                    f"(|dg/dt|={abs(gdot):.2e})")
            if event.direction != 0 and np.sign(gdot) != np.sign(event.direction):
                continue
            if event.admissible is not None and not event.admissible(hit_t, vec):
                continue
            count += 1
            if count == event.k:
                return (float(hit_t), ChartState(traj.chart, vec, traj.mp)), count
        g_prev = gs[-1]
    return None, count


def _g_derivative(func, traj, t, ta, tb):
    h = max(1e-9, 1e-7 * abs(tb - ta))
    return (func(t + h, traj(t + h)) - func(t - h, traj(t - h))) / (2.0 * h)


def _refine_root(func, traj, ta, tb, ga, gb, config):
    """Bisection/secant hybrid on the dense interpolant."""
    for _ in range(120):
        if abs(gb - ga) > 0.0:
            tm = tb - gb * (tb - ta) / (gb - ga)
            if not (min(ta, tb) < tm < max(ta, tb)):
                tm = 0.5 * (ta + tb)
        else:
            tm = 0.5 * (ta + tb)
        gm = func(tm, traj(tm))
        if abs(gm) <= config.event_g_tol or abs(tb - ta) < 1e-15 * (1.0 + abs(tm)):
            return tm
        if ga * gm < 0.0:
            tb, gb = tm, gm
        else:
            ta, ga = tm, gm
    return 0.5 * (ta + tb)
