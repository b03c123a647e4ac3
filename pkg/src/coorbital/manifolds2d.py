"""Two-dimensional manifolds of the Lyapunov orbits: section curves on the
horizontal section, their transverse intersections, and the quadratic
tangency with its unfolding in the amplitude.

The section curve is traced by seeding along the unstable Floquet bundle at
each orbit phase and integrating to the first admissible crossing of
{Lambda = Lambda(L)} at the orbit's energy; on that section (Re x, Im x)
are coordinates and the curves close over the phase.
"""

import math
from dataclasses import dataclass, replace

import numpy as np

from . import _kernels as _k
from .charts import ChartState, MassParam, chart_jacobian, involution
from .equilibria import locate_L3
from .flow import DEFAULT_FLOW, FlowConfig, integrate, integrate_with_stm
from .lyapunov import LyapunovOrbit, floquet, solve_orbit_fourier
from .manifolds1d import splitting_distance

TAU_GRID_DEFAULT = 256


class CurveError(RuntimeError):
    pass


@dataclass(frozen=True)
class SectionCurve:
    rho: float
    branch: str                 # "u" or "s"
    mp: MassParam
    taus: np.ndarray            # orbit phases of the seeds
    hits: np.ndarray            # (n, 4) scaled states on the section
    hit_times: np.ndarray
    valid: np.ndarray           # fibers whose first chartable crossing exists
    energy: float
    Lambda_level: float
    n_flagged: int

    def __post_init__(self):
        # closed-curve trig fit over the valid fibers
        n_modes = min(self.taus.size // 4, 40)
        t = self.taus[self.valid]
        z = self.hits[self.valid, 2] + 1j * self.hits[self.valid, 3]
        cols = [np.ones_like(t, dtype=complex)]
        ks = [0]
        for k in range(1, n_modes + 1):
            cols.append(np.exp(1j * k * t))
            ks.append(k)
            cols.append(np.exp(-1j * k * t))
            ks.append(-k)
        M = np.column_stack(cols)
        coef, *_ = np.linalg.lstsq(M, z, rcond=None)
        resid = z - M @ coef
        object.__setattr__(self, "_fit_ks", np.array(ks))
        object.__setattr__(self, "_fit_coef", coef)
        object.__setattr__(self, "_fit_resid", float(np.max(np.abs(resid))))

    @property
    def x(self):
        return self.hits[:, 2] + 1j * self.hits[:, 3]

    def x_at(self, tau):
        return complex(np.sum(self._fit_coef * np.exp(1j * self._fit_ks * tau)))

    def dx_at(self, tau):
        return complex(np.sum(self._fit_coef * 1j * self._fit_ks
                              * np.exp(1j * self._fit_ks * tau)))

    def centroid(self):
        return complex(self._fit_coef[0])

    def closure_defect(self):
        """Max fit residual over the valid fibers (the interpolant itself
        is periodic by construction)."""
        return self._fit_resid


def _floquet_bundle(orbit: LyapunovOrbit, config):
    """Dense one-period variational trajectory (cartesian raw) plus the
    unstable/stable eigen-directions at tau = 0 in the scaled chart."""
    fl = floquet(orbit, config)
    mp = orbit.mp
    s0 = orbit.state_at_tau(0.0)
    cfg = replace(config, energy_drift_bound=None)
    traj = integrate_with_stm(ChartState("scaled", s0, mp),
                              (0.0, orbit.period_scaled), cfg)
    return fl, traj


def _direction_at(traj, fl, orbit, tau):
    """Unstable Floquet direction at phase tau, scaled chart, unit norm."""
    mp = orbit.mp
    t = tau / (2.0 * math.pi) * orbit.period_scaled
    raw = traj.eval_raw(t)
    stm_cart = raw[4:].reshape(4, 4)
    c_state = ChartState("cartesian", raw[:4], mp)
    j_here = chart_jacobian(c_state, "scaled")
    j0 = chart_jacobian(ChartState("scaled", orbit.state_at_tau(0.0), mp),
                        "cartesian")
    stm_scaled = j_here @ stm_cart @ j0
    v = stm_scaled @ fl.unstable
    return v / np.linalg.norm(v), raw[:4]


def section_curve(orbit: LyapunovOrbit, branch: str, n_tau=TAU_GRID_DEFAULT,
                  h=1e-7, config: FlowConfig = DEFAULT_FLOW,
                  max_flag_fraction=0.2) -> SectionCurve:
    """First intersection of the orbit's 2-d manifold branch with the
    horizontal section, traced over the orbit phase."""
    if branch not in ("u", "s"):
        raise ValueError("branch must be 'u' or 's'")
    mp = orbit.mp
    rec = locate_L3(mp)
    level = rec.scaled.vec[1]
    fl, vtraj = _floquet_bundle(orbit, config)
    cfg = replace(config, energy_drift_bound=None)
    sign_time = 1.0 if branch == "u" else -1.0
    horizon = sign_time * (math.log(1.0 / h) / _k.NU_PEND + 10.0)
    taus = np.linspace(0.0, 2.0 * math.pi, n_tau, endpoint=False)
    hits = np.full((n_tau, 4), np.nan)
    times = np.full(n_tau, np.nan)
    flagged = 0
    for i, tau in enumerate(taus):
        base = orbit.state_at_tau(tau)
        if branch == "u":
            vdir, _ = _direction_at(vtraj, fl, orbit, tau)
        else:
            vdir, _ = _direction_at_stable(vtraj, fl, orbit, tau)
        seed = base + h * vdir
        rising = branch == "u"
        try:
            t_hit, s_hit = _first_section_hit(seed, mp, level, horizon, cfg,
                                              rising)
            hits[i] = s_hit
            times[i] = t_hit
        except CurveError:
            try:
                # escape times vary over the phase; retry before flagging
                t_hit, s_hit = _first_section_hit(seed, mp, level,
                                                  1.7 * horizon, cfg, rising)
                hits[i] = s_hit
                times[i] = t_hit
            except CurveError:
                flagged += 1
    if flagged > max_flag_fraction * n_tau:
        raise CurveError(f"{flagged}/{n_tau} seeds missed the section")
    valid = ~np.isnan(times)
    # fibers whose first crossing is not on the primary sheet (their hit
    # time is far from the bulk) would alias a later passage onto the
    # curve; they are masked out of the fit
    med = np.median(times[valid])
    outlier = valid & (np.abs(times - med) > 2.5)
    valid &= ~outlier
    if np.sum(valid) < max(8, n_tau // 3):
        raise CurveError("primary sheet too sparse")
    return SectionCurve(rho=orbit.rho, branch=branch, mp=mp, taus=taus,
                        hits=hits, hit_times=times, valid=valid,
                        energy=orbit.energy, Lambda_level=level,
                        n_flagged=flagged + int(np.sum(outlier)))


def _direction_at_stable(traj, fl, orbit, tau):
    mp = orbit.mp
    t = tau / (2.0 * math.pi) * orbit.period_scaled
    raw = traj.eval_raw(t)
    stm_cart = raw[4:].reshape(4, 4)
    c_state = ChartState("cartesian", raw[:4], mp)
    j_here = chart_jacobian(c_state, "scaled")
    j0 = chart_jacobian(ChartState("scaled", orbit.state_at_tau(0.0), mp),
                        "cartesian")
    stm_scaled = j_here @ stm_cart @ j0
    v = stm_scaled @ fl.stable
    return v / np.linalg.norm(v), raw[:4]


def _first_section_hit(seed_vec, mp, level, horizon, cfg, array_rising=True):
    """First admissible Lambda-level crossing, batch-scanned and refined.

    Detection uses the action-based Lambda (defined whenever the osculating
    orbit is elliptic); the section itself lives in the element chart, so a
    crossing only counts where the chart converts -- crossings inside the
    near-encounter belt where the chart degenerates are skipped and the
    first chartable crossing is taken.
    """
    state = ChartState("scaled", seed_vec, mp)
    traj = integrate(state, (0.0, horizon), cfg, via_cartesian=True,
                     allow_partial=True)
    ts = traj._raw_t
    ys = traj._raw_y
    cont = traj._cont
    nsub = 4
    npts = (ts.size - 1) * nsub + 1
    tg = np.empty(npts)
    theta = np.empty(npts)
    Lam = np.empty(npts)
    ok = np.empty(npts)
    _k.batch_section_scan(ts, ys, cont, nsub, mp.delta, tg, theta, Lam, ok)
    g = Lam - level
    for j in range(npts - 1):
        g1, g2 = g[j], g[j + 1]
        if not (np.isfinite(g1) and np.isfinite(g2)) or g1 * g2 >= 0.0:
            continue
        # apex-side crossing: Lambda rises through the level along the
        # unstable fibers; the stable fibers (time mirrors of the opposite
        # unstable branch) fall through it along the backward-ordered array
        rising = (g2 > g1) if array_rising else (g1 > g2)
        th_mid = 0.5 * (theta[j] + theta[j + 1])
        if not rising or abs(th_mid) < 1.0:
            continue
        # chart-free bisection on the action-based Lambda
        ta, tb = tg[j], tg[j + 1]
        ga, gb = g1, g2
        tm = 0.5 * (ta + tb)
        for _ in range(80):
            tm = 0.5 * (ta + tb)
            gm = _action_Lambda_at(traj, tm, mp) - level
            if not np.isfinite(gm):
                break
            if abs(gm) < 1e-13 or abs(tb - ta) < 1e-14:
                break
            if ga * gm < 0.0:
                tb, gb = tm, gm
            else:
                ta, ga = tm, gm
        try:
            vm = _scaled_at(traj, tm, mp)
        except CurveError:
            # the first intersection falls where the element chart fails;
            # the fiber is flagged rather than replaced by a later passage
            raise CurveError("first crossing not chartable")
        return tm * traj.time_scale, vm
    raise CurveError("no admissible section crossing")


def _action_Lambda_at(traj, t_raw, mp):
    i = traj._locate(t_raw)
    tmp = np.empty(traj._raw_y.shape[1])
    from ._rk import dense_eval
    dense_eval(traj._raw_t[i], traj._raw_t[i + 1] - traj._raw_t[i],
               traj._raw_y[i], traj._cont[i], t_raw, tmp)
    r = math.hypot(tmp[0], tmp[1])
    e2b = 0.5 * (tmp[2] ** 2 + tmp[3] ** 2) - 1.0 / r
    if e2b >= -1e-12:
        return np.nan
    return (math.sqrt(-0.5 / e2b) - 1.0) / mp.delta ** 2


def _scaled_at(traj, t_raw, mp):
    i = traj._locate(t_raw)
    tmp = np.empty(traj._raw_y.shape[1])
    from ._rk import dense_eval
    dense_eval(traj._raw_t[i], traj._raw_t[i + 1] - traj._raw_t[i],
               traj._raw_y[i], traj._cont[i], t_raw, tmp)
    w = np.empty(4)
    st = _k.cart_to_poin(tmp[:4], w)
    if st != 0:
        raise CurveError("chart failed during refinement")
    sc = np.empty(4)
    _k.poin_to_scaled(w, mp.delta, sc)
    return sc


@dataclass(frozen=True)
class Crossing:
    tau_u: float
    tau_s: float
    point: complex
    mismatch: float
    jac_det: float
    angle: float


@dataclass(frozen=True)
class IntersectionReport:
    rho: float
    crossings: tuple
    theta_fit: float
    r_model: float


def model_G_reference(tau_u, tau_s, r, theta):
    """Leading-order intersection system of the two offset circles."""
    g1 = r * (math.cos(tau_u + theta) - math.cos(tau_s + theta)) + 2.0
    g2 = r * (math.sin(tau_u + theta) - math.sin(tau_s + theta))
    return np.array([g1, g2])


def model_solutions(r, theta):
    """The two transverse model crossings for r > 1 (empty for r < 1)."""
    if r < 1.0:
        return []
    gh = math.acos(1.0 / r)
    out = []
    for s in (+1.0, -1.0):
        tau_s = s * gh - theta
        tau_u = math.pi - s * gh - theta
        out.append((tau_u % (2 * math.pi), tau_s % (2 * math.pi)))
    return out


def intersect_curves(cu: SectionCurve, cs: SectionCurve, n_seeds=64,
                     tol=1e-11) -> IntersectionReport:
    """All mismatch zeros of the two closed curves over (tau_u, tau_s)."""
    dc = cu.centroid() - cs.centroid()
    theta = math.atan2(dc.imag, dc.real)
    rho = 0.5 * (cu.rho + cs.rho)
    r_model = 2.0 * rho / abs(dc) if abs(dc) > 0 else math.inf
    seeds = [(tu, ts_) for tu, ts_ in model_solutions(min(r_model, 50.0), theta)]
    grid = np.linspace(0.0, 2.0 * math.pi, n_seeds, endpoint=False)
    # global sweep: nearest-approach pairs as extra seeds
    xu = np.array([cu.x_at(t) for t in grid])
    xs = np.array([cs.x_at(t) for t in grid])
    dmat = np.abs(xu[:, None] - xs[None, :])
    order = np.argsort(dmat.ravel())[:12]
    for flat in order:
        seeds.append((grid[flat // n_seeds], grid[flat % n_seeds]))
    found = []
    for tu0, ts0 in seeds:
        tu, ts_ = tu0, ts0
        ok = False
        for _ in range(60):
            F = cu.x_at(tu) - cs.x_at(ts_)
            if abs(F) < tol:
                ok = True
                break
            du = cu.dx_at(tu)
            ds = -cs.dx_at(ts_)
            J = np.array([[du.real, ds.real], [du.imag, ds.imag]])
            try:
                step = np.linalg.solve(J, np.array([F.real, F.imag]))
            except np.linalg.LinAlgError:
                break
            if not np.all(np.isfinite(step)) or np.max(np.abs(step)) > 1.5:
                break
            tu -= step[0]
            ts_ -= step[1]
        if not ok:
            continue
        tu %= 2.0 * math.pi
        ts_ %= 2.0 * math.pi
        if any(abs(_angdiff(tu, c.tau_u)) < 1e-6 and
               abs(_angdiff(ts_, c.tau_s)) < 1e-6 for c in found):
            continue
        du = cu.dx_at(tu)
        ds = cs.dx_at(ts_)
        J = np.array([[du.real, -ds.real], [du.imag, -ds.imag]])
        det = float(np.linalg.det(J))
        ang = abs(math.atan2((du * ds.conjugate()).imag,
                             (du * ds.conjugate()).real))
        found.append(Crossing(tau_u=float(tu), tau_s=float(ts_),
                              point=cu.x_at(tu),
                              mismatch=float(abs(cu.x_at(tu) - cs.x_at(ts_))),
                              jac_det=det, angle=float(min(ang, math.pi - ang))))
    found.sort(key=lambda c: c.tau_s)
    return IntersectionReport(rho=rho, crossings=tuple(found),
                              theta_fit=theta, r_model=r_model)


def _angdiff(a, b):
    return (a - b + math.pi) % (2.0 * math.pi) - math.pi


def _curve_orientation(cs: SectionCurve):
    taus = np.linspace(0.0, 2.0 * math.pi, 64, endpoint=False)
    area = 0.0
    for t in taus:
        x = cs.x_at(t)
        dx = cs.dx_at(t)
        area += (x.real * dx.imag - x.imag * dx.real)
    return 1.0 if area > 0 else -1.0


def signed_distance_to_curve(P: complex, cs: SectionCurve, n_scan=96):
    """Distance from P to the closed curve, negative on the inside."""
    taus = np.linspace(0.0, 2.0 * math.pi, n_scan, endpoint=False)
    ds = np.array([abs(P - cs.x_at(t)) for t in taus])
    t = taus[int(np.argmin(ds))]
    for _ in range(40):
        x = cs.x_at(t)
        dx = cs.dx_at(t)
        v = P - x
        f = v.real * dx.real + v.imag * dx.imag     # stationarity
        # second derivative of |v|^2/2 along tau
        h = 1e-6
        dxp = cs.dx_at(t + h)
        fp = ((P - cs.x_at(t + h)).real * dxp.real
              + (P - cs.x_at(t + h)).imag * dxp.imag)
        d2 = (fp - f) / h
        if d2 == 0.0 or not np.isfinite(d2):
            break
        step = f / d2
        t -= step
        if abs(step) < 1e-13:
            break
    x = cs.x_at(t)
    dx = cs.dx_at(t)
    v = P - x
    if not hasattr(cs, "_orient"):
        object.__setattr__(cs, "_orient", _curve_orientation(cs))
    # for a positively oriented curve the outward side has tangent x v < 0
    side = -cs._orient * (dx.real * v.imag - dx.imag * v.real)
    return math.copysign(abs(v), side) if side != 0 else abs(v)


def signed_separation(cu: SectionCurve, cs: SectionCurve, n=256):
    """Min over the u-curve of the signed distance to the s-curve
    (negative once the curves overlap)."""
    taus = np.linspace(0.0, 2.0 * math.pi, n, endpoint=False)
    best = math.inf
    arg_best = 0.0
    for t in taus:
        d = signed_distance_to_curve(cu.x_at(t), cs)
        if d < best:
            best = d
            arg_best = t
    return float(best), float(arg_best)


@dataclass(frozen=True)
class TangencyReport:
    mp: MassParam
    rho_min: float
    point: complex
    tau_u_star: float
    quad_coeff: float
    quad_residual: float
    unfolding_speed: float
    r_of_rho: object            # rho -> model r given a |Theta| estimate
    theta_fit: float
    absTheta_from_rho_min: float


def curves_at_rho(mp, rho, n_tau=TAU_GRID_DEFAULT, h=1e-7,
                  config: FlowConfig = DEFAULT_FLOW):
    orbit = solve_orbit_fourier(rho, mp)
    cu = section_curve(orbit, "u", n_tau, h, config)
    cs = section_curve(orbit, "s", n_tau, h, config)
    return cu, cs


def find_tangency(mp: MassParam, rho_bracket=None, n_tau=TAU_GRID_DEFAULT,
                  h=1e-7, config: FlowConfig = DEFAULT_FLOW, rho_rtol=2e-4,
                  absTheta_fit=None) -> TangencyReport:
    """Continuation in rho bracketing the 0 <-> 2 intersection transition.

    The signed separation between the curves changes sign at the tangency;
    the bracket midpoint limit gives rho_min, the contact coefficient is
    fitted on the separation profile and the unfolding speed is the rho
    derivative of the minimal signed separation.
    """
    if rho_bracket is None:
        s0 = splitting_distance(mp, "sigma0", config=replace(
            config, energy_drift_bound=None))
        est = 0.5 * abs(s0.x_diff)
        rho_bracket = (0.7 * est, 1.45 * est)
    lo, hi = rho_bracket
    cache = {}

    def sep(rho):
        if rho not in cache:
            cu, cs = curves_at_rho(mp, rho, n_tau, h, config)
            cache[rho] = (cu, cs, signed_separation(cu, cs))
        return cache[rho][2][0]

    f_lo, f_hi = sep(lo), sep(hi)
    if not (f_lo > 0.0 > f_hi):
        raise CurveError(
            f"tangency not bracketed: sep({lo:.4g})={f_lo:.3g}, "
            f"sep({hi:.4g})={f_hi:.3g}")
    while (hi - lo) > rho_rtol * hi:
        mid = 0.5 * (lo + hi)
        if sep(mid) > 0.0:
            lo = mid
        else:
            hi = mid
    rho_min = 0.5 * (lo + hi)
    cu, cs, (sep_min, tau_star) = cache[min(cache, key=lambda r: abs(r - rho_min))] \
        if rho_min not in cache else cache[rho_min]
    if rho_min not in cache:
        cu, cs = curves_at_rho(mp, rho_min, n_tau, h, config)
        sep_min, tau_star = signed_separation(cu, cs)
    # quadratic contact: signed offset along the u-curve near the argmin
    window = np.linspace(-0.25, 0.25, 41)
    ss, ds = [], []
    for w in window:
        d = signed_distance_to_curve(cu.x_at(tau_star + w), cs)
        ss.append(w)
        ds.append(d - sep_min)
    ss = np.array(ss)
    ds = np.array(ds)
    M = np.column_stack([ss * ss, ss, np.ones_like(ss)])
    coef, *_ = np.linalg.lstsq(M, ds, rcond=None)
    resid = ds - M @ coef
    quad_res = float(np.max(np.abs(resid)) / max(np.max(np.abs(ds)), 1e-300))
    # unfolding speed: d(min separation)/d rho by a centred difference
    dr = max(0.02 * rho_min, (hi - lo))
    s_p = sep(rho_min + dr)
    s_m = sep(rho_min - dr)
    speed = (s_p - s_m) / (2.0 * dr)
    dc = cu.centroid() - cs.centroid()
    theta = math.atan2(dc.imag, dc.real)
    delta = mp.delta
    pref = 2.0 ** (1.0 / 6.0) / 2.0 * delta ** (1.0 / 3.0) \
        * math.exp(-_A_CONST() / delta ** 2)
    absTheta = rho_min / pref

    def r_of_rho(rho, absT=absTheta_fit if absTheta_fit else absTheta):
        return rho / (0.5 * 2.0 ** (1.0 / 6.0) * absT * delta ** (1.0 / 3.0)
                      * math.exp(-_A_CONST() / delta ** 2))

    return TangencyReport(mp=mp, rho_min=rho_min, point=cu.x_at(tau_star),
                          tau_u_star=float(tau_star),
                          quad_coeff=float(coef[0]), quad_residual=quad_res,
                          unfolding_speed=float(speed), r_of_rho=r_of_rho,
                          theta_fit=theta, absTheta_from_rho_min=absTheta)


def _A_CONST():
    from .pendulum import constant_A
    if not hasattr(_A_CONST, "_v"):
        _A_CONST._v = constant_A()
    return _A_CONST._v
