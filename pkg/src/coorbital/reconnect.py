"""Two-round homoclinic mass ratios via the reversibility criterion.

The unstable "+" branch is followed through its excursion; after the
unwrapped longitude has exceeded the guard value the first descending
crossing of {lambda = 0} is located, and the signed gap is Im x there
(zero exactly when the orbit lies on the symmetry set S = {lambda=0, x=y},
which by reversibility closes a 2-round homoclinic connection).
"""

import math
from dataclasses import dataclass

import numpy as np

from . import pendulum
from .charts import ChartState, MassParam, involution
from .equilibria import locate_L3
from dataclasses import replace

from .flow import (DEFAULT_FLOW, EventSpec, EventNotFoundError, FlowConfig,
                   find_event, integrate)
from .manifolds1d import BranchId, seed_manifold, _excursion_horizon

LAMBDA_GUARD = 2.0          # below lambda_0, above the L5 longitude 2pi/3
MU_LO_DEFAULT = 0.0015
MU_HI_DEFAULT = 0.02
SCAN_DEFAULT = 400
RHO_EIG0 = math.sqrt(21.0 / 8.0)


@dataclass(frozen=True)
class ReconnectRoot:
    index: int | None         # assigned post hoc by asymptotic_check
    mu: float
    bracket: tuple
    gap_slope: float           # d(gap)/d(mu) across the final bracket
    t_lambda_star: float       # scaled time of the lambda* crossing
    t_symmetry: float          # scaled time of the symmetry event
    state_symmetry: np.ndarray  # scaled chart state at the event
    passage_time: float        # t_symmetry - t_lambda_star (scaled time)


class GapUndefinedError(RuntimeError):
    pass


def _gap_config(config):
    # encounter legs genuinely drift above the strict default bound
    return replace(config, energy_drift_bound=None, event_subsamples=3)


def gap_crossing(mp: MassParam, h=1e-8, config: FlowConfig = DEFAULT_FLOW,
                 lambda_star=1.5):
    """(t_lambda_star, t_sym, state_sym) of the branch's return crossing."""
    cfg = _gap_config(config)
    seed = seed_manifold(mp, BranchId("u", "+"), h)
    horizon = _excursion_horizon(mp, h)
    ev_guard = EventSpec(lambda t, v: v[0] - LAMBDA_GUARD, direction=-1, k=1,
                         name="lambda=guard")
    t_g, s_g, traj = find_event(seed, ev_guard, horizon, cfg,
                                via_cartesian=True)
    ev_star = EventSpec(lambda t, v: v[0] - lambda_star, direction=-1, k=1,
                        name="lambda=lambda*")
    t_star, _, traj2 = find_event(s_g, ev_star, t_g + 0.4 * horizon, cfg,
                                  t0=t_g, via_cartesian=True)
    ev_sym = EventSpec(lambda t, v: v[0], direction=-1, k=1, name="lambda=0")
    t_sym, s_sym, _ = find_event(traj2.state_at(t_star), ev_sym,
                                 t_star + 0.4 * horizon, cfg, t0=t_star,
                                 via_cartesian=True)
    return t_star, t_sym, s_sym


def symmetry_gap(mp: MassParam, h=1e-8, config: FlowConfig = DEFAULT_FLOW):
    """Signed gap: Im x at the first descending lambda = 0 crossing after
    the excursion (zero iff the connection is 2-round homoclinic)."""
    try:
        _, _, s_sym = gap_crossing(mp, h, config)
    except EventNotFoundError as e:
        raise GapUndefinedError(str(e)) from e
    return float(s_sym.vec[3])


def find_mu_sequence(mu_lo=MU_LO_DEFAULT, mu_hi=MU_HI_DEFAULT,
                     scan_points=SCAN_DEFAULT, h=1e-8,
                     config: FlowConfig = DEFAULT_FLOW, mu_tol=1e-10,
                     progress=None):
    """Scan the gap on a log grid, bracket sign changes, bisect each root.

    Returns roots ordered by decreasing mu.  Scan points whose excursion
    fails (deep encounter at the top of the range) are skipped.
    """
    grid = np.geomspace(mu_lo, mu_hi, scan_points)
    gaps = np.full(scan_points, np.nan)
    for i, mu in enumerate(grid):
        try:
            gaps[i] = symmetry_gap(MassParam(mu), h, config)
        except (GapUndefinedError, Exception) as e:
            if not isinstance(e, GapUndefinedError):
                gaps[i] = np.nan
        if progress is not None:
            progress(i, scan_points, grid[i], gaps[i])
    roots = []
    for i in range(scan_points - 1):
        g1, g2 = gaps[i], gaps[i + 1]
        if not (np.isfinite(g1) and np.isfinite(g2)) or g1 * g2 >= 0.0:
            continue
        a, b, ga, gb = grid[i], grid[i + 1], g1, g2
        ok = True
        while b - a > mu_tol:
            m = 0.5 * (a + b)
            try:
                gm = symmetry_gap(MassParam(m), h, config)
            except GapUndefinedError:
                ok = False
                break
            if ga * gm <= 0.0:
                b, gb = m, gm
            else:
                a, ga = m, gm
        if not ok:
            continue
        mu_root = 0.5 * (a + b)
        gap_mid = symmetry_gap(MassParam(mu_root), h, config)
        if abs(gap_mid) > 1e-5:
            # sign change across a regime jump, not a genuine zero
            continue
        slope = (gb - ga) / (b - a) if b > a else np.inf
        t_star, t_sym, s_sym = gap_crossing(MassParam(mu_root), h, config)
        roots.append(ReconnectRoot(
            index=None, mu=mu_root, bracket=(grid[i], grid[i + 1]),
            gap_slope=float(slope), t_lambda_star=t_star, t_symmetry=t_sym,
            state_symmetry=s_sym.vec.copy(),
            passage_time=t_sym - t_star))
    roots.sort(key=lambda r: -r.mu)
    return roots


def _approach_distance(sym, mp, L_sc, horizon, cfg):
    state = ChartState("scaled", sym, mp)
    traj = integrate(state, (0.0, horizon), cfg, via_cartesian=True,
                     allow_partial=True)
    ts = np.linspace(horizon * 0.3, traj.t[-1], 1200)
    best = np.inf
    for tq in ts:
        try:
            v = traj(tq)
            d = math.sqrt((v[0] - L_sc[0]) ** 2 + (v[1] - L_sc[1]) ** 2
                          + (v[2] - L_sc[2]) ** 2 + (v[3] - L_sc[3]) ** 2)
            best = min(best, d)
        except Exception:
            pass
    return best


def passage_time(mp: MassParam, root: ReconnectRoot) -> float:
    """Scaled time between the lambda* crossing and the symmetry event."""
    return root.passage_time


def asymptotic_check(roots, A=None):
    """Index assignment and the mu_n ~ A/(n pi rho_eig(0)) law diagnostics.

    Returns a list of dicts with n, mu, normalized product, and the
    1/mu-spacing ratios against pi*rho_eig/A.
    """
    if len(roots) < 3:
        raise ValueError("need at least 3 roots")
    if A is None:
        A = pendulum.constant_A()
    xs = np.array([A / (r.mu * math.pi * RHO_EIG0) for r in roots])
    # consecutive roots carry consecutive indices; anchor the ladder offset
    # on the asymptotic (small mu) half, where mu_n ~ A/(n pi rho) is tight
    tail = xs[len(xs) // 2:]
    offs = np.arange(len(xs))[len(xs) // 2:]
    cands = range(int(np.floor(tail[0] - offs[0])) - 2,
                  int(np.ceil(tail[0] - offs[0])) + 3)
    def _cost(n0):
        ns_t = n0 + offs
        return float(np.sum((ns_t / tail - 1.0) ** 2))
    costs = sorted((_cost(n0), n0) for n0 in cands)
    n0 = costs[0][1]
    if len(costs) > 1 and costs[0][0] > 0.25 * costs[1][0]:
        raise ValueError("index assignment ambiguous")
    ns = n0 + np.arange(len(xs))
    if np.any(ns <= 0):
        raise ValueError("index assignment ambiguous")
    out = []
    spacing_ref = math.pi * RHO_EIG0 / A
    for i, (r, n) in enumerate(zip(roots, ns)):
        row = {"n": int(n), "mu": r.mu,
               "product": r.mu * n * math.pi * RHO_EIG0 / A,
               "passage_time": r.passage_time}
        if i + 1 < len(roots):
            row["spacing_ratio"] = (1.0 / roots[i + 1].mu - 1.0 / r.mu) \
                / spacing_ref
        out.append(row)
    return out


@dataclass(frozen=True)
class TwoRoundReport:
    re_entry: float        # distance of the assembled orbit's ends from L
    junction: float        # |(lambda, Im x)| defect at the symmetry point
    n_components: int      # excursion components outside the cartesian ball
    shadow_approach: float | None  # forward-shadowing closest approach


def verify_two_round(mp: MassParam, root: ReconnectRoot, h=1e-8,
                     config: FlowConfig = DEFAULT_FLOW, ball_radius=1.2,
                     shadow=False) -> TwoRoundReport:
    """Assemble the symmetric orbit at a root and verify its 2-round shape.

    By exact reversibility the assembled orbit is the computed unstable arc
    together with its involution mirror; its ends sit h-close to the fixed
    point and its only defect is the junction mismatch on S.  The optional
    forward-shadowing diagnostic re-integrates from the projected symmetric
    point (its floor is the double-precision error amplified through the
    excursion, empirically ~1e-5..1e-6).
    """
    from .manifolds1d import seed_manifold, BranchId
    cfg = replace(_gap_config(config), rtol=1e-13, atol=1e-13)
    rec = locate_L3(mp)
    seed = seed_manifold(mp, BranchId("u", "+"), h)
    traj = integrate(seed, (0.0, root.t_symmetry), cfg, via_cartesian=True,
                     allow_partial=True)
    end = traj(traj.t[-1])
    junction = math.hypot(end[0], end[3])
    re_entry = float(np.linalg.norm(seed.vec - rec.scaled.vec))
    L_cart = rec.cartesian.vec
    ts = np.linspace(0.0, traj.t[-1], 4000)
    prof = np.empty(ts.size)
    for i, tq in enumerate(ts):
        c = traj.eval_raw(tq)
        prof[i] = math.sqrt(sum((c[k] - L_cart[k]) ** 2 for k in range(4)))
    # assembled orbit = forward arc + mirrored arc glued at the S point
    full = np.concatenate([prof, prof[::-1][1:]])
    outside = np.isfinite(full) & (full > ball_radius)
    n_comp = int(np.sum(outside[1:] & ~outside[:-1]) + (1 if outside[0] else 0))
    approach = None
    if shadow:
        sym = np.array(root.state_symmetry)
        sym[0] = 0.0
        sym[3] = 0.0
        approach = float(_approach_distance(
            sym, mp, rec.scaled.vec, root.t_symmetry * 1.15 + 5.0, cfg))
    return TwoRoundReport(re_entry=re_entry, junction=float(junction),
                          n_components=n_comp, shadow_approach=approach)
