"""One-dimensional manifolds of the scaled fixed point: branch shooting,
first section hits, splitting distances and the exponential-law fit.

Branch convention: the "+" unstable direction has positive lambda component
in the scaled chart; the stable "+" branch is its time mirror.  The stable
manifold is obtained by backward shooting, or on the (involution invariant)
horizontal section as the mirror image of the opposite unstable branch.
"""

import math
from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np

from . import pendulum
from .charts import ChartState, MassParam, convert, involution
from .equilibria import locate_L3
from .flow import DEFAULT_FLOW, EventSpec, FlowConfig, find_event

CBRT_4 = 4.0 ** (1.0 / 3.0)              # polar-distance law prefactor
SIXTH_ROOT_2 = 2.0 ** (1.0 / 6.0)
LAMBDA_STAR_DEFAULT = 1.5
SECTIONS = ("polar", "lambda-star", "sigma0")


@dataclass(frozen=True)
class BranchId:
    stability: str   # "u" or "s"
    sign: str        # "+" or "-"

    def __post_init__(self):
        if self.stability not in ("u", "s") or self.sign not in ("+", "-"):
            raise ValueError(f"bad branch {self}")


@dataclass(frozen=True)
class SplittingSample:
    mu: float
    section: str
    lambda_star: float | None
    hit_u: ChartState
    hit_s: ChartState
    distance: float            # the section's law-normalized distance
    x_diff: complex | None     # scaled-chart secular difference (if defined)
    lambda_diff: float | None
    Lambda_diff: float | None
    energy_mismatch: float


@dataclass(frozen=True)
class SplittingFit:
    section: str
    A_fit: float
    absTheta_fit: float
    residuals: np.ndarray
    mus: np.ndarray
    distances: np.ndarray


@lru_cache(maxsize=64)
def _l3(mu):
    return locate_L3(MassParam(mu))


def seed_manifold(mp: MassParam, branch: BranchId, h=1e-8) -> ChartState:
    """Scaled-chart seed L + h * (oriented unit eigenvector)."""
    rec = _l3(mp.mu)
    v = rec.unstable_scaled if branch.stability == "u" else rec.stable_scaled
    s = 1.0 if branch.sign == "+" else -1.0
    return ChartState("scaled", rec.scaled.vec + s * h * v, mp)


def _scan_config(config):
    # the section quantities are slow in rotating time; a light subsampling
    # of each step is enough for bracketing
    if config.event_subsamples <= 4:
        return config
    return replace(config, event_subsamples=3)


def section_event(mp: MassParam, section: str, lambda_star=LAMBDA_STAR_DEFAULT,
                  branch_sign="+"):
    """EventSpec of a section on the scaled-chart presentation."""
    if section == "lambda-star":
        return EventSpec(lambda t, v: v[0] - lambda_star, direction=-1, k=1,
                         admissible=lambda t, v: v[1] > 0.0,
                         name=f"lambda={lambda_star}")
    if section == "sigma0":
        rec = _l3(mp.mu)
        level = rec.scaled.vec[1]
        sgn = 1 if branch_sign == "+" else -1
        # the apex-side first crossing has Lambda rising through the level on
        # the "+" loop and falling on its mirror image
        return EventSpec(lambda t, v: v[1] - level, direction=sgn, k=1,
                         admissible=lambda t, v: sgn * v[0] > 1.0,
                         name="sigma0")
    if section == "polar":
        # theta = pi/2 with r > 1, first crossing on the returning leg
        def g(t, v):
            return v[1] - 0.5 * math.pi

        return EventSpec(g, direction=-1, k=1,
                         admissible=lambda t, v: v[0] > 1.0, name="theta=pi/2")
    raise ValueError(f"unknown section {section!r}")


def _excursion_horizon(mp, h):
    """Scaled-time budget for one full excursion from an h-offset seed."""
    return (math.log(1.0 / h) / pendulum.NU + 8.0) * 1.35


def first_hit(mp: MassParam, branch: BranchId, section: str,
              lambda_star=LAMBDA_STAR_DEFAULT, h=1e-8,
              config: FlowConfig = DEFAULT_FLOW):
    """First admissible section crossing of a manifold branch.

    Unstable branches integrate forward, stable ones backward; the state is
    returned in the section's natural chart (scaled, or polar for `polar`).
    """
    seed = seed_manifold(mp, branch, h)
    chart = "polar" if section == "polar" else "scaled"
    seed = convert(seed, chart) if chart != "scaled" else seed
    tmax = _excursion_horizon(mp, h)
    if branch.stability == "s":
        tmax = -tmax
    if chart == "polar":
        tmax *= mp.delta ** -2    # polar presentation runs on rotating time
    ev = section_event(mp, section, lambda_star, branch.sign)
    cfg = _scan_config(config)
    t_star, hit, traj = find_event(seed, ev, tmax, cfg, via_cartesian=True)
    return t_star, hit, traj


def _stable_hit(mp, sign, section, lambda_star, h, config):
    """Stable-branch hit; on the involution-invariant sigma0 it is the
    mirror image of the opposite unstable branch (halves cost, exact
    reversibility), elsewhere it is computed by backward shooting."""
    if section == "sigma0":
        opp = "-" if sign == "+" else "+"
        t_u, hit_u, _ = first_hit(mp, BranchId("u", opp), section,
                                  lambda_star, h, config)
        return -t_u, involution(hit_u)
    t_s, hit_s, _ = first_hit(mp, BranchId("s", sign), section,
                              lambda_star, h, config)
    return t_s, hit_s


def _sample_from_hits(mp, section, lambda_star, hit_u, hit_s):
    from .charts import hamiltonian
    e_u = hamiltonian(hit_u)
    e_s = hamiltonian(hit_s)
    if section == "polar":
        du = hit_u.vec - hit_s.vec
        dist = math.sqrt(du[0] ** 2 + du[2] ** 2 + du[3] ** 2)  # (r, R, G)
        return SplittingSample(mp.mu, section, lambda_star, hit_u, hit_s,
                               dist, None, None, float(du[0]),
                               abs(e_u - e_s))
    dx = complex(hit_u.vec[2] - hit_s.vec[2], hit_u.vec[3] - hit_s.vec[3])
    dlam = float(hit_u.vec[0] - hit_s.vec[0])
    dLam = float(hit_u.vec[1] - hit_s.vec[1])
    dist = math.sqrt(2.0 * abs(dx) ** 2 + dlam ** 2 + dLam ** 2)
    return SplittingSample(mp.mu, section, lambda_star, hit_u, hit_s, dist,
                           dx, dlam, dLam, abs(e_u - e_s))


def splitting_distance(mp: MassParam, section: str,
                       lambda_star=LAMBDA_STAR_DEFAULT, h=1e-8,
                       config: FlowConfig = DEFAULT_FLOW,
                       richardson=True) -> SplittingSample:
    """Splitting of W^{u,+} / W^{s,+} on the section, h-extrapolated."""

    def one(hh):
        _, hit_u, _ = first_hit(mp, BranchId("u", "+"), section, lambda_star,
                                hh, config)
        _, hit_s = _stable_hit(mp, "+", section, lambda_star, hh, config)
        return _sample_from_hits(mp, section, lambda_star, hit_u, hit_s)

    s1 = one(h)
    if not richardson:
        return s1
    s2 = one(h / 2.0)
    # the seed error is quadratic in the offset, so extrapolate at order 2
    dist = (4.0 * s2.distance - s1.distance) / 3.0
    xd = None if s1.x_diff is None else (4.0 * s2.x_diff - s1.x_diff) / 3.0
    ld = None if s1.lambda_diff is None \
        else (4.0 * s2.lambda_diff - s1.lambda_diff) / 3.0
    Ld = None if s1.Lambda_diff is None \
        else (4.0 * s2.Lambda_diff - s1.Lambda_diff) / 3.0
    return SplittingSample(mp.mu, section, lambda_star, s2.hit_u, s2.hit_s,
                           dist, xd, ld, Ld,
                           max(s1.energy_mismatch, s2.energy_mismatch))


def law_distance(sample: SplittingSample) -> float:
    """The distance entering the exponential law for this sample's section."""
    if sample.section == "polar":
        return sample.distance
    return abs(sample.x_diff)


def _law_offset(section, mu):
    """ln of the known prefactor: distance = pref * e^{-A/sqrt(mu)} |Theta|."""
    delta = mu ** 0.25
    if section == "polar":
        return math.log(CBRT_4) + math.log(mu) / 3.0
    return math.log(SIXTH_ROOT_2) + math.log(delta) / 3.0


def fit_theta_A(samples) -> SplittingFit:
    """Linear regression of the exponentially small splitting law.

    ln(dist) - ln(prefactor(mu)) = ln|Theta| - A / sqrt(mu); the slope
    recovers A, the intercept |Theta|.
    """
    samples = list(samples)
    if len(samples) < 5:
        raise ValueError("need at least 5 samples")
    mus = np.array([s.mu for s in samples])
    if mus.max() / mus.min() < 4.0:
        raise ValueError("mu grid must span at least a factor 4")
    sec = samples[0].section
    ds = np.array([law_distance(s) for s in samples])
    y = np.log(ds) - np.array([_law_offset(sec, m) for m in mus])
    x = 1.0 / np.sqrt(mus)
    M = np.column_stack([np.ones_like(x), -x])
    coef, *_ = np.linalg.lstsq(M, y, rcond=None)
    resid = y - M @ coef
    if np.linalg.matrix_rank(M) < 2:
        raise ValueError("degenerate mu grid")
    return SplittingFit(section=sec, A_fit=float(coef[1]),
                        absTheta_fit=float(math.exp(coef[0])),
                        residuals=resid, mus=mus, distances=ds)


def synthetic_samples(mus, A, absTheta, section="polar"):
    """Samples generated exactly from the leading-order law (fit oracle)."""
    out = []
    for mu in mus:
        d = math.exp(_law_offset(section, mu)) * absTheta \
            * math.exp(-A / math.sqrt(mu))
        dummy = ChartState("scaled", np.zeros(4), MassParam(mu))
        xd = None if section == "polar" else complex(d, 0.0)
        out.append(SplittingSample(mu, section, None, dummy, dummy, d, xd,
                                   0.0, 0.0, 0.0))
    return out


def transport_to_sigma0(mp: MassParam, sample_lambda_star: SplittingSample,
                        lambda_star=LAMBDA_STAR_DEFAULT):
    """Transport the lambda-star difference vector to the horizontal section
    with the pendulum fundamental matrix (the inverse matrix applied to the
    difference); returns the predicted secular-difference modulus there."""
    if sample_lambda_star.section != "lambda-star":
        raise ValueError("sample must be on the lambda-star section")
    u_star = pendulum.u_of_lambda(lambda_star)
    fm = pendulum.fundamental_matrix(u_star, u_star if u_star != 0 else 1.0, mp)
    dvec = np.array([
        0.0,
        sample_lambda_star.Lambda_diff,
        sample_lambda_star.x_diff,
        np.conj(sample_lambda_star.x_diff)], dtype=complex)
    pred = np.linalg.solve(fm.matrix, dvec)
    return abs(pred[2]), pred
