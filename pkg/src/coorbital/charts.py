"""The four coordinate charts, conversions, Hamiltonians and involutions.

Charts and their real-slice state layouts:

    cartesian : (q1, q2, p1, p2)      rotating synodic frame, Eq.-style h
    polar     : (r, theta, R, G)      symplectic polar coordinates
    poincare  : (lambda, L, Re eta, Im eta)   xi = conj(eta) implied
    scaled    : (lambda, Lambda, Re x, Im x)  y = conj(x) implied; slow-fast
                time t_fast = t_scaled / delta^2 recorded by the chart itself

The secular-pair phase convention is ours (the chart is only pinned up to a
phase); every quantity reported downstream is convention independent.
"""

from dataclasses import dataclass, field

import numpy as np

from . import _kernels as _k

CHARTS = ("cartesian", "polar", "poincare", "scaled")

LAMBDA0 = _k.LAMBDA0
NU_PEND = _k.NU_PEND


class CollisionError(ValueError):
    """State within the collision tolerance of a primary."""


class ChartDomainError(ValueError):
    """State outside the chart's admissible region."""


class KeplerError(ValueError):
    """Osculating-element conversion failed (non-elliptic orbit or
    non-convergent eccentric-longitude solve)."""


@dataclass(frozen=True)
class Domain:
    """Admissibility bounds used when evaluating / converting states.

    The scaled-chart bounds protect the region where the slow-fast picture
    is meaningful; at the working mass ratios the manifold excursions swing
    through osculating-element spikes near the planet turn, so the defaults
    are generous (the hard limits are the collision tolerance and the
    eccentricity ceiling of the element chart).
    """
    collision_tol: float = 1e-8
    scaled_lambda_margin: float = 0.05   # require |lambda - pi| > margin
    scaled_radius: float = 8.0           # require |(Lambda, x)| < radius
    ecc_max: float = 0.9


DEFAULT_DOMAIN = Domain()


@dataclass(frozen=True)
class MassParam:
    """Mass ratio mu with the singular-scaling parameter delta = mu**(1/4)."""
    mu: float
    delta: float = field(init=False)

    def __post_init__(self):
        if not 0.0 <= self.mu <= 0.5:
            raise ValueError(f"mu must be in [0, 1/2], got {self.mu}")
        object.__setattr__(self, "delta", self.mu ** 0.25)


@dataclass(frozen=True)
class ChartState:
    """A 4-vector in one of the charts, tagged with chart and mass parameter."""
    chart: str
    vec: np.ndarray
    mp: MassParam

    def __post_init__(self):
        if self.chart not in CHARTS:
            raise ValueError(f"unknown chart {self.chart!r}")
        v = np.asarray(self.vec, dtype=float).copy()
        if v.shape != (4,):
            raise ValueError("state vector must have shape (4,)")
        v.setflags(write=False)
        object.__setattr__(self, "vec", v)

    @property
    def secular(self):
        """The complex secular component (eta or x) for poincare/scaled."""
        if self.chart not in ("poincare", "scaled"):
            raise ValueError(f"chart {self.chart!r} has no secular pair")
        return complex(self.vec[2], self.vec[3])


def _check_cart(vec, mu, domain):
    if _k._norm2(vec[0] - mu, vec[1]) < domain.collision_tol:
        raise CollisionError("state collides with the first primary")
    if _k._norm2(vec[0] - mu + 1.0, vec[1]) < domain.collision_tol:
        raise CollisionError("state collides with the second primary")


def _check_scaled(vec, domain):
    if abs(_k.wrap_angle(vec[0] - np.pi)) <= domain.scaled_lambda_margin:
        raise ChartDomainError(
            f"scaled chart needs |lambda - pi| > {domain.scaled_lambda_margin}")
    if np.sqrt(vec[1] ** 2 + vec[2] ** 2 + vec[3] ** 2) >= domain.scaled_radius:
        raise ChartDomainError(
            f"scaled chart needs |(Lambda, x)| < {domain.scaled_radius}")


def _to_cartesian_vec(chart, vec, mp, domain):
    if chart == "cartesian":
        return np.array(vec)
    out = np.empty(4)
    if chart == "polar":
        _k.polar_to_cart(vec, out)
        return out
    if chart == "poincare":
        status = _k.poin_to_cart(vec, out)
    else:  # scaled
        _check_scaled(vec, domain)
        pz = np.empty(4)
        _k.scaled_to_poin(vec, mp.delta, pz)
        status = _k.poin_to_cart(pz, out)
    if status == 1:
        raise KeplerError("osculating orbit not elliptic (e >= 1)")
    if status == 2:
        raise KeplerError("secular pair undefined (L + G <= 0)")
    if status == 3:
        raise KeplerError("eccentric-longitude solve did not converge")
    return out


def _from_cartesian_vec(target, cvec, mp, domain):
    if target == "cartesian":
        return np.array(cvec)
    out = np.empty(4)
    if target == "polar":
        _k.cart_to_polar(cvec, out)
        return out
    status = _k.cart_to_poin(cvec, out)
    if status == 1:
        raise KeplerError("osculating orbit not elliptic")
    if status == 2:
        raise KeplerError("secular pair undefined (L + G <= 0)")
    ecc2 = 1.0 - (out[1] - (out[2] ** 2 + out[3] ** 2)) ** 2 / out[1] ** 2
    if ecc2 > domain.ecc_max ** 2:
        raise KeplerError(f"osculating eccentricity above {domain.ecc_max}")
    if target == "poincare":
        return out
    sc = np.empty(4)
    _k.poin_to_scaled(out, mp.delta, sc)
    _check_scaled(sc, domain)
    return sc


def convert(state: ChartState, target: str, domain: Domain = DEFAULT_DOMAIN) -> ChartState:
    """Convert a state between charts (round trips are identity to ~1e-12)."""
    if target not in CHARTS:
        raise ValueError(f"unknown chart {target!r}")
    if target == state.chart:
        return state
    if state.chart in ("scaled", "poincare") and state.mp.mu == 0.0:
        raise ChartDomainError("scaled/poincare conversions need mu > 0")
    cvec = _to_cartesian_vec(state.chart, state.vec, state.mp, domain)
    _check_cart(cvec, state.mp.mu, domain)
    return ChartState(target, _from_cartesian_vec(target, cvec, state.mp, domain), state.mp)


def hamiltonian(state: ChartState, domain: Domain = DEFAULT_DOMAIN) -> float:
    """Energy in the state's own chart (scaled chart: slow-fast Hamiltonian)."""
    vec, mu = state.vec, state.mp.mu
    if state.chart == "cartesian":
        _check_cart(vec, mu, domain)
        return float(_k.cart_hamiltonian(vec, mu))
    if state.chart == "polar":
        cvec = _to_cartesian_vec("polar", vec, state.mp, domain)
        _check_cart(cvec, mu, domain)
        return float(_k.polar_hamiltonian(vec, mu))
    if state.chart == "poincare":
        return float(_k.poin_hamiltonian(vec, mu))
    _check_scaled(vec, domain)
    if mu == 0.0:
        # unperturbed slow-fast limit; finite only on the slow plane x = 0
        if vec[2] != 0.0 or vec[3] != 0.0:
            raise ChartDomainError("mu = 0 scaled states must have x = 0")
        return float(_k.scaled_kepler_part(vec[1], 0.0) + _k.pot_V(vec[0]))
    return float(_k.scaled_hamiltonian(vec, mu, state.mp.delta))


def vector_field(state: ChartState, domain: Domain = DEFAULT_DOMAIN) -> np.ndarray:
    """Hamiltonian vector field w.r.t. the chart's symplectic form.

    Scaled chart uses the slow-fast time (d/dt_scaled = delta^-2 d/dt).
    """
    vec, mu = state.vec, state.mp.mu
    out = np.empty(4)
    if state.chart == "cartesian":
        _check_cart(vec, mu, domain)
        _k.cart_rhs(vec, mu, out)
    elif state.chart == "polar":
        cvec = _to_cartesian_vec("polar", vec, state.mp, domain)
        _check_cart(cvec, mu, domain)
        _k.polar_rhs(vec, mu, out)
    elif state.chart == "poincare":
        _k.poin_rhs(vec, mu, out)
        if not np.all(np.isfinite(out)):
            raise KeplerError("vector field undefined (chart map failed)")
    else:
        _check_scaled(vec, domain)
        if mu == 0.0:
            if vec[2] != 0.0 or vec[3] != 0.0:
                raise ChartDomainError("mu = 0 scaled states must have x = 0")
            out[0] = -3.0 * vec[1]
            out[1] = -_k.pot_Vp(vec[0])
            out[2] = 0.0
            out[3] = 0.0
        else:
            _k.scaled_rhs(vec, mu, state.mp.delta, out)
            if not np.all(np.isfinite(out)):
                raise KeplerError("vector field undefined (chart map failed)")
    return out


def involution(state: ChartState) -> ChartState:
    """The reversing involution in the state's chart (Psi / Phi)."""
    v = state.vec
    if state.chart == "cartesian":
        w = np.array([v[0], -v[1], -v[2], v[3]])
    elif state.chart == "polar":
        w = np.array([v[0], -v[1], -v[2], v[3]])
    else:  # poincare and scaled share (-lambda, ., conj)
        w = np.array([-v[0], v[1], v[2], -v[3]])
    return ChartState(state.chart, w, state.mp)


def chart_jacobian(state: ChartState, target: str,
                   domain: Domain = DEFAULT_DOMAIN) -> np.ndarray:
    """d(target coords)/d(source coords) at the given state, 4x4.

    Used to transport tangent vectors and state-transition matrices between
    charts.  Time rescaling of the scaled chart is *not* included.
    """
    if target not in CHARTS:
        raise ValueError(f"unknown chart {target!r}")
    if target == state.chart:
        return np.eye(4)
    j_source = _dcart_dchart(state.chart, state)
    tstate = convert(state, target, domain)
    j_target = _dcart_dchart(target, tstate)
    # d(target)/d(source) = [d(cart)/d(target)]^-1 [d(cart)/d(source)]
    return np.linalg.solve(j_target, j_source)


def _dcart_dchart(chart, state):
    """d(cartesian)/d(chart coords) at the state, 4x4."""
    if chart == "cartesian":
        return np.eye(4)
    if chart == "polar":
        r, th, R, G = state.vec
        ct, st = np.cos(th), np.sin(th)
        return np.array([
            [ct, -r * st, 0.0, 0.0],
            [st, r * ct, 0.0, 0.0],
            [G * st / r ** 2, -R * st - G * ct / r, ct, -st / r],
            [-G * ct / r ** 2, R * ct - G * st / r, st, ct / r],
        ])
    if chart == "poincare":
        out = np.empty(4)
        jac = np.empty((4, 4))
        status = _k.poin_to_cart_jac(state.vec, out, jac)
        if status != 0:
            raise KeplerError("chart Jacobian undefined")
        return jac
    # scaled = poincare o diag(1, delta^2, delta, delta)
    pz = np.empty(4)
    _k.scaled_to_poin(state.vec, state.mp.delta, pz)
    out = np.empty(4)
    jac = np.empty((4, 4))
    status = _k.poin_to_cart_jac(pz, out, jac)
    if status != 0:
        raise KeplerError("chart Jacobian undefined")
    d = state.mp.delta
    return jac @ np.diag([1.0, d * d, d, d])


def field_id(chart: str) -> int:
    return {"cartesian": _k.FID_CART, "polar": _k.FID_POLAR,
            "poincare": _k.FID_POIN, "scaled": _k.FID_SCALED}[chart]
