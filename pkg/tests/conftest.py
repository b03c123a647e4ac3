"""Shared fixtures; the expensive sweeps are session-scoped so the module
tests and the acceptance suite reuse one computation."""

import numpy as np
import pytest
from dataclasses import replace

from coorbital.charts import MassParam
from coorbital.flow import DEFAULT_FLOW

MU_GRID_12 = list(np.geomspace(0.002, 0.02, 12))
SWEEP_CFG = replace(DEFAULT_FLOW, energy_drift_bound=None)


@pytest.fixture(scope="session")
def mp001():
    return MassParam(0.01)


@pytest.fixture(scope="session")
def sigma0_sweep():
    from coorbital.manifolds1d import splitting_distance
    return [splitting_distance(MassParam(mu), "sigma0", config=SWEEP_CFG)
            for mu in MU_GRID_12]


@pytest.fixture(scope="session")
def sigma0_fit(sigma0_sweep):
    from coorbital.manifolds1d import fit_theta_A
    return fit_theta_A(sigma0_sweep)


@pytest.fixture(scope="session")
def lyapunov_pair(mp001):
    from coorbital.lyapunov import solve_orbit_fourier, solve_orbit_shooting
    orb = solve_orbit_fourier(0.05, mp001)
    sh = solve_orbit_shooting(mp001, rho=0.05)
    return orb, sh


@pytest.fixture(scope="session")
def tangency_report(mp001):
    from coorbital.manifolds2d import find_tangency
    return find_tangency(mp001, n_tau=96)


@pytest.fixture(scope="session")
def reconnect_roots():
    from coorbital.reconnect import find_mu_sequence
    return find_mu_sequence(0.0015, 0.02, 400, mu_tol=1e-10)
