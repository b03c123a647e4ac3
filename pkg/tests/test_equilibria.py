import math

import numpy as np
import pytest

from coorbital.charts import MassParam, chart_jacobian, hamiltonian
from coorbital.equilibria import (SQRT218, find_critical_points,
                                  frame_matrices, gradient_norm, locate_L3,
                                  linear_frame)

PEND_BLOCK = np.array([[0.0, -3.0], [-7.0 / 8.0, 0.0]])


@pytest.mark.parametrize("mu", [1e-4, 1e-3, 1e-2])
def test_location_series(mu):
    rec = locate_L3(MassParam(mu))
    assert rec.d_mu > 1.0
    assert abs(rec.d_mu - 1.0 - (5.0 / 12.0) * mu) <= 5.0 * mu ** 3
    assert gradient_norm(rec.cartesian) <= 1e-12


def test_seed_at_zero_mass_limit():
    rec = locate_L3(MassParam(1e-9))
    assert np.allclose(rec.cartesian.vec, [1.0, 0.0, 0.0, 1.0], atol=1e-8)


@pytest.mark.parametrize("mu", [1e-4, 1e-3, 1e-2])
def test_spectrum_series(mu):
    rec = locate_L3(MassParam(mu))
    assert abs(rec.nu_hyp / math.sqrt(mu) - SQRT218) <= 5.0 * mu
    assert abs(rec.nu_ell - 1.0 - (7.0 / 8.0) * mu) <= 5.0 * mu ** 2
    assert abs(np.sum(rec.eigvals)) < 1e-12
    # eigenvalues come in +- pairs
    vals = sorted(rec.eigvals, key=lambda v: (round(v.real, 12), v.imag))
    assert abs(vals[0] + vals[3]) < 1e-10
    assert abs(vals[1] + vals[2]) < 1e-10


def test_scaled_fixed_point_scalings():
    consts_L, consts_x = [], []
    for mu in (1e-4, 1e-3, 1e-2):
        mp = MassParam(mu)
        rec = locate_L3(mp)
        v = rec.scaled.vec
        assert v[0] == pytest.approx(0.0, abs=1e-10)
        assert abs(v[3]) < 1e-12          # real slice of the symmetric point
        consts_L.append(abs(v[1]) / mp.delta ** 2)
        consts_x.append(abs(v[2]) / mp.delta ** 3)
        H = hamiltonian(rec.scaled)
        assert abs(H + 0.5) <= 10.0 * mp.delta ** 4
    # common bound over the grid (the scalings are O(1))
    assert max(consts_L) < 2.0 and min(consts_L) > 0.2
    assert max(consts_x) < 2.0 and min(consts_x) > 0.2


def test_eigvector_orientation_and_reversibility(mp001):
    rec = locate_L3(mp001)
    assert rec.unstable_scaled[0] > 0
    assert rec.stable_scaled[0] > 0
    # the involution differential exchanges stable and unstable directions
    DPhi = np.diag([-1.0, 1.0, 1.0, -1.0])
    v = DPhi @ rec.unstable_scaled
    v /= np.linalg.norm(v)
    assert min(np.linalg.norm(v - rec.stable_scaled),
               np.linalg.norm(v + rec.stable_scaled)) < 1e-10


def test_frame_matrices_identity_and_diagonalization():
    M, Minv = frame_matrices()
    assert np.max(np.abs(M @ Minv - np.eye(4))) < 1e-14
    assert np.max(np.abs(Minv @ M - np.eye(4))) < 1e-14
    nu = SQRT218
    c1, c2 = M[:2, 0].real, M[:2, 1].real
    assert np.max(np.abs(PEND_BLOCK @ c1 - nu * c1)) < 1e-14
    assert np.max(np.abs(PEND_BLOCK @ c2 + nu * c2)) < 1e-14
    # conformally symplectic with the slow-time multiplier sqrt(8/21)
    J2 = np.array([[0.0, 1.0], [-1.0, 0.0]])
    blk = M[:2, :2].real
    factor = (blk.T @ J2 @ blk)[0, 1]
    assert factor == pytest.approx(math.sqrt(8.0 / 21.0), rel=1e-13)


def test_frame_limit_columns():
    rec = locate_L3(MassParam(1e-6))
    M, _ = frame_matrices()
    v = rec.unstable_scaled[:2]
    v = v / v[0] * M[0, 0].real
    assert np.max(np.abs(v - M[:2, 0].real)) < 1e-2
    w = rec.stable_scaled[:2]
    w = w / w[0] * M[0, 1].real
    assert np.max(np.abs(w - M[:2, 1].real)) < 1e-2


def test_potential_curvature_constant():
    from coorbital._kernels import pot_V

    def fd2(h):
        return (pot_V(h) - 2 * pot_V(0.0) + pot_V(-h)) / h ** 2

    # two-level Richardson removes the h^2 and h^4 truncation terms
    def rich(h):
        return (4.0 * fd2(h / 2) - fd2(h)) / 3.0

    d2 = (16.0 * rich(0.01) - rich(0.02)) / 15.0
    assert d2 == pytest.approx(0.875, abs=1e-10)


def test_all_five_critical_points():
    mp = MassParam(0.01)
    pts = find_critical_points(mp)
    assert set(pts) == {"L1", "L2", "L3", "L4", "L5"}
    for name, st in pts.items():
        assert gradient_norm(st) < 1e-11
    # L3 residual minimal among the q1 > 0 collinear candidates
    l3 = pts["L3"]
    assert l3.vec[0] > 1.0
    assert abs(l3.vec[1]) < 1e-14


def test_linear_frame_origin(mp001):
    fr = linear_frame(mp001)
    assert fr.origin.chart == "scaled"
    assert np.max(np.abs(fr.matrix @ fr.inverse - np.eye(4))) < 1e-12
