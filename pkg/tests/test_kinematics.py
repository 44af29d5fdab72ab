import numpy as np
import pytest

from tlfem.elements import Tet10Basis, build_basis_beam3243, tet10_nodes_from_corners
from tlfem.kinematics import (
    DeformationPoint,
    ElementState,
    deformation_gradient,
    deformation_point,
    strain_measures,
    strain_rate,
    velocity_gradient,
)


def random_rotation(rng):
    Q, R = np.linalg.qr(rng.standard_normal((3, 3)))
    Q = Q * np.sign(np.diag(R))
    if np.linalg.det(Q) < 0:
        Q[:, 0] = -Q[:, 0]
    return Q


@pytest.fixture(scope="module")
def beam():
    return build_basis_beam3243((0.4, 0.02, 0.02))


@pytest.fixture(scope="module")
def tet():
    return Tet10Basis(tet10_nodes_from_corners(
        [(0, 0, 0), (0.2, 0, 0), (0, 0.2, 0), (0, 0, 0.2)]))


def test_identity_at_reference(beam, tet):
    for basis in (beam, tet):
        N = basis.reference_nodal_matrix()
        for pt in basis.quadrature().points:
            F = deformation_gradient(N, basis.ref_gradients(pt))
            np.testing.assert_allclose(F, np.eye(3), atol=1e-10)


def test_f_matches_summation_oracle(beam):
    rng = np.random.default_rng(0)
    N = rng.standard_normal((3, 8))
    H = beam.ref_gradients((0.13, 0.004, -0.007))
    F = deformation_gradient(N, H)
    F_sum = np.zeros((3, 3))
    for i in range(8):
        F_sum += np.outer(N[:, i], H[i])
    np.testing.assert_allclose(F, F_sum, rtol=1e-14)


def test_rigid_rotation_zero_strain(beam):
    rng = np.random.default_rng(1)
    R = random_rotation(rng)
    N = R @ beam.reference_nodal_matrix()
    H = beam.ref_gradients((0.2, 0.0, 0.0))
    F = deformation_gradient(N, H)
    C, E, J = strain_measures(F)
    np.testing.assert_allclose(F, R, atol=1e-10)
    np.testing.assert_allclose(E, 0.0, atol=1e-10)
    assert abs(J - 1.0) < 1e-10


def test_strain_measures_random():
    rng = np.random.default_rng(2)
    F = np.eye(3) + 0.3 * rng.standard_normal((3, 3))
    C, E, J = strain_measures(F)
    np.testing.assert_allclose(C, F.T @ F, rtol=1e-14)
    np.testing.assert_allclose(E, 0.5 * (F.T @ F - np.eye(3)), rtol=1e-13, atol=1e-15)
    assert abs(J - np.linalg.det(F)) < 1e-12
    assert np.abs(E - E.T).max() < 1e-15


def test_strain_rate_fd(beam):
    rng = np.random.default_rng(3)
    N0 = beam.reference_nodal_matrix() + 0.01 * rng.standard_normal((3, 8))
    Nd = rng.standard_normal((3, 8))
    H = beam.ref_gradients((0.1, 0.005, 0.003))
    F = deformation_gradient(N0, H)
    F_dot = velocity_gradient(Nd, H)
    E_dot = strain_rate(F, F_dot)
    dt = 1e-7
    _, Ep, _ = strain_measures(deformation_gradient(N0 + dt * Nd, H))
    _, Em, _ = strain_measures(deformation_gradient(N0 - dt * Nd, H))
    np.testing.assert_allclose(E_dot, (Ep - Em) / (2 * dt), atol=1e-7)
    assert np.abs(E_dot - E_dot.T).max() < 1e-15


def test_deformation_point_bundle(beam):
    rng = np.random.default_rng(4)
    N = beam.reference_nodal_matrix() + 0.02 * rng.standard_normal((3, 8))
    Nd = 0.5 * rng.standard_normal((3, 8))
    state = ElementState(N=N, N_dot=Nd, dof_map=np.arange(8))
    H = beam.ref_gradients((0.3, 0.0, 0.0))
    dp = deformation_point(state, H)
    assert isinstance(dp, DeformationPoint)
    np.testing.assert_allclose(dp.F, N @ H, rtol=1e-14)
    np.testing.assert_allclose(dp.E, 0.5 * (dp.F.T @ dp.F - np.eye(3)), atol=1e-14)
    np.testing.assert_allclose(dp.E_dot, strain_rate(dp.F, Nd @ H), rtol=1e-13)
    assert dp.J == pytest.approx(np.linalg.det(dp.F), rel=1e-12)


class TestElementStateValidation:
    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            ElementState(N=np.zeros((3, 8)), N_dot=np.zeros((3, 7)), dof_map=np.arange(8))

    def test_duplicate_dofs(self):
        with pytest.raises(ValueError):
            ElementState(N=np.zeros((3, 4)), N_dot=np.zeros((3, 4)),
                         dof_map=np.array([0, 1, 1, 2]))
