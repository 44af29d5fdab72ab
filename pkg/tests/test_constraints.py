import numpy as np
import pytest

from tlfem import constraints as cn
from tlfem.assembly import System, make_beam_body, make_single_tet10_body
from tlfem.errors import ConstructionError
from tlfem.materials import Material, MooneyRivlinParams, SvkParams

MAT = Material(SvkParams(3.0e6, 1.0e6))
MR = Material(MooneyRivlinParams(2.0e5, 5.0e4, 1.0e6))


@pytest.fixture(scope="module")
def system():
    return System([
        make_beam_body("a", MAT, 1200.0, 0.5, 0.02, 0.02, n_elements=2),
        make_single_tet10_body("t", MR, 950.0,
                               [(1, 0, 0), (1.1, 0, 0), (1, 0.1, 0), (1, 0, 0.1)]),
    ])


def perturbed(system, rng, amp=0.05):
    return system.reference_state() + amp * rng.standard_normal(system.n_dof)


class TestEvalPoint:
    def test_t10_node_kronecker(self, system):
        rng = np.random.default_rng(0)
        q = perturbed(system, rng)
        att = cn.attach(system, "t", 0, (1.0, 0.0, 0.0))  # parent node 1
        tet = system.body_by_id["t"]
        np.testing.assert_allclose(cn.eval_point(q, att),
                                   q.reshape(-1, 3)[tet.block_offset + 1], rtol=1e-14)

    def test_reference_location(self, system):
        q0 = system.reference_state()
        att = cn.attach(system, "a", 1, (0.2, 0.0, 0.0))
        np.testing.assert_allclose(cn.eval_point(q0, att), [0.45, 0, 0], atol=1e-12)

    def test_summation_oracle(self, system):
        rng = np.random.default_rng(1)
        q = perturbed(system, rng)
        att = cn.attach(system, "a", 0, (0.17, 0.004, -0.003))
        r = np.zeros(3)
        for i, blk in enumerate(att.dof_map):
            r += att.s[i] * q.reshape(-1, 3)[blk]
        np.testing.assert_allclose(cn.eval_point(q, att), r, rtol=1e-13)


class TestResiduals:
    def test_dp1_orthogonal(self, system):
        q0 = system.reference_state()
        P = cn.world_point((0, 0, 0)); Q = cn.world_point((1, 0, 0))
        R = cn.world_point((0, 0, 0)); T = cn.world_point((0, 1, 0))
        c = cn.dp1(P, Q, R, T, f=0.0)
        assert c.residual(q0.reshape(-1, 3), 0.0) == 0.0

    def test_dist_at_target(self):
        P = cn.world_point((0, 0, 0)); Q = cn.world_point((2, 0, 0))
        c = cn.dist(P, Q, f=2.0)
        assert c.residual(np.zeros((1, 3)), 0.0) == 0.0

    def test_cd_component(self):
        P = cn.world_point((0, 0, 0)); Q = cn.world_point((3, 1, 4))
        c = cn.cd("x", P, Q, f=3.0)
        assert c.residual(np.zeros((1, 3)), 0.0) == 0.0


@pytest.mark.parametrize("kind", ["dp1", "dp2", "dist", "cd"])
def test_jacobian_matches_fd(system, kind):
    rng = np.random.default_rng(2)
    P = cn.attach(system, "a", 0, (0.0, 0.0, 0.0))
    Q = cn.attach(system, "a", 1, (0.2, 0.005, 0.0))
    R = cn.attach(system, "t", 0, (0.2, 0.2, 0.2))
    T = cn.world_point((0.3, 0.1, 0.2))
    if kind in ("dp1", "dp2"):
        prim = getattr(cn, kind)(P, Q, R, T, f=0.1)
    elif kind == "dist":
        prim = cn.dist(P, Q, f=0.3)
    else:
        prim = cn.cd("y", P, Q, f=0.05)
    cs = cn.ConstraintSet([prim], system.n_dof, rho=1.0)
    eps = 1e-6
    for _ in range(20):
        q = perturbed(system, rng)
        J = cs.jacobian(q, 0.0).toarray()[0]
        d = rng.standard_normal(system.n_dof)
        fd = (cs.residuals(q + eps * d, 0.0)[0] - cs.residuals(q - eps * d, 0.0)[0]) / (2 * eps)
        an = float(J @ d)
        assert abs(fd - an) / max(1.0, abs(an)) < 1e-6


def test_cd_blocks_independent_of_q(system):
    rng = np.random.default_rng(3)
    P = cn.attach(system, "a", 0, (0.0, 0.0, 0.0))
    Q = cn.attach(system, "a", 1, (0.2, 0.0, 0.0))
    cs = cn.ConstraintSet([cn.cd("z", P, Q)], system.n_dof, rho=1.0)
    J1 = cs.jacobian(perturbed(system, rng), 0.0).toarray()
    J2 = cs.jacobian(perturbed(system, rng), 0.0).toarray()
    np.testing.assert_array_equal(J1, J2)


def test_dist_coincident_zero_rows(system):
    # degenerate configuration: Jacobian vanishes (documented behavior)
    P = cn.attach(system, "a", 0, (0.1, 0.0, 0.0))
    Q = cn.attach(system, "a", 0, (0.1, 0.0, 0.0))
    cs = cn.ConstraintSet([cn.dist(P, Q, f=1.0)], system.n_dof, rho=1.0)
    q0 = system.reference_state()
    assert np.abs(cs.jacobian(q0, 0.0).toarray()).max() == 0.0


class TestApplyTerm:
    def test_satisfied_no_change(self, system):
        q0 = system.reference_state()
        P = cn.attach(system, "a", 0, (0.0, 0.0, 0.0))
        cs = cn.ConstraintSet([cn.cd("x", cn.world_point((0, 0, 0)), P, f=0.0)],
                              system.n_dof, rho=10.0)
        out = np.zeros(system.n_dof)
        cs.apply_constraint_term(q0, 0.0, out)
        assert np.abs(out).max() == 0.0

    def test_single_cd_hand_scatter(self, system):
        q0 = system.reference_state()
        P = cn.attach(system, "a", 1, (0.2, 0.0, 0.0))
        cs = cn.ConstraintSet([cn.cd("z", cn.world_point((0, 0, 0)), P)],
                              system.n_dof, rho=1.0)
        out = np.zeros(system.n_dof)
        cs.apply_constraint_term(q0, 0.0, out, mults=np.array([1.0]))
        # hand scatter: +s_i * e_z on each of P's blocks
        expect = np.zeros(system.n_dof)
        expect.reshape(-1, 3)[P.dof_map, 2] = P.s
        np.testing.assert_allclose(out, expect, atol=1e-14)

    def test_rho_linearity(self, system):
        rng = np.random.default_rng(4)
        q = perturbed(system, rng)
        P = cn.attach(system, "a", 0, (0.0, 0.0, 0.0))
        Q = cn.attach(system, "a", 1, (0.2, 0.0, 0.0))
        prim = [cn.dist(P, Q, f=0.3)]
        out1 = np.zeros(system.n_dof)
        cn.ConstraintSet(prim, system.n_dof, rho=7.0).apply_constraint_term(q, 0.0, out1)
        out2 = np.zeros(system.n_dof)
        cn.ConstraintSet(prim, system.n_dof, rho=14.0).apply_constraint_term(q, 0.0, out2)
        np.testing.assert_allclose(out2, 2.0 * out1, rtol=1e-12)


class TestMultipliers:
    def test_zero_residual_no_change(self, system):
        cs = cn.ConstraintSet([cn.cd("x", cn.world_point((0, 0, 0)),
                                     cn.world_point((0, 0, 0)))], system.n_dof, rho=10.0)
        cs.update_multipliers(np.zeros(1))
        assert cs.lam[0] == 0.0

    def test_arithmetic(self, system):
        cs = cn.ConstraintSet([cn.cd("x", cn.world_point((0, 0, 0)),
                                     cn.world_point((0, 0, 0)))], system.n_dof, rho=10.0)
        cs.update_multipliers(np.array([0.01]))
        assert cs.lam[0] == pytest.approx(0.1)

    def test_penalty_escalation_cap(self, system):
        cs = cn.ConstraintSet([cn.cd("x", cn.world_point((0, 0, 0)),
                                     cn.world_point((0, 0, 0)))], system.n_dof, rho=1.0)
        for _ in range(10):
            cs.scale_penalty(10.0, cap=1e4)
        assert cs.rho[0] == pytest.approx(1e4)


class TestJoints:
    def test_composition_counts(self, system):
        q0 = system.reference_state()
        P = cn.attach(system, "a", 0, (0.0, 0.0, 0.0))
        W = cn.world_point((0, 0, 0))
        axis = (cn.attach(system, "a", 0, (0.0, 0.0, 0.0)),
                cn.attach(system, "a", 0, (0.25, 0.0, 0.0)))
        b1 = (cn.world_point((0, 0, 0)), cn.world_point((0, 1, 0)))
        b2 = (cn.world_point((0, 0, 0)), cn.world_point((0, 0, 1)))
        sph = cn.make_joint("spherical", P, W)
        assert len(sph) == 3
        assert all(p.kind is cn.PrimitiveKind.CD for p in sph)
        assert all(p.f(0.0) == 0.0 for p in sph)
        rev = cn.make_joint("revolute", P, W, axis_pairs=[(axis, b1), (axis, b2)],
                            q_ref=q0)
        assert len(rev) == 5
        fix = cn.make_joint("fixed", P, W,
                            axis_pairs=[(axis, b1), (axis, b2), (b1, b2)], q_ref=q0)
        assert len(fix) == 6

    def test_degenerate_axis_rejected(self, system):
        q0 = system.reference_state()
        P = cn.attach(system, "a", 0, (0.0, 0.0, 0.0))
        W = cn.world_point((0, 0, 0))
        zero_pair = (P, cn.attach(system, "a", 0, (0.0, 0.0, 0.0)))
        good = (cn.world_point((0, 0, 0)), cn.world_point((0, 1, 0)))
        with pytest.raises(ConstructionError):
            cn.make_joint("revolute", P, W, axis_pairs=[(zero_pair, good),
                                                        (good, good)], q_ref=q0)

    def test_dist_zero_target_rejected(self, system):
        P = cn.attach(system, "a", 0, (0.0, 0.0, 0.0))
        Q = cn.attach(system, "a", 1, (0.2, 0.0, 0.0))
        with pytest.raises(ConstructionError):
            cn.dist(P, Q, f=0.0)


def test_rheonomic_ramp(system):
    # a time-dependent target: residual tracks f(t) exactly at fixed q
    q0 = system.reference_state()
    P = cn.world_point((0, 0, 0))
    Q = cn.attach(system, "a", 0, (0.0, 0.0, 0.0))
    prim = cn.cd("x", P, Q, f=lambda t: 0.5 * t)
    cs = cn.ConstraintSet([prim], system.n_dof, rho=1.0)
    assert cs.residuals(q0, 0.0)[0] == pytest.approx(0.0)
    assert cs.residuals(q0, 2.0)[0] == pytest.approx(-1.0)
