import numpy as np
import pytest

from simflow.kinematics import (
    IKResult,
    Joint,
    KinematicChain,
    Pose,
    default_chain,
    forward_kinematics,
    jacobian,
    quat_to_matrix,
    solve_ik,
    tool_axis,
)


def fd_jacobian(chain, q, eps=1e-6):
    """Central finite differences of FK: independent oracle for the Jacobian."""
    J = np.zeros((6, 5))
    for k in range(5):
        qp, qm = q.copy(), q.copy()
        qp[k] += eps
        qm[k] -= eps
        pp = forward_kinematics(chain, qp)
        pm = forward_kinematics(chain, qm)
        J[:3, k] = (pp.position - pm.position) / (2 * eps)
        Rd = quat_to_matrix(pp.orientation) @ quat_to_matrix(pm.orientation).T
        J[3:, k] = 0.5 * np.array([Rd[2, 1] - Rd[1, 2],
                                   Rd[0, 2] - Rd[2, 0],
                                   Rd[1, 0] - Rd[0, 1]]) / (2 * eps)
    return J


def random_configs(chain, n, rng, margin=0.08):
    lo, hi = chain.lower, chain.upper
    span = hi - lo
    return lo + span * (margin + (1 - 2 * margin) * rng.uniform(size=(n, 5)))


def test_chain_requires_five_joints():
    c = default_chain()
    with pytest.raises(ValueError):
        KinematicChain(c.joints[:4], c.tip_offset)


def test_pose_rejects_unnormalized_quaternion():
    with pytest.raises(ValueError):
        Pose(np.zeros(3), np.array([1.0, 0.0, 0.1, 0.0]))


def test_fk_zero_config_is_fixed_transform_composition():
    chain = default_chain(fulcrum_height=0.2, wrist_offset=0.015, tip_length=0.02)
    pose = forward_kinematics(chain, np.zeros(5))
    assert np.allclose(pose.position, [0, 0, 0.2 - 0.015 - 0.02], atol=1e-15)
    assert np.allclose(tool_axis(pose), [0, 0, -1], atol=1e-15)


def test_fk_prismatic_translates_along_axis():
    chain = default_chain()
    base = forward_kinematics(chain, np.zeros(5)).position
    q = np.zeros(5)
    q[2] = 0.01
    moved = forward_kinematics(chain, q).position
    # insertion axis at zero config is world (0, 0, -1)
    assert np.allclose(moved - base, [0, 0, -0.01], atol=1e-12)


def test_fk_yaw_pi_mirrors_tip():
    chain = default_chain()
    # exercise the symmetry off-axis: nonzero pitch moves the tip off joint 1's axis
    q = np.zeros(5)
    q[1] = 0.4
    p0 = forward_kinematics(chain, q).position
    q1 = q.copy()
    q1[0] = np.pi
    p1 = forward_kinematics(chain, q1).position
    fulcrum_z = 0.2
    assert np.allclose(p1[:2], -p0[:2], atol=1e-12)
    assert p1[2] == pytest.approx(p0[2], abs=1e-12)
    # spec's literal case: zero config tip lies on the axis, so it maps to itself
    p_zero = forward_kinematics(chain, np.zeros(5)).position
    q_pi = np.zeros(5)
    q_pi[0] = np.pi
    assert np.allclose(forward_kinematics(chain, q_pi).position, p_zero * [ -1, -1, 1], atol=1e-12)
    assert fulcrum_z > 0


def test_fk_rejects_nonfinite():
    with pytest.raises(ValueError):
        forward_kinematics(default_chain(), np.array([0, np.nan, 0, 0, 0]))


def test_jacobian_prismatic_column_has_zero_angular_part():
    chain = default_chain()
    rng = np.random.default_rng(0)
    for q in random_configs(chain, 10, rng):
        J = jacobian(chain, q)
        assert np.array_equal(J[3:, 2], np.zeros(3))


def test_jacobian_insertion_column_at_zero_config():
    chain = default_chain()
    J = jacobian(chain, np.zeros(5))
    assert np.allclose(J[:3, 2], [0, 0, -1], atol=1e-15)


def test_jacobian_matches_finite_differences():
    chain = default_chain()
    rng = np.random.default_rng(123)
    for q in random_configs(chain, 100, rng):
        J = jacobian(chain, q)
        J_fd = fd_jacobian(chain, q)
        assert np.allclose(J, J_fd, atol=1e-5)


def test_ik_fixed_point_returns_immediately():
    chain = default_chain()
    q0 = chain.mid()
    target = forward_kinematics(chain, q0)
    res = solve_ik(chain, q0, target)
    assert res.converged
    assert res.iterations == 0
    assert np.array_equal(res.q, q0)


def test_ik_small_offset_along_tool_axis():
    chain = default_chain()
    q0 = chain.mid()
    pose = forward_kinematics(chain, q0)
    target = Pose(pose.position + 0.005 * tool_axis(pose), pose.orientation)
    res = solve_ik(chain, q0, target)
    assert res.converged
    check = forward_kinematics(chain, res.q)
    assert np.linalg.norm(check.position - target.position) < 1e-4


def test_ik_unreachable_flags_not_converged_and_respects_limits():
    chain = default_chain()
    q0 = chain.mid()
    target = Pose(np.array([0.0, 0.0, -0.5]))  # far beyond max insertion
    res = solve_ik(chain, q0, target, max_iters=60)
    assert not res.converged
    assert np.all(res.q >= chain.lower - 1e-12)
    assert np.all(res.q <= chain.upper + 1e-12)


def test_ik_converges_on_random_workspace_targets():
    chain = default_chain()
    rng = np.random.default_rng(7)
    qs = random_configs(chain, 100, rng)
    q0 = chain.mid()
    ok = 0
    for q_true in qs:
        target = forward_kinematics(chain, q_true)
        res = solve_ik(chain, q0, target)
        if res.converged:
            check = forward_kinematics(chain, res.q)
            assert np.linalg.norm(check.position - target.position) < 1e-3
            ok += 1
    assert ok >= 95


def test_ik_is_deterministic():
    chain = default_chain()
    q0 = chain.mid()
    target = Pose(np.array([0.03, -0.02, 0.05]))
    r1 = solve_ik(chain, q0, target)
    r2 = solve_ik(chain, q0, target)
    assert np.array_equal(r1.q, r2.q)
    assert r1.iterations == r2.iterations
