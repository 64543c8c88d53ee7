import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from motionlab import skeletons
from motionlab.kinematics import (
    AngleNearPiWarning,
    DegenerateBone,
    DimensionMismatch,
    KinematicsError,
    KinematicTree,
    LieMotion,
    LiePose,
    exp_so3,
    fk_motion,
    forward_kinematics,
    hat,
    is_rotation,
    joints_to_lie,
    log_so3,
    relative_to_absolute,
    root_trajectory,
    wrap_to_pi,
)

from oracles import rotation_from_axis_angle


def random_axis_angle(rng, max_norm=np.pi):
    v = rng.normal(size=3)
    v /= np.linalg.norm(v)
    return v * rng.uniform(0, max_norm)


# ---------------------------------------------------------------- hat / exp


def test_hat_zero():
    assert np.array_equal(hat([0, 0, 0]), np.zeros((3, 3)))


def test_hat_layout():
    expected = np.array([[0, -3, 2], [3, 0, -1], [-2, 1, 0]], dtype=float)
    assert np.array_equal(hat([1, 2, 3]), expected)


@given(st.lists(st.floats(-50, 50), min_size=3, max_size=3))
def test_hat_antisymmetric(w):
    m = hat(w)
    assert np.array_equal(m + m.T, np.zeros((3, 3)))


def test_exp_identity():
    assert np.allclose(exp_so3([0, 0, 0]), np.eye(3))


def test_exp_quarter_turn_about_x():
    rot = exp_so3([np.pi / 2, 0, 0])
    assert np.allclose(rot @ [0, 1, 0], [0, 0, 1], atol=1e-12)


def test_exp_matches_quaternion_oracle():
    rng = np.random.default_rng(7)
    for _ in range(200):
        w = random_axis_angle(rng)
        assert np.allclose(exp_so3(w), rotation_from_axis_angle(w), atol=1e-12)


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_exp_output_is_rotation(seed):
    w = random_axis_angle(np.random.default_rng(seed))
    assert is_rotation(exp_so3(w), tol=1e-9)


def test_exp_small_angle_branch_continuous():
    w = np.array([3e-7, -4e-7, 1e-7])
    direct = rotation_from_axis_angle(w)
    assert np.allclose(exp_so3(w), direct, atol=1e-15)


# ---------------------------------------------------------------------- log


def test_log_identity():
    assert np.allclose(log_so3(np.eye(3)), 0.0)


def test_log_exp_roundtrip_unit_norm():
    rng = np.random.default_rng(3)
    for _ in range(100):
        w = random_axis_angle(rng, max_norm=1.0)
        w *= 1.0 / max(np.linalg.norm(w), 1e-12)  # exactly norm 1
        assert np.allclose(log_so3(exp_so3(w)), w, atol=1e-10)


def test_exp_log_roundtrip_below_near_pi():
    rng = np.random.default_rng(11)
    for _ in range(300):
        w = random_axis_angle(rng, max_norm=np.pi - 1.1e-3)
        rot = exp_so3(w)
        assert np.abs(exp_so3(log_so3(rot)) - rot).max() < 1e-8


def test_log_near_pi_warns_and_extracts_axis():
    rot = rotation_from_axis_angle([np.pi, 0, 0])
    with pytest.warns(AngleNearPiWarning):
        w = log_so3(rot)
    assert min(np.linalg.norm(w - [np.pi, 0, 0]), np.linalg.norm(w + [np.pi, 0, 0])) < 1e-6


def test_log_norm_within_pi():
    rng = np.random.default_rng(5)
    for _ in range(100):
        w = random_axis_angle(rng, max_norm=np.pi - 2e-3)
        assert np.linalg.norm(log_so3(exp_so3(w))) <= np.pi


def test_wrap_to_pi():
    w = np.array([[0.0, 0.0, 4.0], [0.1, 0.0, 0.0]])
    wrapped, count = wrap_to_pi(w)
    assert count == 1
    assert np.allclose(wrapped[1], w[1])
    assert np.linalg.norm(wrapped[0]) <= np.pi
    # same rotation after wrapping
    assert np.allclose(exp_so3(wrapped[0]), exp_so3(w[0]), atol=1e-12)


# ----------------------------------------------------------------- FK trees


def chain_tree(lengths):
    n = len(lengths) + 1
    return KinematicTree(
        joint_names=[f"j{i}" for i in range(n)],
        parents=[-1] + list(range(n - 1)),
        chains=[list(range(n))],
        bone_lengths=[0.0] + list(lengths),
    )


def test_fk_single_bone_rest():
    tree = chain_tree([0.7])
    pose = LiePose(np.zeros(3), np.zeros(3), np.zeros((1, 3)))
    joints = forward_kinematics(tree, pose)
    assert np.allclose(joints, [[0, 0, 0], [0.7, 0, 0]])


def test_fk_two_bone_elbow():
    tree = chain_tree([1.0, 1.0])
    lie = np.array([[0.0, 0.0, 0.0], [0.0, 0.0, np.pi / 2]])
    joints = forward_kinematics(tree, LiePose(np.zeros(3), np.zeros(3), lie))
    # hand-composed matrix chain: second bone turned 90 deg in the xy plane
    assert np.allclose(joints[1], [1, 0, 0], atol=1e-12)
    assert np.allclose(joints[2], [1, 1, 0], atol=1e-12)


def test_fk_zero_bone_lengths_collapse_to_root():
    tree = chain_tree([1.0, 1.0])
    rng = np.random.default_rng(0)
    motion = LieMotion(
        lie=rng.normal(size=(2, 2, 3)).clip(-1, 1),
        root_orientations=np.zeros((2, 3)),
        root_positions=np.array([[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]]),
        bone_lengths=np.zeros(3),
    )
    joints = fk_motion(tree, motion)
    for t in range(2):
        assert np.allclose(joints[t], motion.root_positions[t])


def test_fk_dimension_mismatch():
    tree = chain_tree([1.0, 1.0])
    with pytest.raises(DimensionMismatch):
        forward_kinematics(tree, LiePose(np.zeros(3), np.zeros(3), np.zeros((5, 3))))


@pytest.mark.parametrize("preset", ["toy8", "ntu18", "cmu22", "smpl24"])
def test_fk_preserves_bone_lengths(preset):
    tree = skeletons.preset(preset)
    rng = np.random.default_rng(42)
    for _ in range(50):
        lie = np.stack([random_axis_angle(rng) for _ in range(tree.n_bones)])
        pose = LiePose(random_axis_angle(rng), rng.normal(size=3), lie)
        joints = forward_kinematics(tree, pose)
        for j in tree.bone_joints:
            d = np.linalg.norm(joints[j] - joints[tree.parents[j]])
            assert abs(d - tree.bone_lengths[j]) < 1e-9


def test_fk_root_translation_equivariance():
    tree = skeletons.preset("toy8")
    rng = np.random.default_rng(1)
    lie = np.stack([random_axis_angle(rng) for _ in range(tree.n_bones)])
    shift = np.array([0.3, -1.2, 2.5])
    a = forward_kinematics(tree, LiePose(np.zeros(3), np.zeros(3), lie))
    b = forward_kinematics(tree, LiePose(np.zeros(3), shift, lie))
    assert np.allclose(b, a + shift, atol=1e-12)


def test_fk_root_orientation_premultiplies():
    tree = skeletons.preset("toy8")
    rng = np.random.default_rng(2)
    lie = np.stack([random_axis_angle(rng) for _ in range(tree.n_bones)])
    w0 = random_axis_angle(rng)
    plain = forward_kinematics(tree, LiePose(np.zeros(3), np.zeros(3), lie))
    turned = forward_kinematics(tree, LiePose(w0, np.zeros(3), lie))
    assert np.allclose(turned, plain @ exp_so3(w0).T, atol=1e-12)


# -------------------------------------------------------------- inverse map


def twist_free_pose(tree, rng, max_norm=0.9 * np.pi):
    """Random pose whose vectors have zero local-x component (no twist)."""
    lie = np.zeros((tree.n_bones, 3))
    for i in range(tree.n_bones):
        axis = np.array([0.0, rng.normal(), rng.normal()])
        axis /= np.linalg.norm(axis)
        lie[i] = axis * rng.uniform(0, max_norm)
    return LiePose(np.zeros(3), rng.normal(size=3), lie)


def test_joints_to_lie_straight_chain():
    tree = chain_tree([1.0, 2.0, 0.5])
    joints = np.array([[0, 0, 0], [1, 0, 0], [3, 0, 0], [3.5, 0, 0]], dtype=float)
    motion = joints_to_lie(tree, joints[None])
    assert np.allclose(motion.lie, 0.0)
    assert np.allclose(motion.bone_lengths, [0, 1, 2, 0.5])


def test_joints_to_lie_right_angle_bend():
    tree = chain_tree([1.0, 1.0])
    joints = np.array([[0, 0, 0], [1, 0, 0], [1, 1, 0]], dtype=float)
    motion = joints_to_lie(tree, joints[None])
    assert np.allclose(motion.lie[0, 0], 0.0, atol=1e-12)
    assert np.allclose(np.abs(motion.lie[0, 1]), [0, 0, np.pi / 2], atol=1e-12)


@pytest.mark.parametrize("preset", ["toy8", "smpl24"])
def test_joints_to_lie_fk_roundtrip(preset):
    tree = skeletons.preset(preset)
    rng = np.random.default_rng(9)
    for _ in range(10):
        pose = twist_free_pose(tree, rng)
        joints = forward_kinematics(tree, pose)
        motion = joints_to_lie(tree, joints[None])
        assert np.abs(motion.lie[0] - pose.lie).max() < 1e-6
        rebuilt = fk_motion(tree, motion)
        assert np.abs(rebuilt[0] - joints).max() < 1e-6


def test_joints_to_lie_degenerate_bone():
    tree = chain_tree([1.0])
    joints = np.zeros((3, 2, 3))  # both joints coincide in every frame
    with pytest.raises(DegenerateBone):
        joints_to_lie(tree, joints)


def test_joints_to_lie_mean_bone_lengths():
    tree = chain_tree([1.0])
    joints = np.array(
        [[[0, 0, 0], [0.9, 0, 0]], [[0, 0, 0], [1.1, 0, 0]]], dtype=float
    )
    motion = joints_to_lie(tree, joints)
    assert np.isclose(motion.bone_lengths[1], 1.0)


# ------------------------------------------------------------- trajectories


def toy_motion(root_positions):
    root_positions = np.asarray(root_positions, dtype=float)
    t = len(root_positions)
    return LieMotion(
        lie=np.zeros((t, 1, 3)),
        root_orientations=np.zeros((t, 3)),
        root_positions=root_positions,
        bone_lengths=np.array([0.0, 1.0]),
    )


def test_root_trajectory_constant_root():
    motion = toy_motion(np.tile([1.0, 2.0, 3.0], (4, 1)))
    assert np.allclose(root_trajectory(motion, "relative"), 0.0)


def test_root_trajectory_differencing():
    motion = toy_motion([[0, 0, 0], [1, 0, 0], [3, 0, 0]])
    rel = root_trajectory(motion, "relative")
    assert np.allclose(rel, [[0, 0, 0], [1, 0, 0], [2, 0, 0]])


def test_root_trajectory_modes_invertible():
    rng = np.random.default_rng(4)
    absolute = rng.normal(size=(6, 3))
    motion = toy_motion(absolute)
    rel = root_trajectory(motion, "relative")
    rebuilt = relative_to_absolute(rel, absolute[0])
    assert np.allclose(rebuilt, absolute, atol=1e-12)


# ------------------------------------------------------------------- types


def test_lie_pose_rejects_over_pi_norm():
    with pytest.raises(KinematicsError):
        LiePose(np.zeros(3), np.zeros(3), np.array([[0.0, 0.0, 3.5]]))


def test_tree_validation_catches_bad_chains():
    with pytest.raises(KinematicsError):
        KinematicTree(
            joint_names=["a", "b", "c"],
            parents=[-1, 0, 1],
            chains=[[0, 1]],  # joint 2 not covered
            bone_lengths=[0.0, 1.0, 1.0],
        )
    with pytest.raises(KinematicsError):
        KinematicTree(
            joint_names=["a", "b"],
            parents=[-1, 0],
            chains=[[0, 1]],
            bone_lengths=[0.0, -1.0],
        )


def test_skeleton_json_roundtrip(tmp_path):
    tree = skeletons.preset("ntu18")
    path = tmp_path / "skel.json"
    skeletons.save_skeleton(tree, path)
    loaded = skeletons.load_skeleton(path)
    assert loaded == tree
    assert loaded.spec_hash() == tree.spec_hash()


@pytest.mark.parametrize(
    "preset,joints", [("ntu18", 18), ("cmu22", 22), ("smpl24", 24), ("toy8", 8)]
)
def test_preset_sizes(preset, joints):
    tree = skeletons.preset(preset)
    assert tree.n_joints == joints
    assert len(tree.chains) == 5
