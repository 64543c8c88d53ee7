"""Lie-algebraic skeletal kinematics.

Poses are represented per bone by axis-angle vectors of so(3); joint world
positions follow by chaining exponential maps down the kinematic tree with
fixed bone-length translations along the local +x axis. A motion decomposes
into per-frame Lie vectors, a root trajectory, and one set of bone lengths.

All angles are radians, all positions meters. Every public type is
value-semantic and immutable after construction; operations are pure.
"""

import hashlib
import json
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import backends


class KinematicsError(ValueError):
    pass


class DimensionMismatch(KinematicsError):
    pass


class DegenerateBone(KinematicsError):
    """Consecutive joints coincide in every frame; no bone direction exists."""


class AngleNearPiWarning(UserWarning):
    """log_so3 input is within 1e-3 of a half-turn; the returned vector comes
    from the axis-extraction branch and is low-precision."""


NEAR_PI_MARGIN = 1e-3


def hat(w):
    """Axis-angle 3-vector -> 3x3 skew-symmetric matrix."""
    w = np.asarray(w, dtype=np.float64)
    if w.shape != (3,):
        raise DimensionMismatch(f"expected a 3-vector, got shape {w.shape}")
    return np.array(
        [
            [0.0, -w[2], w[1]],
            [w[2], 0.0, -w[0]],
            [-w[1], w[0], 0.0],
        ]
    )


def exp_so3(w):
    """Rodrigues exponential map so(3) -> SO(3)."""
    w = np.asarray(w, dtype=np.float64)
    if w.shape != (3,):
        raise DimensionMismatch(f"expected a 3-vector, got shape {w.shape}")
    return backends.exp_batch(w[None])[0]


def log_so3(rot):
    """Logarithm map SO(3) -> so(3); returned norm lies in [0, pi].

    Within 1e-3 of a half-turn the antisymmetric part degenerates, so the
    axis is extracted from R + I instead; that branch is accurate only to
    roughly the margin and is flagged with :class:`AngleNearPiWarning`.
    The axis sign is arbitrary at exactly pi.
    """
    rot = np.asarray(rot, dtype=np.float64)
    if rot.shape != (3, 3):
        raise DimensionMismatch(f"expected a 3x3 matrix, got shape {rot.shape}")
    cos_theta = np.clip((np.trace(rot) - 1.0) / 2.0, -1.0, 1.0)
    theta = np.arccos(cos_theta)
    anti = np.array(
        [rot[2, 1] - rot[1, 2], rot[0, 2] - rot[2, 0], rot[1, 0] - rot[0, 1]]
    )
    if theta < 1e-6:
        # log(R) ~ (R - R^T)/2 with a second-order angle correction
        return 0.5 * (1.0 + theta * theta / 6.0) * anti
    if np.pi - theta < NEAR_PI_MARGIN:
        warnings.warn(
            "rotation angle within 1e-3 of pi; axis extracted from R + I "
            "is low-precision",
            AngleNearPiWarning,
            stacklevel=2,
        )
        sym = rot + np.eye(3)
        col = np.argmax(np.linalg.norm(sym, axis=0))
        axis = sym[:, col]
        return theta * axis / np.linalg.norm(axis)
    return theta / (2.0 * np.sin(theta)) * anti


def is_rotation(m, tol=1e-9):
    """Check the SO(3) invariants: orthonormal columns, determinant +1."""
    m = np.asarray(m)
    return (
        m.shape == (3, 3)
        and np.abs(m.T @ m - np.eye(3)).max() <= tol
        and abs(np.linalg.det(m) - 1.0) <= tol
    )


def wrap_to_pi(w):
    """Wrap axis-angle vectors to norm <= pi without changing the rotation.

    Accepts (..., 3); returns (wrapped, count) where count is the number of
    vectors whose norm exceeded pi.
    """
    w = np.asarray(w, dtype=np.float64)
    theta = np.linalg.norm(w, axis=-1)
    over = theta > np.pi
    count = int(np.count_nonzero(over))
    if count == 0:
        return w.copy(), 0
    wrapped_theta = np.mod(theta + np.pi, 2.0 * np.pi) - np.pi
    scale = np.where(over, wrapped_theta / np.where(theta == 0, 1.0, theta), 1.0)
    return w * scale[..., None], count


def _frozen(arr):
    arr = np.ascontiguousarray(arr)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class KinematicTree:
    """Skeleton topology: joints, parent map, ordered chains, bone lengths.

    ``bone_lengths`` is indexed by the bone's child joint; the root entry is
    unused and must be 0. Chains start at the root or at a joint already
    covered by an earlier chain, and together cover every non-root joint.
    """

    joint_names: tuple
    parents: tuple
    chains: tuple
    bone_lengths: np.ndarray
    root_index: int = 0
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "joint_names", tuple(self.joint_names))
        object.__setattr__(self, "parents", tuple(int(p) for p in self.parents))
        object.__setattr__(
            self, "chains", tuple(tuple(int(j) for j in c) for c in self.chains)
        )
        lengths = np.asarray(self.bone_lengths, dtype=np.float64)
        n = len(self.joint_names)
        if lengths.shape != (n,):
            raise DimensionMismatch(
                f"bone_lengths shape {lengths.shape} != ({n},)"
            )
        object.__setattr__(self, "bone_lengths", _frozen(lengths))
        self._validate()

    def _validate(self):
        n = self.n_joints
        if len(self.parents) != n:
            raise KinematicsError("parents length mismatch")
        if self.parents[self.root_index] != -1:
            raise KinematicsError("root joint must have parent -1")
        covered = {self.root_index}
        seen_non_root = set()
        for chain in self.chains:
            if chain[0] not in covered:
                raise KinematicsError(
                    f"chain start {chain[0]} not root or previously covered"
                )
            for prev, cur in zip(chain, chain[1:]):
                if self.parents[cur] != prev:
                    raise KinematicsError(
                        f"chain edge {prev}->{cur} contradicts parent map"
                    )
                if cur in seen_non_root:
                    raise KinematicsError(f"joint {cur} appears in two chains")
                seen_non_root.add(cur)
                covered.add(cur)
        if seen_non_root != set(range(n)) - {self.root_index}:
            raise KinematicsError("chains do not partition the non-root joints")
        non_root = [j for j in range(n) if j != self.root_index]
        if not (self.bone_lengths[non_root] > 0).all():
            raise KinematicsError("bone lengths must be positive")
        if self.bone_lengths[self.root_index] != 0.0:
            raise KinematicsError("root bone-length slot must be 0")

    @property
    def n_joints(self):
        return len(self.joint_names)

    @property
    def n_bones(self):
        return self.n_joints - 1

    @property
    def bone_joints(self):
        """Non-root joint indices in index order; bone b ends at bone_joints[b]."""
        return tuple(j for j in range(self.n_joints) if j != self.root_index)

    @property
    def topo_order(self):
        """Joint evaluation order: root, then chains front to back."""
        order = [self.root_index]
        for chain in self.chains:
            order.extend(chain[1:])
        return np.asarray(order, dtype=np.int64)

    @property
    def parent_array(self):
        return np.asarray(self.parents, dtype=np.int64)

    def to_dict(self):
        return {
            "name": self.name,
            "joint_names": list(self.joint_names),
            "parents": list(self.parents),
            "chains": [list(c) for c in self.chains],
            "bone_lengths": [float(b) for b in self.bone_lengths],
            "root_index": self.root_index,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            joint_names=d["joint_names"],
            parents=d["parents"],
            chains=d["chains"],
            bone_lengths=d["bone_lengths"],
            root_index=d.get("root_index", 0),
            name=d.get("name", ""),
        )

    def spec_hash(self):
        payload = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(payload).hexdigest()

    def __eq__(self, other):
        if not isinstance(other, KinematicTree):
            return NotImplemented
        return self.to_dict() == other.to_dict()

    def __hash__(self):
        return hash(self.spec_hash())

    def with_bone_lengths(self, lengths):
        d = self.to_dict()
        d["bone_lengths"] = [float(b) for b in np.asarray(lengths)]
        return KinematicTree.from_dict(d)


@dataclass(frozen=True, eq=False)
class LiePose:
    """Single-frame pose: root orientation/position plus one so(3) vector
    per bone (ordered by the bone's child joint index)."""

    root_orientation: np.ndarray
    root_position: np.ndarray
    lie: np.ndarray

    def __post_init__(self):
        ori = np.asarray(self.root_orientation, dtype=np.float64)
        pos = np.asarray(self.root_position, dtype=np.float64)
        lie = np.asarray(self.lie, dtype=np.float64)
        if ori.shape != (3,) or pos.shape != (3,):
            raise DimensionMismatch("root orientation/position must be 3-vectors")
        if lie.ndim != 2 or lie.shape[1] != 3:
            raise DimensionMismatch(f"lie block must be (N, 3), got {lie.shape}")
        norms = np.linalg.norm(lie, axis=-1)
        if norms.max(initial=0.0) > np.pi + 1e-9:
            raise KinematicsError(
                f"lie vector norm {norms.max():.6f} exceeds pi; wrap_to_pi first"
            )
        object.__setattr__(self, "root_orientation", _frozen(ori))
        object.__setattr__(self, "root_position", _frozen(pos))
        object.__setattr__(self, "lie", _frozen(lie))

    @property
    def n_bones(self):
        return self.lie.shape[0]


@dataclass(frozen=True, eq=False)
class LieMotion:
    """Motion as per-frame Lie vectors + root trajectory + bone lengths.

    ``root_positions`` is interpreted per ``root_trajectory_mode``:
    absolute locations, or per-frame displacements whose first entry is zero
    (absolute positions then reconstruct from the origin).
    """

    lie: np.ndarray  # (T, N, 3)
    root_orientations: np.ndarray  # (T, 3)
    root_positions: np.ndarray  # (T, 3)
    bone_lengths: np.ndarray  # (J,) indexed by child joint, root slot 0
    root_trajectory_mode: str = "absolute"

    def __post_init__(self):
        lie = np.asarray(self.lie, dtype=np.float64)
        ori = np.asarray(self.root_orientations, dtype=np.float64)
        pos = np.asarray(self.root_positions, dtype=np.float64)
        lengths = np.asarray(self.bone_lengths, dtype=np.float64)
        if lie.ndim != 3 or lie.shape[2] != 3:
            raise DimensionMismatch(f"lie block must be (T, N, 3), got {lie.shape}")
        t = lie.shape[0]
        if t < 1:
            raise KinematicsError("a motion needs at least one frame")
        if ori.shape != (t, 3) or pos.shape != (t, 3):
            raise DimensionMismatch("root trajectory shapes inconsistent with T")
        if self.root_trajectory_mode not in ("absolute", "relative"):
            raise KinematicsError(
                f"unknown root_trajectory_mode {self.root_trajectory_mode!r}"
            )
        for name, arr in (
            ("lie", lie),
            ("root_orientations", ori),
            ("root_positions", pos),
            ("bone_lengths", lengths),
        ):
            object.__setattr__(self, name, _frozen(arr))

    def __len__(self):
        return self.lie.shape[0]

    @property
    def n_frames(self):
        return self.lie.shape[0]

    def absolute_root_positions(self):
        if self.root_trajectory_mode == "absolute":
            return self.root_positions.copy()
        return np.cumsum(self.root_positions, axis=0)

    def frame(self, t):
        return LiePose(
            root_orientation=self.root_orientations[t],
            root_position=self.absolute_root_positions()[t],
            lie=self.lie[t],
        )


def _joint_lie_array(tree, root_orientation, lie):
    """Assemble the per-joint (J, 3) vector array the kernels expect."""
    w = np.zeros((tree.n_joints, 3))
    w[tree.root_index] = root_orientation
    w[list(tree.bone_joints)] = lie
    return w


def forward_kinematics(tree, pose):
    """Map a LiePose to (J, 3) world joint positions (Rodrigues chain)."""
    if pose.n_bones != tree.n_bones:
        raise DimensionMismatch(
            f"pose has {pose.n_bones} bones, tree has {tree.n_bones}"
        )
    w = _joint_lie_array(tree, pose.root_orientation, pose.lie)
    joints, _, _ = backends.fk_forward(
        w[None],
        np.asarray(pose.root_position, dtype=np.float64)[None],
        tree.bone_lengths,
        tree.parent_array,
        tree.topo_order,
    )
    return joints[0]


def fk_motion(tree, motion):
    """Forward kinematics over a whole motion: returns (T, J, 3)."""
    if motion.lie.shape[1] != tree.n_bones:
        raise DimensionMismatch(
            f"motion has {motion.lie.shape[1]} bones, tree has {tree.n_bones}"
        )
    t = motion.n_frames
    w = np.zeros((t, tree.n_joints, 3))
    w[:, tree.root_index] = motion.root_orientations
    w[:, list(tree.bone_joints)] = motion.lie
    joints, _, _ = backends.fk_forward(
        w,
        motion.absolute_root_positions(),
        motion.bone_lengths,
        tree.parent_array,
        tree.topo_order,
    )
    return joints


def joints_to_lie(tree, joints):
    """Recover a LieMotion from joint positions (the inverse of FK).

    Twist about the bone axis is unobservable from positions, so every
    recovered vector is the minimal rotation aligning the parent frame's +x
    with the observed bone direction (zero twist); the root orientation is
    likewise folded into the first bones and returned as zero. Bone lengths
    are the per-sequence mean of the per-frame joint distances. Antiparallel
    bones map to a half-turn about the local z axis.
    """
    joints = np.asarray(joints, dtype=np.float64)
    if joints.ndim == 2:
        joints = joints[None]
    n_frames, n_joints = joints.shape[0], joints.shape[1]
    if n_joints != tree.n_joints:
        raise DimensionMismatch(
            f"got {n_joints} joints, tree has {tree.n_joints}"
        )
    parents = tree.parent_array
    order = tree.topo_order
    root = tree.root_index

    deltas = np.zeros((n_frames, n_joints, 3))
    for j in tree.bone_joints:
        deltas[:, j] = joints[:, j] - joints[:, parents[j]]
    dists = np.linalg.norm(deltas, axis=-1)
    mean_lengths = dists.mean(axis=0)
    mean_lengths[root] = 0.0
    for j in tree.bone_joints:
        if mean_lengths[j] < 1e-12:
            raise DegenerateBone(
                f"joints {parents[j]} and {j} coincide in every frame"
            )

    lie = np.zeros((n_frames, tree.n_bones, 3))
    bone_row = {j: b for b, j in enumerate(tree.bone_joints)}
    x_axis = np.array([1.0, 0.0, 0.0])
    for f in range(n_frames):
        acc = {root: np.eye(3)}
        for j in order[1:]:
            p = parents[j]
            dist = dists[f, j]
            if dist < 1e-12:
                # bone collapsed in this frame only: keep the parent frame
                acc[j] = acc[p]
                continue
            target = acc[p].T @ (deltas[f, j] / dist)
            cos_a = np.clip(target[0], -1.0, 1.0)
            axis = np.array([0.0, -target[2], target[1]])  # x cross target
            sin_a = np.linalg.norm(axis)
            if sin_a < 1e-12:
                w = (
                    np.zeros(3)
                    if cos_a > 0
                    else np.array([0.0, 0.0, np.pi])
                )
            else:
                w = np.arccos(cos_a) * axis / sin_a
            lie[f, bone_row[j]] = w
            acc[j] = acc[p] @ exp_so3(w)
    return LieMotion(
        lie=lie,
        root_orientations=np.zeros((n_frames, 3)),
        root_positions=joints[:, root].copy(),
        bone_lengths=mean_lengths,
        root_trajectory_mode="absolute",
    )


def root_trajectory(motion, mode):
    """Root trajectory in the requested mode: absolute locations, or
    frame-to-frame displacements with a zero first entry."""
    if mode not in ("absolute", "relative"):
        raise KinematicsError(f"unknown trajectory mode {mode!r}")
    absolute = motion.absolute_root_positions()
    if mode == "absolute":
        return absolute
    rel = np.zeros_like(absolute)
    rel[1:] = np.diff(absolute, axis=0)
    return rel


def relative_to_absolute(velocities, start):
    """Invert the relative trajectory given the absolute first location."""
    velocities = np.asarray(velocities, dtype=np.float64)
    out = np.cumsum(velocities, axis=0)
    return out + (np.asarray(start, dtype=np.float64) - out[0])
