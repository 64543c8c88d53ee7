"""Sampling from a trained model: free generation, latent interpolation,
action transition, and motion outpainting.

All paths share one rollout that draws latents from the learned prior; a
fresh standard-normal draw is consumed every step regardless of overrides,
so runs with the same seed stay aligned step for step (this is what makes
interpolation endpoints and single-entry transitions reproduce plain
generation exactly).
"""

from dataclasses import dataclass

import numpy as np

from ..autodiff import Tensor
from ..datasets import UnknownAction
from ..kinematics import LieMotion, joints_to_lie
from .model import GLMI_VARIANTS


@dataclass(frozen=True, eq=False)
class GeneratedMotion:
    joints: np.ndarray  # (T, J, 3)
    lie_motion: LieMotion
    action: object  # action name or transition schedule
    seed: int
    first_z: np.ndarray


def _labels_for(model, action, length):
    one_hot = model.action_one_hot(action)
    return np.tile(one_hot, (length, 1, 1))  # (T, B=1, C)


def _rollout(model, labels, rng, first_z=None, prefix_joints=None):
    """Run the prior + generator for labels of shape (T, B, C).

    Returns (joints (B, T, J, 3), lie (B, T, N, 3) or None, roots, first_z).
    ``prefix_joints`` (P, J, 3) teacher-forces the first P steps for every
    batch row and copies them to the output verbatim.
    """
    n_steps, batch = labels.shape[0], labels.shape[1]
    glmi = model.variant in GLMI_VARIANTS
    native_lie = model.variant != "plain"
    prefix_len = 0 if prefix_joints is None else len(prefix_joints)
    if prefix_len:
        prefix_flat = prefix_joints.reshape(prefix_len, -1)
        prefix_vel = np.zeros((prefix_len, 3))
        prefix_vel[1:] = np.diff(prefix_joints[:, 0, :], axis=0)

    state = model.init_state(batch)
    pose_prev = np.zeros((batch, model.pose_dim))
    prev_offset = None
    prev_root = None
    out = np.zeros((batch, n_steps, model.n_joints, 3))
    lie_out = (
        np.zeros((batch, n_steps, model.skeleton.n_bones, 3)) if native_lie else None
    )
    root_out = np.zeros((batch, n_steps, 3))
    first_z_out = None

    for t in range(n_steps):
        counter = Tensor(np.full((batch, 1), (t + 1) / n_steps))
        act = Tensor(labels[t])
        encoded = model.encode(Tensor(pose_prev), act, counter)
        mu_p, lv_p, state = model.prior_step(
            None, act, counter, state, encoded=encoded
        )
        eps = rng.standard_normal((batch, model.z_dim))
        z = mu_p.data + np.exp(lv_p.data / 2.0) * eps
        if t == 0:
            if first_z is not None:
                z = np.broadcast_to(
                    np.asarray(first_z, dtype=np.float64), z.shape
                ).copy()
            first_z_out = z.copy()
        joints, aux, state = model.generator_step(
            Tensor(z),
            None,
            act,
            counter,
            state,
            prev_offset_pose=prev_offset,
            prev_root=prev_root,
            encoded=encoded,
        )

        if t < prefix_len:
            frame = np.broadcast_to(prefix_joints[t], (batch,) + prefix_joints[t].shape)
            out[:, t] = frame
            pose_prev = np.tile(prefix_flat[t], (batch, 1))
            if glmi:
                pose_prev = np.concatenate(
                    [pose_prev, np.tile(prefix_vel[t], (batch, 1))], axis=1
                )
                gt_offset = (prefix_joints[t] - prefix_joints[t, 0]).reshape(1, -1)
                prev_offset = Tensor(np.tile(gt_offset, (batch, 1)))
                prev_root = Tensor(np.tile(prefix_joints[t, 0], (batch, 1)))
            if native_lie:
                lie_out[:, t] = model.wrapped_lie(aux["lie"].data)
                root_out[:, t] = prefix_joints[t, 0]
        else:
            out[:, t] = joints.data
            pose_prev = joints.data.reshape(batch, model.joint_dim)
            if glmi:
                pose_prev = np.concatenate([pose_prev, aux["velocity"].data], axis=1)
                prev_offset = aux["offset_pose"].detach()
                prev_root = aux["root"].detach()
            if native_lie:
                lie_out[:, t] = model.wrapped_lie(aux["lie"].data)
                root_out[:, t] = aux["root"].data.reshape(batch, 3)
    return out, lie_out, root_out, first_z_out


def _to_motion(model, joints, lie, roots, action, seed, first_z):
    if lie is None:
        lie_motion = joints_to_lie(model.skeleton, joints)
    else:
        lie_motion = LieMotion(
            lie=lie,
            root_orientations=np.zeros((len(joints), 3)),
            root_positions=roots,
            bone_lengths=model.skeleton.bone_lengths,
        )
    return GeneratedMotion(
        joints=joints,
        lie_motion=lie_motion,
        action=action,
        seed=seed,
        first_z=first_z,
    )


def generate(model, action, length, seed, first_z=None):
    """Sample one motion of exactly ``length`` frames for an action."""
    if length < 1:
        raise ValueError("length must be >= 1")
    labels = _labels_for(model, action, length)
    rng = np.random.default_rng(seed)
    joints, lie, roots, z0 = _rollout(model, labels, rng, first_z=first_z)
    return _to_motion(
        model,
        joints[0],
        None if lie is None else lie[0],
        roots[0],
        action,
        seed,
        z0[0],
    )


def generate_batch(model, actions, length, seed, want_lie=True):
    """Sample one motion per entry of ``actions`` in a single batched pass."""
    one_hots = np.stack([model.action_one_hot(a) for a in actions])
    labels = np.tile(one_hots[None], (length, 1, 1))
    rng = np.random.default_rng(seed)
    joints, lie, roots, z0 = _rollout(model, labels, rng)
    if not want_lie:
        return [
            GeneratedMotion(joints[i], None, actions[i], seed, z0[i])
            for i in range(len(actions))
        ]
    return [
        _to_motion(
            model,
            joints[i],
            None if lie is None else lie[i],
            roots[i],
            actions[i],
            seed,
            z0[i],
        )
        for i in range(len(actions))
    ]


def interpolate(model, action, z_a, z_b, k, length, seed):
    """Motions whose first-step latents walk the line from z_a to z_b in k
    points; later steps sample the prior under the shared seed, so the two
    endpoints replay the motions that produced z_a and z_b."""
    if k < 2:
        raise ValueError("interpolation needs k >= 2 points")
    z_a = np.asarray(z_a, dtype=np.float64)
    z_b = np.asarray(z_b, dtype=np.float64)
    out = []
    for i in range(k):
        lam = i / (k - 1)
        z = (1.0 - lam) * z_a + lam * z_b
        out.append(generate(model, action, length, seed, first_z=z))
    return out


def transition(model, schedule, length, seed):
    """Generate with the one-hot action switching at scheduled frames.

    ``schedule`` is [(action, switch_frame), ...] with the first frame 0 and
    strictly ascending switch frames below ``length``. A single entry is
    exactly ``generate``.
    """
    if not schedule:
        raise ValueError("schedule must contain at least one (action, frame)")
    frames = [f for _, f in schedule]
    if frames[0] != 0:
        raise ValueError("first schedule entry must start at frame 0")
    if any(b <= a for a, b in zip(frames, frames[1:])):
        raise ValueError("switch frames must be strictly ascending")
    if frames[-1] >= length:
        raise ValueError("switch frames must be below the motion length")
    labels = np.zeros((length, 1, model.n_actions))
    bounds = frames + [length]
    for (action, _), start, stop in zip(schedule, bounds, bounds[1:]):
        labels[start:stop, 0] = model.action_one_hot(action)
    rng = np.random.default_rng(seed)
    joints, lie, roots, z0 = _rollout(model, labels, rng)
    return _to_motion(
        model,
        joints[0],
        None if lie is None else lie[0],
        roots[0],
        tuple(schedule),
        seed,
        z0[0],
    )


def outpaint(model, prefix_joints, action, length, seed):
    """Complete a motion from fixed beginning poses.

    The prefix frames drive the recurrent states teacher-forced and are
    copied to the output bit-exactly; generation continues freely after.
    """
    prefix_joints = np.asarray(prefix_joints, dtype=np.float64)
    if prefix_joints.ndim != 3 or prefix_joints.shape[1] != model.n_joints:
        raise ValueError(
            f"prefix must be (P, {model.n_joints}, 3), got {prefix_joints.shape}"
        )
    if len(prefix_joints) >= length:
        raise ValueError("prefix must be shorter than the requested length")
    labels = _labels_for(model, action, length)
    rng = np.random.default_rng(seed)
    joints, lie, roots, z0 = _rollout(
        model, labels, rng, prefix_joints=prefix_joints
    )
    # mixed prefix/generated frames: recover one consistent LieMotion
    motion = joints_to_lie(model.skeleton, joints[0])
    return GeneratedMotion(
        joints=joints[0],
        lie_motion=motion,
        action=action,
        seed=seed,
        first_z=z0[0],
    )
