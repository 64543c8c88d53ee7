"""Reference (pure numpy) kinematics kernels.

These implement the same contracts as the compiled ``_fastkin`` extension:
batched axis-angle exponentials and skeleton forward kinematics together
with hand-derived reverse-mode gradients. The compiled module is preferred
at import time; this module is the fallback and the correctness baseline.

Conventions shared by both backends:
  * ``w`` arrays hold one axis-angle 3-vector per joint; row ``root`` is the
    global body orientation, every other row is the rotation of the bone
    ending at that joint, relative to its parent bone frame.
  * Bones point along local +x, so a bone offset is ``b * R[:, 0]``.
  * ``order`` is a topological ordering of the joints (root first).
"""

import numpy as np

# Rodrigues coefficients switch to their Taylor expansions below this norm
# to avoid 0/0; the expansions are exact to ~1e-24 at the cutoff.
SMALL_ANGLE = 1e-6

# so(3) generator matrices G_a = d(hat(w))/d(w_a)
_GEN = np.zeros((3, 3, 3))
_GEN[0, 2, 1] = 1.0
_GEN[0, 1, 2] = -1.0
_GEN[1, 0, 2] = 1.0
_GEN[1, 2, 0] = -1.0
_GEN[2, 1, 0] = 1.0
_GEN[2, 0, 1] = -1.0


def hat_batch(w):
    """(M, 3) axis-angle vectors -> (M, 3, 3) skew-symmetric matrices."""
    w = np.asarray(w, dtype=np.float64)
    out = np.zeros(w.shape[:-1] + (3, 3))
    out[..., 0, 1] = -w[..., 2]
    out[..., 0, 2] = w[..., 1]
    out[..., 1, 0] = w[..., 2]
    out[..., 1, 2] = -w[..., 0]
    out[..., 2, 0] = -w[..., 1]
    out[..., 2, 1] = w[..., 0]
    return out


def _rodrigues_coeffs(theta):
    """A = sin t / t and B = (1 - cos t) / t^2 with small-angle Taylor."""
    t2 = theta * theta
    small = theta < SMALL_ANGLE
    safe = np.where(small, 1.0, theta)
    a = np.where(small, 1.0 - t2 / 6.0, np.sin(safe) / safe)
    b = np.where(small, 0.5 - t2 / 24.0, (1.0 - np.cos(safe)) / (safe * safe))
    return a, b


def _dexp_coeffs(theta):
    """a2 = A'(t)/t and b2 = B'(t)/t with small-angle Taylor."""
    t2 = theta * theta
    small = theta < SMALL_ANGLE
    safe = np.where(small, 1.0, theta)
    sin_t = np.sin(safe)
    cos_t = np.cos(safe)
    a2 = np.where(small, -1.0 / 3.0 + t2 / 30.0, (safe * cos_t - sin_t) / safe**3)
    b2 = np.where(
        small,
        -1.0 / 12.0 + t2 / 180.0,
        (safe * sin_t - 2.0 * (1.0 - cos_t)) / safe**4,
    )
    return a2, b2


def exp_batch(w):
    """Rodrigues map for a batch of axis-angle vectors: (M, 3) -> (M, 3, 3)."""
    w = np.asarray(w, dtype=np.float64)
    theta = np.linalg.norm(w, axis=-1)
    a, b = _rodrigues_coeffs(theta)
    W = hat_batch(w)
    W2 = W @ W
    return np.eye(3) + a[..., None, None] * W + b[..., None, None] * W2


def dexp_contract(w, grad_rot):
    """Pull a gradient on exp(hat(w)) back to a gradient on w.

    ``grad_rot`` has shape (..., 3, 3); returns (..., 3). Uses
    d exp/d w_a = a2*w_a*W + b2*w_a*W^2 + A*G_a + B*(G_a W + W G_a).
    """
    w = np.asarray(w, dtype=np.float64)
    theta = np.linalg.norm(w, axis=-1)
    a, b = _rodrigues_coeffs(theta)
    a2, b2 = _dexp_coeffs(theta)
    W = hat_batch(w)
    W2 = W @ W
    s1 = np.einsum("...ij,...ij->...", grad_rot, W)
    s2 = np.einsum("...ij,...ij->...", grad_rot, W2)
    # <grad, G_a> is the antisymmetric contraction
    g = np.stack(
        [
            grad_rot[..., 2, 1] - grad_rot[..., 1, 2],
            grad_rot[..., 0, 2] - grad_rot[..., 2, 0],
            grad_rot[..., 1, 0] - grad_rot[..., 0, 1],
        ],
        axis=-1,
    )
    # <grad, G_a W + W G_a>
    m = np.einsum("aik,...kj->...aij", _GEN, W) + np.einsum(
        "...ik,akj->...aij", W, _GEN
    )
    s3 = np.einsum("...aij,...ij->...a", m, grad_rot)
    return (
        (a2 * s1 + b2 * s2)[..., None] * w
        + a[..., None] * g
        + b[..., None] * s3
    )


def fk_forward(w, root_pos, bone_lengths, parents, order):
    """Forward kinematics over a batch of poses.

    Args:
        w: (B, J, 3) axis-angle vectors, row ``order[0]`` is the root.
        root_pos: (B, 3) root joint positions.
        bone_lengths: (J,) bone lengths, root entry ignored.
        parents: (J,) parent joint indices, -1 at the root.
        order: (J,) topological joint order, root first.

    Returns:
        joints: (B, J, 3) world joint positions.
        rot: (B, J, 3, 3) accumulated world rotations (backward cache).
        local: (B, J, 3, 3) per-joint exponentials (backward cache).
    """
    w = np.asarray(w, dtype=np.float64)
    batch, n_joints = w.shape[0], w.shape[1]
    local = exp_batch(w.reshape(-1, 3)).reshape(batch, n_joints, 3, 3)
    rot = np.zeros_like(local)
    joints = np.zeros((batch, n_joints, 3))
    root = order[0]
    rot[:, root] = local[:, root]
    joints[:, root] = root_pos
    for j in order[1:]:
        p = parents[j]
        rot[:, j] = rot[:, p] @ local[:, j]
        joints[:, j] = joints[:, p] + bone_lengths[j] * rot[:, j, :, 0]
    return joints, rot, local


def fk_backward(w, bone_lengths, parents, order, rot, local, grad_joints):
    """Reverse-mode gradients of ``fk_forward``.

    Returns (grad_w (B, J, 3), grad_root_pos (B, 3)). Bone lengths are
    treated as constants.
    """
    w = np.asarray(w, dtype=np.float64)
    grad_joints = np.ascontiguousarray(grad_joints, dtype=np.float64)
    batch, n_joints = w.shape[0], w.shape[1]
    d_joint = grad_joints.copy()
    d_rot = np.zeros((batch, n_joints, 3, 3))
    grad_w = np.zeros_like(w)
    root = order[0]
    for j in order[:0:-1]:
        p = parents[j]
        # joints[j] = joints[p] + b_j * rot[j][:, 0]
        d_joint[:, p] += d_joint[:, j]
        d_rot[:, j, :, 0] += bone_lengths[j] * d_joint[:, j]
        # rot[j] = rot[p] @ local[j]
        d_local = np.einsum("bki,bkj->bij", rot[:, p], d_rot[:, j])
        d_rot[:, p] += np.einsum("bik,bjk->bij", d_rot[:, j], local[:, j])
        grad_w[:, j] = dexp_contract(w[:, j], d_local)
    grad_w[:, root] = dexp_contract(w[:, root], d_rot[:, root])
    return grad_w, d_joint[:, root].copy()
