"""Tape operations that bridge to the kinematics kernel backends.

``fk`` runs inside every decoder step of Lie-based training, so its forward
and backward are delegated to the selected backend (compiled when built,
numpy otherwise) rather than composed from elementary tape ops.
"""

import numpy as np

from .. import backends
from .tensor import ShapeMismatch, Tensor, _coerce, _record


def fk(w, root_pos, bone_lengths, parents, order):
    """Differentiable forward kinematics.

    Args:
        w: Tensor (B, J, 3), per-joint axis-angle vectors (root row included).
        root_pos: Tensor (B, 3).
        bone_lengths, parents, order: constant skeleton arrays.

    Returns joint positions as a Tensor (B, J, 3). Gradients flow to ``w``
    and ``root_pos``; bone lengths are constants.
    """
    w = _coerce(w)
    root_pos = _coerce(root_pos)
    if w.ndim != 3 or w.shape[2] != 3:
        raise ShapeMismatch(f"fk expects w of shape (B, J, 3), got {w.shape}")
    if root_pos.shape != (w.shape[0], 3):
        raise ShapeMismatch(
            f"fk root_pos shape {root_pos.shape} != ({w.shape[0]}, 3)"
        )
    bone_lengths = np.asarray(bone_lengths, dtype=np.float64)
    parents = np.asarray(parents, dtype=np.int64)
    order = np.asarray(order, dtype=np.int64)
    joints, rot, local = backends.fk_forward(
        w.data, root_pos.data, bone_lengths, parents, order
    )

    def backward(g):
        grad_w, grad_root = backends.fk_backward(
            w.data, bone_lengths, parents, order, rot, local, g
        )
        return grad_w, grad_root

    return _record(joints, (w, root_pos), backward)


def rot_exp(w):
    """Differentiable Rodrigues map: Tensor (..., 3) -> (..., 3, 3)."""
    w = _coerce(w)
    if w.shape[-1] != 3:
        raise ShapeMismatch(f"rot_exp expects (..., 3), got {w.shape}")
    out = backends.exp_batch(w.data)

    def backward(g):
        return (backends.dexp_contract(w.data, g),)

    return _record(out, (w,), backward)
