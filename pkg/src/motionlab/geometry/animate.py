"""Driving a fitted scan through a motion: repose the template per frame,
carry the displacement map to control targets, and deform the scan
as-rigid-as-possible. Frame t's result is the rest state for frame t+1,
so the deformation chain follows the motion instead of snapping back.
"""

import numpy as np

from .arap import arap_deform
from .correspond import repose_targets
from .mesh import TriMesh


def motion_thetas(template, motion):
    """Per-frame (J, 3) rotation stacks for the template from a LieMotion
    carrying one vector per non-root joint plus the root orientation."""
    n_free = template.n_joints - 1
    if motion.lie.shape[1] != n_free:
        raise ValueError(
            f"motion carries {motion.lie.shape[1]} vectors per frame, template "
            f"needs {n_free}"
        )
    thetas = np.zeros((motion.n_frames, template.n_joints, 3))
    root = template.root_index
    free = [j for j in range(template.n_joints) if j != root]
    thetas[:, root] = motion.root_orientations
    thetas[:, free] = motion.lie
    return thetas


def animate_mesh(
    template,
    target_mesh,
    motion,
    correspondences,
    beta=None,
    arap_iters=4,
    neighbor_weights="uniform",
):
    """Per-frame deformed copies of ``target_mesh`` following ``motion``.

    Requires the template already fitted to the scan (``beta`` from the
    fit, ``correspondences`` built at the fit pose). Returns a list of
    TriMesh, one per frame.
    """
    if beta is None:
        beta = np.zeros(template.n_shape_dims)
    thetas = motion_thetas(template, motion)
    translations = motion.absolute_root_positions()
    frames = []
    current = target_mesh
    for t in range(motion.n_frames):
        reposed, _ = template.pose(beta, thetas[t], translations[t])
        idx, positions = repose_targets(correspondences, reposed)
        deformed, _ = arap_deform(
            current,
            (idx, positions),
            neighbor_weights=neighbor_weights,
            iters=arap_iters,
        )
        current = current.with_vertices(deformed)
        frames.append(current)
    return frames
