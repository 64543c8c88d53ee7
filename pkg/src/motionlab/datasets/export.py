"""Exports: BVH (ZXY Euler channels), CSV joint trajectories, JSON motion.

BVH places each bone's rotation at its child joint, so offsets are shifted
one level down the hierarchy: the node for joint j carries the offset of
its parent's bone and End Sites carry the leaf bone lengths. Node world
positions therefore reproduce the forward-kinematics joints exactly.
"""

import json

import numpy as np

from ..kinematics import exp_so3, joints_to_lie


def euler_zxy_degrees(rot):
    """Decompose R = Rz(c) @ Rx(a) @ Ry(b); returns (c, a, b) in degrees."""
    rot = np.asarray(rot, dtype=np.float64)
    sin_a = np.clip(rot[2, 1], -1.0, 1.0)
    a = np.arcsin(sin_a)
    if abs(sin_a) < 1.0 - 1e-10:
        b = np.arctan2(-rot[2, 0], rot[2, 2])
        c = np.arctan2(-rot[0, 1], rot[1, 1])
    else:
        # gimbal: fold the y rotation into z
        b = 0.0
        c = np.arctan2(rot[1, 0], rot[0, 0])
    return tuple(np.degrees([c, a, b]))


def _children(tree):
    out = {j: [] for j in range(tree.n_joints)}
    for j in tree.topo_order[1:]:
        out[tree.parents[j]].append(int(j))
    return out


def export_bvh(tree, motion, path, fps=30.0):
    """Write a LieMotion as BVH. Channel order is ZXY after the root's
    XYZ position channels."""
    children = _children(tree)
    lines = ["HIERARCHY"]
    channel_order = []  # joints in channel-writing order

    def emit(joint, offset, depth):
        indent = "  " * depth
        if depth == 0:
            lines.append(f"ROOT {tree.joint_names[joint]}")
        else:
            lines.append(f"{indent}JOINT {tree.joint_names[joint]}")
        lines.append(f"{indent}{{")
        inner = "  " * (depth + 1)
        lines.append(
            f"{inner}OFFSET {offset[0]:.6f} {offset[1]:.6f} {offset[2]:.6f}"
        )
        if depth == 0:
            lines.append(
                f"{inner}CHANNELS 6 Xposition Yposition Zposition "
                "Zrotation Xrotation Yrotation"
            )
        else:
            lines.append(f"{inner}CHANNELS 3 Zrotation Xrotation Yrotation")
        channel_order.append(joint)
        kids = children[joint]
        if kids:
            for kid in kids:
                # the child node carries THIS joint's bone offset
                emit(kid, (tree.bone_lengths[joint], 0.0, 0.0), depth + 1)
        else:
            lines.append(f"{inner}End Site")
            lines.append(f"{inner}{{")
            lines.append(
                f"{inner}  OFFSET {tree.bone_lengths[joint]:.6f} 0.000000 0.000000"
            )
            lines.append(f"{inner}}}")
        lines.append(f"{indent}}}")

    emit(tree.root_index, (0.0, 0.0, 0.0), 0)

    n_frames = motion.n_frames
    lines.append("MOTION")
    lines.append(f"Frames: {n_frames}")
    lines.append(f"Frame Time: {1.0 / fps:.8f}")
    bone_row = {j: b for b, j in enumerate(tree.bone_joints)}
    positions = motion.absolute_root_positions()
    for t in range(n_frames):
        values = []
        for joint in channel_order:
            if joint == tree.root_index:
                values.extend(positions[t])
                w = motion.root_orientations[t]
            else:
                w = motion.lie[t, bone_row[joint]]
            values.extend(euler_zxy_degrees(exp_so3(w)))
        lines.append(" ".join(f"{v:.6f}" for v in values))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def export_clip_bvh(tree, joints, path, fps=30.0):
    """BVH-export raw joint positions by first recovering a LieMotion."""
    motion = joints_to_lie(tree, joints)
    export_bvh(tree, motion, path, fps=fps)
    return motion


def export_csv(tree, joints, path, fps=30.0):
    """Joint trajectories as CSV: frame, time, then <joint>_{x,y,z}."""
    joints = np.asarray(joints, dtype=np.float64)
    header = ["frame", "time"]
    for name in tree.joint_names:
        header.extend([f"{name}_x", f"{name}_y", f"{name}_z"])
    rows = [",".join(header)]
    for t in range(joints.shape[0]):
        row = [str(t), f"{t / fps:.6f}"]
        row.extend(f"{v:.9f}" for v in joints[t].ravel())
        rows.append(",".join(row))
    with open(path, "w") as fh:
        fh.write("\n".join(rows) + "\n")


def export_motion_json(tree, joints, path, meta=None):
    """Single-motion JSON: skeleton hash, metadata, and the joint array."""
    payload = {
        "skeleton_hash": tree.spec_hash(),
        "skeleton_name": tree.name,
        "meta": meta or {},
        "joints": np.asarray(joints, dtype=np.float64).tolist(),
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, sort_keys=True)
        fh.write("\n")
