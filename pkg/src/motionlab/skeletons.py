"""Skeleton presets and the JSON skeleton-spec file format.

Three human layouts are shipped (18, 22 and 24 joints) matching the common
mocap annotation families, plus a small 8-joint figure used by the synthetic
datasets and the fast tests. All presets use five chains (spine, two arms,
two legs) rooted at the pelvis; bone lengths are plausible adult proportions
in meters.
"""

import json

from .kinematics import KinematicTree


def _tree(name, joints, chains, lengths):
    names = [n for n, _ in joints]
    parents = [p for _, p in joints]
    bone_lengths = [0.0] * len(joints)
    for child, value in lengths.items():
        bone_lengths[names.index(child)] = value
    return KinematicTree(
        joint_names=names,
        parents=parents,
        chains=chains,
        bone_lengths=bone_lengths,
        root_index=0,
        name=name,
    )


def _toy8():
    joints = [
        ("pelvis", -1),
        ("belly", 0),
        ("chest", 1),
        ("head", 2),
        ("l_hand", 2),
        ("r_hand", 2),
        ("l_foot", 0),
        ("r_foot", 0),
    ]
    chains = [[0, 1, 2, 3], [2, 4], [2, 5], [0, 6], [0, 7]]
    lengths = {
        "belly": 0.22,
        "chest": 0.24,
        "head": 0.28,
        "l_hand": 0.55,
        "r_hand": 0.55,
        "l_foot": 0.85,
        "r_foot": 0.85,
    }
    return _tree("toy8", joints, chains, lengths)


def _ntu18():
    joints = [
        ("pelvis", -1),
        ("spine", 0),
        ("neck", 1),
        ("head", 2),
        ("l_hip", 0),
        ("l_knee", 4),
        ("l_ankle", 5),
        ("r_hip", 0),
        ("r_knee", 7),
        ("r_ankle", 8),
        ("l_shoulder", 2),
        ("l_elbow", 10),
        ("l_wrist", 11),
        ("l_hand", 12),
        ("r_shoulder", 2),
        ("r_elbow", 14),
        ("r_wrist", 15),
        ("r_hand", 16),
    ]
    chains = [
        [0, 1, 2, 3],
        [0, 4, 5, 6],
        [0, 7, 8, 9],
        [2, 10, 11, 12, 13],
        [2, 14, 15, 16, 17],
    ]
    lengths = {
        "spine": 0.28,
        "neck": 0.22,
        "head": 0.18,
        "l_hip": 0.11,
        "l_knee": 0.42,
        "l_ankle": 0.41,
        "r_hip": 0.11,
        "r_knee": 0.42,
        "r_ankle": 0.41,
        "l_shoulder": 0.19,
        "l_elbow": 0.28,
        "l_wrist": 0.25,
        "l_hand": 0.08,
        "r_shoulder": 0.19,
        "r_elbow": 0.28,
        "r_wrist": 0.25,
        "r_hand": 0.08,
    }
    return _tree("ntu18", joints, chains, lengths)


def _cmu22():
    joints = [
        ("root", -1),
        ("lowerback", 0),
        ("upperback", 1),
        ("thorax", 2),
        ("neck", 3),
        ("head", 4),
        ("l_hipjoint", 0),
        ("l_femur", 6),
        ("l_tibia", 7),
        ("l_foot", 8),
        ("r_hipjoint", 0),
        ("r_femur", 10),
        ("r_tibia", 11),
        ("r_foot", 12),
        ("l_clavicle", 3),
        ("l_humerus", 14),
        ("l_radius", 15),
        ("l_hand", 16),
        ("r_clavicle", 3),
        ("r_humerus", 18),
        ("r_radius", 19),
        ("r_hand", 20),
    ]
    chains = [
        [0, 1, 2, 3, 4, 5],
        [0, 6, 7, 8, 9],
        [0, 10, 11, 12, 13],
        [3, 14, 15, 16, 17],
        [3, 18, 19, 20, 21],
    ]
    lengths = {
        "lowerback": 0.12,
        "upperback": 0.13,
        "thorax": 0.13,
        "neck": 0.10,
        "head": 0.17,
        "l_hipjoint": 0.12,
        "l_femur": 0.43,
        "l_tibia": 0.42,
        "l_foot": 0.15,
        "r_hipjoint": 0.12,
        "r_femur": 0.43,
        "r_tibia": 0.42,
        "r_foot": 0.15,
        "l_clavicle": 0.18,
        "l_humerus": 0.29,
        "l_radius": 0.26,
        "l_hand": 0.09,
        "r_clavicle": 0.18,
        "r_humerus": 0.29,
        "r_radius": 0.26,
        "r_hand": 0.09,
    }
    return _tree("cmu22", joints, chains, lengths)


def _smpl24():
    joints = [
        ("pelvis", -1),
        ("l_hip", 0),
        ("r_hip", 0),
        ("spine1", 0),
        ("l_knee", 1),
        ("r_knee", 2),
        ("spine2", 3),
        ("l_ankle", 4),
        ("r_ankle", 5),
        ("spine3", 6),
        ("l_foot", 7),
        ("r_foot", 8),
        ("neck", 9),
        ("l_collar", 9),
        ("r_collar", 9),
        ("head", 12),
        ("l_shoulder", 13),
        ("r_shoulder", 14),
        ("l_elbow", 16),
        ("r_elbow", 17),
        ("l_wrist", 18),
        ("r_wrist", 19),
        ("l_hand", 20),
        ("r_hand", 21),
    ]
    chains = [
        [0, 3, 6, 9, 12, 15],
        [0, 1, 4, 7, 10],
        [0, 2, 5, 8, 11],
        [9, 13, 16, 18, 20, 22],
        [9, 14, 17, 19, 21, 23],
    ]
    lengths = {
        "spine1": 0.12,
        "spine2": 0.13,
        "spine3": 0.14,
        "neck": 0.20,
        "head": 0.10,
        "l_hip": 0.11,
        "r_hip": 0.11,
        "l_knee": 0.40,
        "r_knee": 0.40,
        "l_ankle": 0.41,
        "r_ankle": 0.41,
        "l_foot": 0.14,
        "r_foot": 0.14,
        "l_collar": 0.12,
        "r_collar": 0.12,
        "l_shoulder": 0.11,
        "r_shoulder": 0.11,
        "l_elbow": 0.27,
        "r_elbow": 0.27,
        "l_wrist": 0.25,
        "r_wrist": 0.25,
        "l_hand": 0.08,
        "r_hand": 0.08,
    }
    return _tree("smpl24", joints, chains, lengths)


_PRESETS = {
    "toy8": _toy8,
    "ntu18": _ntu18,
    "cmu22": _cmu22,
    "smpl24": _smpl24,
}


def preset_names():
    return sorted(_PRESETS)


def preset(name):
    """Build a preset skeleton by name (toy8, ntu18, cmu22, smpl24)."""
    try:
        return _PRESETS[name]()
    except KeyError:
        raise KeyError(
            f"unknown skeleton preset {name!r}; choices: {preset_names()}"
        ) from None


def save_skeleton(tree, path):
    with open(path, "w") as fh:
        json.dump(tree.to_dict(), fh, indent=2)
        fh.write("\n")


def load_skeleton(path):
    with open(path) as fh:
        return KinematicTree.from_dict(json.load(fh))
