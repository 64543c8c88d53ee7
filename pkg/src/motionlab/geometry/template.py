"""Skinned parametric body template.

A small rigged body of the same mathematical structure as the standard
parametric human models: shape blend directions on the rest vertices, a
joint regressor, and linear blend skinning with per-joint axis-angle
rotations applied about the joint centers down the kinematic tree. A
procedural 12-joint tube body ships for tests and demos; the licensed
asset itself is out of scope.
"""

import json
from dataclasses import dataclass

import numpy as np

from .. import autodiff as ad
from ..autodiff import Tensor
from ..backends import exp_batch
from .mesh import TriMesh


@dataclass(frozen=True, eq=False)
class SkinnedTemplate:
    rest_vertices: np.ndarray  # (V, 3)
    faces: np.ndarray  # (F, 3)
    joint_regressor: np.ndarray  # (J, V), rows sum to 1
    skinning_weights: np.ndarray  # (V, J), rows sum to 1, >= 0
    shape_basis: np.ndarray  # (S, V, 3)
    parents: tuple  # (J,), -1 at the root
    joint_names: tuple = ()

    def __post_init__(self):
        rest = np.asarray(self.rest_vertices, dtype=np.float64)
        faces = np.asarray(self.faces, dtype=np.int64)
        regressor = np.asarray(self.joint_regressor, dtype=np.float64)
        weights = np.asarray(self.skinning_weights, dtype=np.float64)
        basis = np.asarray(self.shape_basis, dtype=np.float64)
        parents = tuple(int(p) for p in self.parents)
        n_v, n_j = rest.shape[0], regressor.shape[0]
        if weights.shape != (n_v, n_j):
            raise ValueError(f"skinning weights must be ({n_v}, {n_j})")
        if weights.min() < 0:
            raise ValueError("skinning weights must be non-negative")
        if np.abs(weights.sum(axis=1) - 1.0).max() > 1e-9:
            raise ValueError("skinning weight rows must sum to 1")
        if basis.ndim != 3 or basis.shape[1:] != (n_v, 3):
            raise ValueError(f"shape basis must be (S, {n_v}, 3)")
        if sum(1 for p in parents if p == -1) != 1:
            raise ValueError("exactly one root joint expected")
        for name, arr in (
            ("rest_vertices", rest),
            ("faces", faces),
            ("joint_regressor", regressor),
            ("skinning_weights", weights),
            ("shape_basis", basis),
        ):
            arr = np.ascontiguousarray(arr)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "parents", parents)
        object.__setattr__(self, "joint_names", tuple(self.joint_names))

    @property
    def n_vertices(self):
        return self.rest_vertices.shape[0]

    @property
    def n_joints(self):
        return self.joint_regressor.shape[0]

    @property
    def n_shape_dims(self):
        return self.shape_basis.shape[0]

    @property
    def root_index(self):
        return self.parents.index(-1)

    @property
    def topo_order(self):
        order = [self.root_index]
        pending = [j for j in range(self.n_joints) if j != self.root_index]
        while pending:
            for j in list(pending):
                if self.parents[j] in order:
                    order.append(j)
                    pending.remove(j)
        return order

    def part_labels(self):
        """Per-vertex body-part id: the dominant skinning joint."""
        return np.argmax(self.skinning_weights, axis=1)

    # ------------------------------------------------------------ numpy path

    def shaped_vertices(self, beta):
        beta = np.asarray(beta, dtype=np.float64)
        return self.rest_vertices + np.tensordot(beta, self.shape_basis, axes=1)

    def rest_joints(self, beta):
        return self.joint_regressor @ self.shaped_vertices(beta)

    def pose(self, beta, theta, translation=None):
        """LBS posing; returns (vertices (V, 3), joints (J, 3))."""
        theta = np.asarray(theta, dtype=np.float64).reshape(self.n_joints, 3)
        verts = self.shaped_vertices(beta)
        jr = self.joint_regressor @ verts
        local = exp_batch(theta)
        rot_g = np.zeros((self.n_joints, 3, 3))
        pos_g = np.zeros((self.n_joints, 3))
        for j in self.topo_order:
            p = self.parents[j]
            if p == -1:
                rot_g[j] = local[j]
                pos_g[j] = jr[j]
            else:
                rot_g[j] = rot_g[p] @ local[j]
                pos_g[j] = pos_g[p] + rot_g[p] @ (jr[j] - jr[p])
        posed = np.zeros_like(verts)
        for j in range(self.n_joints):
            w = self.skinning_weights[:, j: j + 1]
            if not w.any():
                continue
            posed += w * ((verts - jr[j]) @ rot_g[j].T + pos_g[j])
        joints = pos_g.copy()
        if translation is not None:
            posed += np.asarray(translation, dtype=np.float64)
            joints += np.asarray(translation, dtype=np.float64)
        return posed, joints

    # ------------------------------------------------------------- tape path

    def pose_tensors(self, beta, theta):
        """Differentiable posing: beta (S,), theta (J, 3) as Tensors.

        Returns (vertices (V, 3) Tensor, joints (J, 3) Tensor).
        """
        verts = Tensor(self.rest_vertices)
        for s in range(self.n_shape_dims):
            coef = ad.slice_axis(beta, s, s + 1, axis=0)  # (1,)
            verts = ad.add(verts, ad.mul(coef, Tensor(self.shape_basis[s])))
        jr = ad.matmul(Tensor(self.joint_regressor), verts)  # (J, 3)
        local = ad.rot_exp(theta)  # (J, 3, 3)
        rot_g = [None] * self.n_joints
        pos_g = [None] * self.n_joints
        for j in self.topo_order:
            local_j = ad.reshape(ad.slice_axis(local, j, j + 1, axis=0), (3, 3))
            jr_j = ad.slice_axis(jr, j, j + 1, axis=0)  # (1, 3)
            p = self.parents[j]
            if p == -1:
                rot_g[j] = local_j
                pos_g[j] = jr_j
            else:
                rot_g[j] = ad.matmul(rot_g[p], local_j)
                jr_p = ad.slice_axis(jr, p, p + 1, axis=0)
                offset = ad.matmul(ad.sub(jr_j, jr_p), ad.transpose(rot_g[p]))
                pos_g[j] = ad.add(pos_g[p], offset)
        posed = None
        for j in range(self.n_joints):
            w = self.skinning_weights[:, j: j + 1]
            if not w.any():
                continue
            jr_j = ad.slice_axis(jr, j, j + 1, axis=0)
            moved = ad.add(
                ad.matmul(ad.sub(verts, jr_j), ad.transpose(rot_g[j])), pos_g[j]
            )
            term = ad.mul(Tensor(w), moved)
            posed = term if posed is None else ad.add(posed, term)
        joints = ad.concat(pos_g, axis=0)
        return posed, joints

    # ----------------------------------------------------------------- files

    def to_dict(self):
        return {
            "rest_vertices": self.rest_vertices.tolist(),
            "faces": self.faces.tolist(),
            "joint_regressor": self.joint_regressor.tolist(),
            "skinning_weights": self.skinning_weights.tolist(),
            "shape_basis": self.shape_basis.tolist(),
            "parents": list(self.parents),
            "joint_names": list(self.joint_names),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            rest_vertices=np.asarray(d["rest_vertices"]),
            faces=np.asarray(d["faces"], dtype=np.int64),
            joint_regressor=np.asarray(d["joint_regressor"]),
            skinning_weights=np.asarray(d["skinning_weights"]),
            shape_basis=np.asarray(d["shape_basis"]),
            parents=d["parents"],
            joint_names=d.get("joint_names", ()),
        )


def save_template(template, path):
    with open(path, "w") as fh:
        json.dump(template.to_dict(), fh, sort_keys=True)
        fh.write("\n")


def load_template(path):
    with open(path) as fh:
        return SkinnedTemplate.from_dict(json.load(fh))


# --------------------------------------------------------------- toy body


_TOY_JOINTS = [
    ("pelvis", -1, (0.0, 0.90, 0.0), 0.09),
    ("spine", 0, (0.0, 1.05, 0.0), 0.10),
    ("neck", 1, (0.0, 1.45, 0.0), 0.05),
    ("head_top", 2, (0.0, 1.70, 0.0), 0.07),
    ("l_shoulder", 1, (0.20, 1.40, 0.0), 0.045),
    ("l_hand", 4, (0.62, 1.40, 0.0), 0.04),
    ("r_shoulder", 1, (-0.20, 1.40, 0.0), 0.045),
    ("r_hand", 6, (-0.62, 1.40, 0.0), 0.04),
    ("l_hip", 0, (0.10, 0.85, 0.0), 0.06),
    ("l_foot", 8, (0.10, 0.05, 0.0), 0.05),
    ("r_hip", 0, (-0.10, 0.85, 0.0), 0.06),
    ("r_foot", 10, (-0.10, 0.05, 0.0), 0.05),
]

LEAF_JOINTS = {3, 5, 7, 9, 11}


def build_toy_template(rings_per_segment=4, ring_size=6):
    """Procedural rigged tube body: 12 joints, ~260 vertices."""
    names = [n for n, _, _, _ in _TOY_JOINTS]
    parents = [p for _, p, _, _ in _TOY_JOINTS]
    positions = np.array([pos for _, _, pos, _ in _TOY_JOINTS])
    radii = [r for _, _, _, r in _TOY_JOINTS]

    vertices = []
    faces = []
    weights_rows = []
    radial_dirs = []
    end_rings = {j: [] for j in range(len(names))}  # joint -> vertex ids

    segments = [(p, j) for j, p in enumerate(parents) if p != -1]
    for p, j in segments:
        a, b = positions[p], positions[j]
        axis = b - a
        axis_n = axis / np.linalg.norm(axis)
        # orthonormal frame around the segment
        helper = np.array([0.0, 0.0, 1.0])
        if abs(axis_n @ helper) > 0.9:
            helper = np.array([1.0, 0.0, 0.0])
        u = np.cross(axis_n, helper)
        u /= np.linalg.norm(u)
        v = np.cross(axis_n, u)
        base_index = len(vertices)
        for r in range(rings_per_segment):
            t = r / (rings_per_segment - 1)
            center = a + t * axis
            radius = (1 - t) * radii[p] + t * radii[j]
            ramp = 0.0
            if j not in LEAF_JOINTS and t > 0.75:
                ramp = 0.5 * (t - 0.75) / 0.25
            for s in range(ring_size):
                ang = 2 * np.pi * s / ring_size
                direction = np.cos(ang) * u + np.sin(ang) * v
                vertices.append(center + radius * direction)
                radial_dirs.append(direction)
                row = np.zeros(len(names))
                row[j] = ramp
                row[p] = 1.0 - ramp
                weights_rows.append(row)
                if r == 0:
                    end_rings[p].append(base_index + s)
                if r == rings_per_segment - 1:
                    end_rings[j].append(len(vertices) - 1)
        for r in range(rings_per_segment - 1):
            for s in range(ring_size):
                i0 = base_index + r * ring_size + s
                i1 = base_index + r * ring_size + (s + 1) % ring_size
                i2 = i0 + ring_size
                i3 = i1 + ring_size
                faces.append([i0, i2, i1])
                faces.append([i1, i2, i3])

    vertices = np.asarray(vertices)
    radial_dirs = np.asarray(radial_dirs)
    weights = np.asarray(weights_rows)
    regressor = np.zeros((len(names), len(vertices)))
    for j, ids in end_rings.items():
        regressor[j, ids] = 1.0 / len(ids)

    girth = 0.05 * radial_dirs
    height = np.zeros_like(vertices)
    height[:, 1] = 0.12 * (vertices[:, 1] - vertices[:, 1].min())
    basis = np.stack([girth, height])

    return SkinnedTemplate(
        rest_vertices=vertices,
        faces=np.asarray(faces, dtype=np.int64),
        joint_regressor=regressor,
        skinning_weights=weights,
        shape_basis=basis,
        parents=parents,
        joint_names=names,
    )


def template_mesh(template, beta=None, theta=None, translation=None):
    """The template's surface as a TriMesh (posed when beta/theta given)."""
    if beta is None:
        beta = np.zeros(template.n_shape_dims)
    if theta is None:
        verts = template.shaped_vertices(beta)
    else:
        verts, _ = template.pose(beta, theta, translation)
    return TriMesh(
        verts, template.faces, part_labels=template.part_labels()
    )
