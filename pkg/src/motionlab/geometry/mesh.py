"""Triangle mesh container with OBJ-subset and JSON I/O.

The OBJ subset: ``v x y z [r g b]`` records (per-vertex colors as the
common extended-v convention) and ``f`` records with 1-based indices,
slash attributes ignored. Part labels survive only the JSON form.
"""

import json
from dataclasses import dataclass

import numpy as np


class MeshError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class TriMesh:
    vertices: np.ndarray  # (V, 3) meters
    faces: np.ndarray  # (F, 3) int
    colors: np.ndarray = None  # (V, 3) RGB in [0, 1]
    part_labels: np.ndarray = None  # (V,) int body-part ids

    def __post_init__(self):
        vertices = np.asarray(self.vertices, dtype=np.float64)
        faces = np.asarray(self.faces, dtype=np.int64).reshape(-1, 3)
        if vertices.ndim != 2 or vertices.shape[1] != 3:
            raise MeshError(f"vertices must be (V, 3), got {vertices.shape}")
        if faces.size and (faces.min() < 0 or faces.max() >= len(vertices)):
            raise MeshError("face indices out of range")
        object.__setattr__(self, "vertices", vertices)
        object.__setattr__(self, "faces", faces)
        if self.colors is not None:
            colors = np.asarray(self.colors, dtype=np.float64)
            if colors.shape != vertices.shape:
                raise MeshError("colors must match vertices")
            if colors.min() < -1e-9 or colors.max() > 1 + 1e-9:
                raise MeshError("colors must lie in [0, 1]")
            object.__setattr__(self, "colors", colors)
        if self.part_labels is not None:
            labels = np.asarray(self.part_labels, dtype=np.int64)
            if labels.shape != (len(vertices),):
                raise MeshError("part_labels must be (V,)")
            object.__setattr__(self, "part_labels", labels)

    @property
    def n_vertices(self):
        return len(self.vertices)

    def edges(self):
        """Unique undirected edges as a (E, 2) array."""
        if not self.faces.size:
            return np.zeros((0, 2), dtype=np.int64)
        pairs = np.concatenate(
            [self.faces[:, [0, 1]], self.faces[:, [1, 2]], self.faces[:, [2, 0]]]
        )
        pairs.sort(axis=1)
        return np.unique(pairs, axis=0)

    def adjacency(self):
        """Neighbor index lists per vertex, from the edge graph."""
        neighbors = [[] for _ in range(self.n_vertices)]
        for a, b in self.edges():
            neighbors[a].append(int(b))
            neighbors[b].append(int(a))
        return [sorted(set(n)) for n in neighbors]

    def bbox_diagonal(self):
        span = self.vertices.max(axis=0) - self.vertices.min(axis=0)
        return float(np.linalg.norm(span))

    def with_vertices(self, vertices):
        return TriMesh(vertices, self.faces, self.colors, self.part_labels)

    def with_colors(self, colors):
        return TriMesh(self.vertices, self.faces, colors, self.part_labels)


def save_obj(mesh, path):
    lines = []
    for i, v in enumerate(mesh.vertices):
        row = f"v {v[0]:.9f} {v[1]:.9f} {v[2]:.9f}"
        if mesh.colors is not None:
            c = mesh.colors[i]
            row += f" {c[0]:.6f} {c[1]:.6f} {c[2]:.6f}"
        lines.append(row)
    for f in mesh.faces:
        lines.append(f"f {f[0] + 1} {f[1] + 1} {f[2] + 1}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_obj(path):
    vertices = []
    colors = []
    faces = []
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            parts = raw.split()
            if not parts or parts[0].startswith("#"):
                continue
            if parts[0] == "v":
                if len(parts) not in (4, 7):
                    raise MeshError(f"line {lineno}: bad vertex record")
                vertices.append([float(x) for x in parts[1:4]])
                if len(parts) == 7:
                    colors.append([float(x) for x in parts[4:7]])
            elif parts[0] == "f":
                if len(parts) != 4:
                    raise MeshError(f"line {lineno}: only triangles supported")
                faces.append([int(tok.split("/")[0]) - 1 for tok in parts[1:]])
    if not vertices:
        raise MeshError(f"no vertices in {path}")
    if colors and len(colors) != len(vertices):
        raise MeshError("some vertices carry colors and some do not")
    return TriMesh(
        np.asarray(vertices),
        np.asarray(faces, dtype=np.int64).reshape(-1, 3),
        np.asarray(colors) if colors else None,
    )


def save_mesh_json(mesh, path):
    payload = {
        "vertices": mesh.vertices.tolist(),
        "faces": mesh.faces.tolist(),
    }
    if mesh.colors is not None:
        payload["colors"] = mesh.colors.tolist()
    if mesh.part_labels is not None:
        payload["part_labels"] = mesh.part_labels.tolist()
    with open(path, "w") as fh:
        json.dump(payload, fh, sort_keys=True)
        fh.write("\n")


def load_mesh_json(path):
    with open(path) as fh:
        payload = json.load(fh)
    return TriMesh(
        np.asarray(payload["vertices"]),
        np.asarray(payload["faces"], dtype=np.int64),
        np.asarray(payload["colors"]) if "colors" in payload else None,
        np.asarray(payload["part_labels"]) if "part_labels" in payload else None,
    )
