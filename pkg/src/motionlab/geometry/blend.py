"""Occluded-texture blending.

Colors on the occluded region are pulled toward reference colors (from the
coarse texture source) while staying close to their neighbors along the
mesh edge graph; vertices in the transition band near the visibility
boundary use only the smoothness pull. The printed objective uses plain
norms; we minimize the squared-norm surrogate, whose exact coordinate
descent is unconditionally convergent and shares the uniform-case fixed
points, by Gauss-Seidel sweeps until the colors settle.
"""

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra


class DisconnectedOccludedRegion(RuntimeWarning):
    """An occluded vertex has no usable neighbors; it keeps its reference
    color (transition vertices keep their current color)."""


def edge_graph_neighbors(mesh, sources, k=10):
    """For each source vertex, its k nearest other vertices by shortest
    path along mesh edges (Euclidean edge lengths)."""
    edges = mesh.edges()
    n = mesh.n_vertices
    if not len(edges):
        return {int(s): [] for s in sources}
    lengths = np.linalg.norm(
        mesh.vertices[edges[:, 0]] - mesh.vertices[edges[:, 1]], axis=1
    )
    rows = np.concatenate([edges[:, 0], edges[:, 1]])
    cols = np.concatenate([edges[:, 1], edges[:, 0]])
    graph = csr_matrix(
        (np.concatenate([lengths, lengths]), (rows, cols)), shape=(n, n)
    )
    sources = np.asarray(sorted(sources), dtype=np.int64)
    dist = dijkstra(graph, directed=False, indices=sources)
    out = {}
    for row, s in enumerate(sources):
        d = dist[row].copy()
        d[s] = np.inf
        finite = np.flatnonzero(np.isfinite(d))
        picked = finite[np.argsort(d[finite], kind="stable")][:k]
        out[int(s)] = [int(p) for p in picked]
    return out


def transition_band(mesh, occluded, rings=2):
    """Occluded vertices within ``rings`` edge hops of a visible vertex."""
    occluded = set(int(v) for v in occluded)
    adjacency = mesh.adjacency()
    frontier = {
        v for v in occluded if any(n not in occluded for n in adjacency[v])
    }
    band = set(frontier)
    for _ in range(rings - 1):
        grown = set()
        for v in band:
            grown.update(n for n in adjacency[v] if n in occluded)
        band |= grown
    return band


def blend_objective(colors, occluded, transition, reference, neighbors, lambda_nn):
    """The squared-norm surrogate objective being minimized."""
    total = 0.0
    for v in occluded:
        nbrs = neighbors.get(v, [])
        smooth = 0.0
        if nbrs:
            diffs = colors[nbrs] - colors[v]
            smooth = (diffs**2).sum() / len(nbrs)
        if v in transition:
            total += lambda_nn * smooth
        else:
            total += ((colors[v] - reference[v]) ** 2).sum() + lambda_nn * smooth
    return float(total)


def blend_occluded_texture(
    mesh,
    occluded,
    reference_colors,
    lambda_nn=1.0,
    neighbor_count=10,
    transition=None,
    transition_rings=2,
    max_iters=500,
    tol=1e-5,
):
    """Solve the blend on the occluded set; returns a full (V, 3) color
    array with visible vertices untouched.

    Each sweep performs exact coordinate minimization per occluded vertex,
    so the objective is non-increasing; iteration stops when the largest
    per-vertex color change drops below ``tol`` (or after ``max_iters``).
    With ``lambda_nn`` = 0 the reference colors are reproduced exactly.
    """
    occluded = [int(v) for v in occluded]
    occluded_set = set(occluded)
    reference = np.asarray(reference_colors, dtype=np.float64)
    if reference.shape != (mesh.n_vertices, 3):
        raise ValueError(
            f"reference colors must be ({mesh.n_vertices}, 3), got {reference.shape}"
        )
    if transition is None:
        transition = transition_band(mesh, occluded_set, rings=transition_rings)
    transition = set(int(v) for v in transition) & occluded_set

    colors = (
        mesh.colors.copy() if mesh.colors is not None else reference.copy()
    )
    colors[occluded] = reference[occluded]
    if lambda_nn == 0.0:
        # only the data term remains: every occluded vertex keeps reference
        return colors.copy()

    neighbors = edge_graph_neighbors(mesh, occluded_set, k=neighbor_count)
    # reverse influence: v appears in the smoothness sums of these y
    reverse = {v: [] for v in occluded}
    for y in occluded:
        nbrs = neighbors.get(y, [])
        if not nbrs:
            continue
        w = lambda_nn / len(nbrs)
        for n in nbrs:
            if n in occluded_set:
                reverse[n].append((y, w))

    for _ in range(max_iters):
        max_change = 0.0
        for v in occluded:
            nbrs = neighbors.get(v, [])
            if not nbrs and not reverse[v]:
                # isolated in the edge graph: keep the reference color
                continue
            num = np.zeros(3)
            den = 0.0
            if v not in transition:
                num += reference[v]
                den += 1.0
            if nbrs:
                num += (lambda_nn / len(nbrs)) * colors[nbrs].sum(axis=0)
                den += lambda_nn
            for y, w in reverse[v]:
                num += w * colors[y]
                den += w
            if den == 0.0:
                continue
            new = num / den
            max_change = max(max_change, np.abs(new - colors[v]).max())
            colors[v] = new
        if max_change < tol:
            break
    return colors
