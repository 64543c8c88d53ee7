"""As-rigid-as-possible deformation under soft control points.

Alternates (a) per-vertex optimal rotations from the 3x3 SVD of the local
edge covariance (determinant-corrected) and (b) a global sparse linear
solve for the positions given the rotations and the unit-weight control
term. Both half-steps minimize the same quadratic energy exactly, so the
energy is non-increasing per alternation; the system matrix is constant
across alternations and factorized once.
"""

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.linalg import factorized


class SingularSystem(ValueError):
    """The control set leaves the position solve underconstrained."""


def _neighbor_weights(mesh, kind):
    """Directed weights k[i][j] over the 1-ring; 'uniform' is 1/|N_i|,
    'cotangent' the symmetric half cotangent clamped at zero."""
    adjacency = mesh.adjacency()
    if kind == "uniform":
        return [
            {j: 1.0 / len(nbrs) for j in nbrs} if nbrs else {}
            for nbrs in adjacency
        ]
    if kind != "cotangent":
        raise ValueError(f"unknown neighbor weighting {kind!r}")
    verts = mesh.vertices
    weights = [dict() for _ in range(mesh.n_vertices)]
    for f in mesh.faces:
        for a, b, c in ((0, 1, 2), (1, 2, 0), (2, 0, 1)):
            i, j, k = f[a], f[b], f[c]
            # angle at k opposes edge (i, j)
            u = verts[i] - verts[k]
            v = verts[j] - verts[k]
            cross = np.linalg.norm(np.cross(u, v))
            cot = float(u @ v) / max(cross, 1e-12)
            half = max(0.5 * cot, 0.0)
            weights[i][j] = weights[i].get(j, 0.0) + half
            weights[j][i] = weights[j].get(i, 0.0) + half
    return weights


def arap_energy(rest, current, rotations, weights, control_idx, control_pos,
                control_weight=1.0):
    total = 0.0
    for i, nbrs in enumerate(weights):
        for j, k in nbrs.items():
            e = rest[i] - rest[j]
            e_hat = current[i] - current[j]
            r = e_hat - rotations[i] @ e
            total += k * float(r @ r)
    d = current[control_idx] - control_pos
    total += control_weight * float((d * d).sum())
    return total


def _fit_rotations(rest, current, weights):
    n = len(rest)
    covs = np.zeros((n, 3, 3))
    for i, nbrs in enumerate(weights):
        for j, k in nbrs.items():
            e = rest[i] - rest[j]
            e_hat = current[i] - current[j]
            covs[i] += k * np.outer(e, e_hat)
    u, _, vt = np.linalg.svd(covs)
    rots = np.transpose(vt, (0, 2, 1)) @ np.transpose(u, (0, 2, 1))
    dets = np.linalg.det(rots)
    flip = dets < 0
    if flip.any():
        vt_fixed = vt.copy()
        vt_fixed[flip, -1, :] *= -1.0
        rots[flip] = (
            np.transpose(vt_fixed[flip], (0, 2, 1))
            @ np.transpose(u[flip], (0, 2, 1))
        )
    return rots


def arap_deform(
    mesh,
    control_targets,
    neighbor_weights="uniform",
    iters=10,
    control_weight=1.0,
    tol=1e-12,
):
    """Deform ``mesh`` so the control vertices approach their targets while
    local neighborhoods move as rigidly as possible.

    Args:
        control_targets: (indices, positions) arrays; must be non-empty.
        neighbor_weights: 'uniform', 'cotangent', or precomputed directed
            weight dicts as produced here.

    Returns (deformed vertices (V, 3), energy history per alternation).
    """
    control_idx = np.asarray(control_targets[0], dtype=np.int64)
    control_pos = np.asarray(control_targets[1], dtype=np.float64)
    if control_idx.size == 0:
        raise SingularSystem("ARAP needs a non-empty control set")
    if control_pos.shape != (control_idx.size, 3):
        raise SingularSystem("control positions must be (M, 3)")
    rest = mesh.vertices.copy()
    n = len(rest)
    weights = (
        _neighbor_weights(mesh, neighbor_weights)
        if isinstance(neighbor_weights, str)
        else neighbor_weights
    )

    # constant system matrix: Laplacian-style assembly + control diagonal
    rows, cols, vals = [], [], []
    diag = np.zeros(n)
    for i, nbrs in enumerate(weights):
        for j, k in nbrs.items():
            diag[i] += k
            diag[j] += k
            rows.extend((i, j))
            cols.extend((j, i))
            vals.extend((-k, -k))
    diag[control_idx] += control_weight
    rows.extend(range(n))
    cols.extend(range(n))
    vals.extend(diag)
    matrix = csr_matrix((vals, (rows, cols)), shape=(n, n)).tocsc()
    try:
        solve = factorized(matrix)
    except RuntimeError as exc:
        raise SingularSystem(f"position system not factorizable: {exc}") from None

    current = rest.copy()
    history = []
    for _ in range(iters):
        rots = _fit_rotations(rest, current, weights)
        rhs = np.zeros((n, 3))
        for i, nbrs in enumerate(weights):
            for j, k in nbrs.items():
                term = k * (rots[i] @ (rest[i] - rest[j]))
                rhs[i] += term
                rhs[j] -= term
        rhs[control_idx] += control_weight * control_pos
        new = np.column_stack([solve(rhs[:, c]) for c in range(3)])
        if not np.isfinite(new).all():
            raise SingularSystem("position solve produced non-finite values")
        current = new
        history.append(
            arap_energy(
                rest, current, rots, weights, control_idx, control_pos,
                control_weight,
            )
        )
        if len(history) > 1 and history[-2] - history[-1] < tol:
            break
    return current, history
