"""Template -> scan correspondences and the displacement map.

Each template vertex takes its nearest target vertex; pairs whose body
parts disagree are dropped, and when several template vertices claim the
same target vertex only the closest pair is kept. The displacements let a
reposed template carry the scan's detail along: target controls are the
reposed template positions plus the stored offsets.
"""

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree


class EmptyResult(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class CorrespondenceSet:
    template_indices: np.ndarray  # (M,)
    target_indices: np.ndarray  # (M,)
    displacements: np.ndarray  # (M, 3) target minus template, at fit pose

    def __post_init__(self):
        ti = np.asarray(self.template_indices, dtype=np.int64)
        gi = np.asarray(self.target_indices, dtype=np.int64)
        d = np.asarray(self.displacements, dtype=np.float64)
        if len(ti) != len(gi) or d.shape != (len(ti), 3):
            raise ValueError("inconsistent correspondence arrays")
        if len(np.unique(ti)) != len(ti):
            raise ValueError("a template vertex may appear at most once")
        object.__setattr__(self, "template_indices", ti)
        object.__setattr__(self, "target_indices", gi)
        object.__setattr__(self, "displacements", d)

    def __len__(self):
        return len(self.template_indices)


def build_correspondences(
    template_posed, target_mesh, template_part_labels=None, max_distance=None
):
    """Nearest-target pairing per template vertex with part filtering.

    ``template_posed`` is the fitted template's (V, 3) vertex array; labels
    are compared only when both sides carry them.
    """
    template_posed = np.asarray(template_posed, dtype=np.float64)
    target_v = target_mesh.vertices
    dist, nearest = cKDTree(target_v).query(template_posed)
    keep = np.ones(len(template_posed), dtype=bool)
    if max_distance is not None:
        keep &= dist <= max_distance
    if template_part_labels is not None and target_mesh.part_labels is not None:
        keep &= (
            np.asarray(template_part_labels)[np.arange(len(template_posed))]
            == target_mesh.part_labels[nearest]
        )
    order = np.flatnonzero(keep)
    if order.size == 0:
        raise EmptyResult("every candidate pair was filtered out")
    # resolve contested target vertices in favor of the closest pair
    best = {}
    for i in order:
        j = int(nearest[i])
        if j not in best or dist[i] < dist[best[j]]:
            best[j] = int(i)
    template_idx = np.array(sorted(best.values()), dtype=np.int64)
    target_idx = nearest[template_idx]
    displacements = target_v[target_idx] - template_posed[template_idx]
    return CorrespondenceSet(template_idx, target_idx, displacements)


def repose_targets(correspondences, template_reposed):
    """Control targets for the scan: reposed template + displacement map.

    Returns (target vertex indices, target positions).
    """
    template_reposed = np.asarray(template_reposed, dtype=np.float64)
    positions = (
        template_reposed[correspondences.template_indices]
        + correspondences.displacements
    )
    return correspondences.target_indices.copy(), positions
