"""Motion dataset container, the JSON-lines file format, downsampling, and
conversion to fixed-length training tensors.

File format (one JSON object per line, diffable and streamable):
  line 1            {"type": "header", "skeleton": {...},
                     "skeleton_hash": "...", "action_vocab": [...]}
  following lines   {"type": "clip", "action": str, "subject": int,
                     "fps": float, "joints": [[[x, y, z] * J] * T]}
"""

import json
import math
from dataclasses import dataclass, field

import numpy as np

from ..kinematics import KinematicTree, root_trajectory


class DatasetError(ValueError):
    pass


class SchemaViolation(DatasetError):
    def __init__(self, message, line=None):
        self.line = line
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(prefix + message)


class EmptyDataset(DatasetError):
    pass


class UnknownAction(DatasetError):
    pass


@dataclass(frozen=True, eq=False)
class MotionClip:
    joints: np.ndarray  # (T, J, 3)
    action: str
    subject: int
    fps: float

    def __post_init__(self):
        joints = np.asarray(self.joints, dtype=np.float64)
        if joints.ndim != 3 or joints.shape[2] != 3:
            raise SchemaViolation(f"clip joints must be (T, J, 3), got {joints.shape}")
        joints.setflags(write=False)
        object.__setattr__(self, "joints", joints)

    @property
    def n_frames(self):
        return self.joints.shape[0]


@dataclass(frozen=True, eq=False)
class MotionDataset:
    clips: tuple
    skeleton: KinematicTree
    action_vocab: tuple

    def __post_init__(self):
        object.__setattr__(self, "clips", tuple(self.clips))
        object.__setattr__(self, "action_vocab", tuple(self.action_vocab))
        vocab = set(self.action_vocab)
        for i, clip in enumerate(self.clips):
            if clip.action not in vocab:
                raise SchemaViolation(
                    f"clip {i} action {clip.action!r} not in vocabulary"
                )
            if clip.joints.shape[1] != self.skeleton.n_joints:
                raise SchemaViolation(
                    f"clip {i} has {clip.joints.shape[1]} joints, skeleton has "
                    f"{self.skeleton.n_joints}"
                )

    def __len__(self):
        return len(self.clips)

    def action_index(self, action):
        try:
            return self.action_vocab.index(action)
        except ValueError:
            raise UnknownAction(
                f"action {action!r} not in vocabulary {list(self.action_vocab)}"
            ) from None

    def subjects(self):
        return sorted({c.subject for c in self.clips})

    def filter(self, predicate):
        kept = [c for c in self.clips if predicate(c)]
        return MotionDataset(kept, self.skeleton, self.action_vocab)

    def split_by_subject(self, test_fraction=0.2, seed=0):
        """Subject-disjoint train/test split (default 80/20)."""
        subjects = self.subjects()
        rng = np.random.default_rng(seed)
        order = list(rng.permutation(subjects))
        n_test = max(1, int(round(test_fraction * len(order)))) if len(order) > 1 else 0
        test_set = set(order[:n_test])
        train = self.filter(lambda c: c.subject not in test_set)
        test = self.filter(lambda c: c.subject in test_set)
        return train, test


def save(dataset, path):
    with open(path, "w") as fh:
        header = {
            "type": "header",
            "skeleton": dataset.skeleton.to_dict(),
            "skeleton_hash": dataset.skeleton.spec_hash(),
            "action_vocab": list(dataset.action_vocab),
        }
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        for clip in dataset.clips:
            record = {
                "type": "clip",
                "action": clip.action,
                "subject": int(clip.subject),
                "fps": float(clip.fps),
                "joints": clip.joints.tolist(),
            }
            fh.write(json.dumps(record, sort_keys=True) + "\n")


def load(path):
    clips = []
    skeleton = None
    vocab = None
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            raw = raw.strip()
            if not raw:
                continue
            try:
                record = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise SchemaViolation(f"invalid JSON ({exc.msg})", line=lineno) from None
            kind = record.get("type")
            if lineno == 1:
                if kind != "header":
                    raise SchemaViolation("first line must be the header", line=1)
                try:
                    skeleton = KinematicTree.from_dict(record["skeleton"])
                    vocab = tuple(record["action_vocab"])
                except (KeyError, ValueError) as exc:
                    raise SchemaViolation(f"bad header: {exc}", line=1) from None
                declared = record.get("skeleton_hash")
                if declared is not None and declared != skeleton.spec_hash():
                    raise SchemaViolation("skeleton hash mismatch", line=1)
                continue
            if kind != "clip":
                raise SchemaViolation(f"unexpected record type {kind!r}", line=lineno)
            try:
                joints = np.asarray(record["joints"], dtype=np.float64)
                clip = MotionClip(
                    joints=joints,
                    action=record["action"],
                    subject=int(record["subject"]),
                    fps=float(record["fps"]),
                )
            except (KeyError, TypeError, ValueError) as exc:
                raise SchemaViolation(f"bad clip: {exc}", line=lineno) from None
            if not np.isfinite(joints).all():
                raise SchemaViolation("non-finite joint coordinates", line=lineno)
            if joints.shape[1] != skeleton.n_joints:
                raise SchemaViolation(
                    f"clip has {joints.shape[1]} joints, skeleton has "
                    f"{skeleton.n_joints}",
                    line=lineno,
                )
            if clip.action not in vocab:
                raise SchemaViolation(
                    f"action {clip.action!r} not in vocabulary", line=lineno
                )
            clips.append(clip)
    if skeleton is None or not clips:
        raise EmptyDataset(f"no clips in {path}")
    return MotionDataset(clips, skeleton, vocab)


def downsample(dataset, src_fps, dst_fps):
    """Pick frames by nearest source-time index; length becomes
    ceil(T * dst / src). Identity when src == dst."""
    if dst_fps > src_fps:
        raise DatasetError("downsample requires src_fps >= dst_fps")
    clips = []
    for clip in dataset.clips:
        t = clip.n_frames
        n_out = math.ceil(t * dst_fps / src_fps)
        idx = np.minimum(
            np.round(np.arange(n_out) * src_fps / dst_fps).astype(int), t - 1
        )
        clips.append(
            MotionClip(clip.joints[idx], clip.action, clip.subject, dst_fps)
        )
    return MotionDataset(clips, dataset.skeleton, dataset.action_vocab)


@dataclass(frozen=True, eq=False)
class TrainingTensors:
    """Fixed-window arrays for TVAE / classifier training.

    poses:       (N, T, D) pose vectors (flattened absolute joints, plus
                 root-velocity channels for GLMI variants)
    velocities:  (N, T, 3) frame-to-frame root displacements, first 0
    masks:       (N, T) 1 for real frames, 0 for padding
    labels:      (N, C) one-hot actions
    counters:    (T,) progress values t/T for t = 1..T
    """

    poses: np.ndarray
    velocities: np.ndarray
    masks: np.ndarray
    labels: np.ndarray
    counters: np.ndarray
    joints: np.ndarray  # (N, T, J, 3) the windowed absolute joints
    variant: str
    action_vocab: tuple

    @property
    def pose_dim(self):
        return self.poses.shape[2]

    @property
    def n_sequences(self):
        return self.poses.shape[0]


GLMI_VARIANTS = ("glmi_m", "glmi_r")
VARIANTS = ("plain", "lie") + GLMI_VARIANTS


def to_training_tensors(dataset, variant, window, root_centered=False):
    """Window every clip to ``window`` frames and build training arrays.

    Short clips are padded by repeating the last frame, with the padding
    masked out of the loss; long clips are truncated to the window. With
    ``root_centered`` the root position is subtracted per frame (for data
    without trajectory annotations) and velocities are zeroed.
    """
    if variant not in VARIANTS:
        raise DatasetError(f"unknown variant {variant!r}; choices {VARIANTS}")
    if not dataset.clips:
        raise EmptyDataset("dataset has no clips")
    n = len(dataset.clips)
    n_joints = dataset.skeleton.n_joints
    root = dataset.skeleton.root_index
    joints = np.zeros((n, window, n_joints, 3))
    masks = np.zeros((n, window))
    labels = np.zeros((n, len(dataset.action_vocab)))
    for i, clip in enumerate(dataset.clips):
        t = min(clip.n_frames, window)
        joints[i, :t] = clip.joints[:t]
        if t < window:
            joints[i, t:] = clip.joints[t - 1]
        masks[i, :t] = 1.0
        labels[i, dataset.action_vocab.index(clip.action)] = 1.0

    velocities = np.zeros((n, window, 3))
    velocities[:, 1:] = np.diff(joints[:, :, root, :], axis=1)
    if root_centered:
        joints = joints - joints[:, :, root: root + 1, :]
        velocities = np.zeros_like(velocities)
    poses = joints.reshape(n, window, n_joints * 3)
    if variant in GLMI_VARIANTS:
        poses = np.concatenate([poses, velocities], axis=2)
    counters = np.arange(1, window + 1) / window
    return TrainingTensors(
        poses=poses,
        velocities=velocities,
        masks=masks,
        labels=labels,
        counters=counters,
        joints=joints,
        variant=variant,
        action_vocab=dataset.action_vocab,
    )
