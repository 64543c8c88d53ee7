"""Recurrent action classifier doubling as the motion feature extractor.

Two GRU layers (hidden 128) over per-frame pose vectors, a linear head
over the action classes; the feature of a motion is the final recurrent
layer's activation at the last frame. Pose vectors are root-centered
joint coordinates plus the root velocity, so features are translation
invariant but still see the trajectory.
"""

from dataclasses import dataclass

import numpy as np

from .. import autodiff as ad
from ..autodiff import (
    AdamState,
    GruParams,
    Linear,
    Parameters,
    Tape,
    Tensor,
    adam_step,
    gru_cell,
    log_softmax,
)
from ..datasets import EmptyDataset


@dataclass
class ClassifierConfig:
    epochs: int = 80
    batch_size: int = 64
    hidden_dim: int = 128
    lr: float = 1e-3
    weight_decay: float = 1e-5
    holdout_fraction: float = 0.2
    seed: int = 0


class MotionClassifier:
    def __init__(self, skeleton, action_vocab, hidden_dim=128, seed=0):
        self.skeleton = skeleton
        self.action_vocab = tuple(action_vocab)
        self.hidden_dim = hidden_dim
        self.seed = seed
        self.holdout_accuracy = None
        self.input_dim = 3 * skeleton.n_joints + 3
        rng = np.random.default_rng(seed)
        p = Parameters()
        self.params = p
        self.gru1 = GruParams.create(p, "gru1", self.input_dim, hidden_dim, rng)
        self.gru2 = GruParams.create(p, "gru2", hidden_dim, hidden_dim, rng)
        self.head = Linear(p, "head", hidden_dim, len(self.action_vocab), rng)

    @property
    def feature_dim(self):
        return self.hidden_dim

    def pose_vectors(self, joints):
        """(B, T, J, 3) -> (B, T, D) root-centered poses + root velocity."""
        joints = np.asarray(joints, dtype=np.float64)
        root = self.skeleton.root_index
        centered = joints - joints[:, :, root: root + 1, :]
        vel = np.zeros((joints.shape[0], joints.shape[1], 3))
        vel[:, 1:] = np.diff(joints[:, :, root, :], axis=1)
        flat = centered.reshape(joints.shape[0], joints.shape[1], -1)
        return np.concatenate([flat, vel], axis=2)

    def _run(self, joints):
        """Return (features Tensor (B, H), logits Tensor (B, C))."""
        vectors = self.pose_vectors(joints)
        batch, n_steps = vectors.shape[0], vectors.shape[1]
        h1 = Tensor(np.zeros((batch, self.hidden_dim)))
        h2 = Tensor(np.zeros((batch, self.hidden_dim)))
        for t in range(n_steps):
            x = Tensor(vectors[:, t])
            h1 = gru_cell(x, h1, self.gru1)
            h2 = gru_cell(h1, h2, self.gru2)
        return h2, self.head(h2)

    def logits(self, joints):
        return self._run(joints)[1].data

    def predict(self, joints):
        return np.argmax(self.logits(joints), axis=1)


def extract_features(classifier, motion_joints):
    """Feature of one motion (T, J, 3): final-layer activation at the last
    frame."""
    joints = np.asarray(motion_joints, dtype=np.float64)
    if joints.ndim != 3:
        raise ValueError(f"expected one motion (T, J, 3), got {joints.shape}")
    return classifier._run(joints[None])[0].data[0].copy()


def extract_features_batch(classifier, joints):
    return classifier._run(np.asarray(joints, dtype=np.float64))[0].data.copy()


def recognition_accuracy(classifier, motions, intended_labels):
    """Fraction of motions classified as their intended action."""
    joints = np.asarray(motions, dtype=np.float64)
    intended = np.array(
        [classifier.action_vocab.index(a) for a in intended_labels]
    )
    return float((classifier.predict(joints) == intended).mean())


def _windowed(dataset, window=None):
    """Stack clips to a common length (shortest clip by default)."""
    lengths = [c.n_frames for c in dataset.clips]
    window = window or min(lengths)
    joints = np.stack([c.joints[:window] for c in dataset.clips])
    labels = np.array(
        [dataset.action_vocab.index(c.action) for c in dataset.clips]
    )
    return joints, labels


def train_classifier(dataset, config=None, log=None):
    """Train on a subject-disjoint split; the held-out accuracy lands on
    ``classifier.holdout_accuracy``."""
    config = config or ClassifierConfig()
    if len(dataset) == 0:
        raise EmptyDataset("cannot train a classifier on an empty dataset")
    train_set, holdout = dataset.split_by_subject(
        config.holdout_fraction, seed=config.seed
    )
    if len(holdout) == 0:
        train_set = holdout = dataset
    classifier = MotionClassifier(
        dataset.skeleton,
        dataset.action_vocab,
        hidden_dim=config.hidden_dim,
        seed=config.seed,
    )
    joints, labels = _windowed(train_set)
    rng = np.random.default_rng(config.seed)
    state = AdamState()
    n = len(joints)
    for epoch in range(config.epochs):
        order = rng.permutation(n)
        epoch_loss = 0.0
        n_batches = 0
        for start in range(0, n, config.batch_size):
            idx = order[start: start + config.batch_size]
            classifier.params.zero_grad()
            with Tape() as tape:
                _, logits = classifier._run(joints[idx])
                logp = log_softmax(logits)
                picked = ad.gather_rows(
                    ad.reshape(logp, (logp.shape[0] * logp.shape[1],)),
                    np.arange(len(idx)) * logp.shape[1] + labels[idx],
                )
                loss = ad.scale(ad.tensor_sum(picked), -1.0 / len(idx))
            tape.backward(loss)
            adam_step(
                dict(classifier.params.items()),
                classifier.params.grads(),
                state,
                lr=config.lr,
                weight_decay=config.weight_decay,
            )
            epoch_loss += loss.item()
            n_batches += 1
        if log is not None:
            log(epoch, epoch_loss / n_batches)
    hold_joints, hold_labels = _windowed(holdout)
    preds = classifier.predict(hold_joints)
    classifier.holdout_accuracy = float((preds == hold_labels).mean())
    return classifier
