"""Repeated-trial evaluation producing a report with 95% confidence
intervals: FID, recognition accuracy, diversity, multimodality.

Each trial samples real motions from the dataset with replacement, draws
the same number of generated motions with matching intended actions, and
computes all four metrics; trials use seeds spawned from the root seed so
they could run in parallel without changing the result.
"""

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from ..tvae import generate_batch
from .classifier import extract_features_batch, recognition_accuracy
from .scores import diversity, fid_with_info, multimodality

METRIC_NAMES = ("fid", "accuracy", "diversity", "multimodality")


@dataclass
class MetricsReport:
    means: dict
    ci95: dict
    trials: int
    samples: int
    fid_regularized_trials: int = 0
    per_trial: dict = field(default_factory=dict)
    label: str = ""

    @property
    def fid(self):
        return self.means["fid"]

    @property
    def accuracy(self):
        return self.means["accuracy"]

    @property
    def diversity(self):
        return self.means["diversity"]

    @property
    def multimodality(self):
        return self.means["multimodality"]

    def row(self):
        """Table-style row: metric +- half-width of the 95% interval."""
        cells = [
            f"{name}: {self.means[name]:.3f} ± {self.ci95[name]:.3f}"
            for name in METRIC_NAMES
        ]
        prefix = f"{self.label}  " if self.label else ""
        return prefix + "  ".join(cells)

    def to_dict(self):
        return {
            "label": self.label,
            "trials": self.trials,
            "samples": self.samples,
            "means": self.means,
            "ci95": self.ci95,
            "fid_regularized_trials": self.fid_regularized_trials,
            "per_trial": {k: list(v) for k, v in self.per_trial.items()},
        }

    def save_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    def save_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["metric", "mean", "ci95", "trials", "samples"])
            for name in METRIC_NAMES:
                writer.writerow(
                    [name, self.means[name], self.ci95[name], self.trials,
                     self.samples]
                )


def _report(per_trial, trials, samples, regularized, label):
    means = {}
    ci95 = {}
    for name in METRIC_NAMES:
        vals = np.asarray(per_trial[name], dtype=np.float64)
        means[name] = float(vals.mean())
        ci95[name] = float(
            1.96 * vals.std(ddof=1) / np.sqrt(len(vals)) if len(vals) > 1 else 0.0
        )
    return MetricsReport(
        means=means,
        ci95=ci95,
        trials=trials,
        samples=samples,
        fid_regularized_trials=regularized,
        per_trial=per_trial,
        label=label,
    )


def _by_class(features, labels, vocab):
    return {
        action: features[[i for i, a in enumerate(labels) if a == action]]
        for action in vocab
        if any(a == action for a in labels)
    }


def evaluate(
    classifier,
    model,
    dataset,
    trials=20,
    samples=3000,
    s_d=200,
    s_m=20,
    seed=0,
    window=None,
    label="",
):
    """Evaluate a generator against real motions; returns a MetricsReport."""
    lengths = [c.n_frames for c in dataset.clips]
    window = window or min(lengths)
    per_trial = {name: [] for name in METRIC_NAMES}
    regularized = 0
    seeds = np.random.SeedSequence(seed).spawn(trials)
    for trial, seq in enumerate(seeds):
        rng = np.random.default_rng(seq)
        idx = rng.choice(len(dataset.clips), size=samples, replace=True)
        real_joints = np.stack([dataset.clips[i].joints[:window] for i in idx])
        actions = [dataset.clips[i].action for i in idx]
        gen_seed = int(rng.integers(2**31))
        motions = generate_batch(model, actions, window, gen_seed, want_lie=False)
        gen_joints = np.stack([m.joints for m in motions])

        real_feats = extract_features_batch(classifier, real_joints)
        gen_feats = extract_features_batch(classifier, gen_joints)
        value, was_regularized = fid_with_info(real_feats, gen_feats)
        regularized += int(was_regularized)
        sub_seed = int(rng.integers(2**31))
        per_trial["fid"].append(value)
        per_trial["accuracy"].append(
            recognition_accuracy(classifier, gen_joints, actions)
        )
        per_trial["diversity"].append(diversity(gen_feats, s_d, seed=sub_seed))
        per_trial["multimodality"].append(
            multimodality(
                _by_class(gen_feats, actions, dataset.action_vocab),
                s_m,
                seed=sub_seed,
            )
        )
    return _report(per_trial, trials, samples, regularized, label)


def evaluate_real_baseline(
    classifier,
    dataset,
    trials=20,
    samples=3000,
    s_d=200,
    s_m=20,
    seed=0,
    window=None,
    label="real motions",
):
    """The real-vs-real reference row: FID between two independent samples
    of the dataset plus accuracy/diversity/multimodality of real motions."""
    lengths = [c.n_frames for c in dataset.clips]
    window = window or min(lengths)
    per_trial = {name: [] for name in METRIC_NAMES}
    regularized = 0
    seeds = np.random.SeedSequence(seed).spawn(trials)
    for seq in seeds:
        rng = np.random.default_rng(seq)
        idx_a = rng.choice(len(dataset.clips), size=samples, replace=True)
        idx_b = rng.choice(len(dataset.clips), size=samples, replace=True)
        joints_a = np.stack([dataset.clips[i].joints[:window] for i in idx_a])
        joints_b = np.stack([dataset.clips[i].joints[:window] for i in idx_b])
        actions_a = [dataset.clips[i].action for i in idx_a]
        feats_a = extract_features_batch(classifier, joints_a)
        feats_b = extract_features_batch(classifier, joints_b)
        value, was_regularized = fid_with_info(feats_a, feats_b)
        regularized += int(was_regularized)
        sub_seed = int(rng.integers(2**31))
        per_trial["fid"].append(value)
        per_trial["accuracy"].append(
            recognition_accuracy(classifier, joints_a, actions_a)
        )
        per_trial["diversity"].append(diversity(feats_a, s_d, seed=sub_seed))
        per_trial["multimodality"].append(
            multimodality(
                _by_class(feats_a, actions_a, dataset.action_vocab),
                s_m,
                seed=sub_seed,
            )
        )
    return _report(per_trial, trials, samples, regularized, label)
