"""Training objective and loop for the temporal VAE.

Per sequence, teacher forcing is drawn once from Bernoulli(p_tf) and holds
for every step; the KL weight rises linearly from its start value to the
configured end value over the epochs. All randomness (shuffling, forcing
draws, reparameterization noise) comes from one seeded generator.
"""

from dataclasses import dataclass
from types import SimpleNamespace

import numpy as np

from .. import autodiff as ad
from ..autodiff import AdamState, Tape, Tensor, adam_step, reparameterized_sample
from ..datasets import EmptyDataset, to_training_tensors
from .model import GLMI_VARIANTS

NORM_EPS = 1e-12  # keeps the per-joint norm differentiable at zero residual


@dataclass
class TrainConfig:
    epochs: int = 150
    batch_size: int = 128
    window: int = 16
    teacher_forcing_rate: float = 0.6
    kl_start: float = 0.001
    kl_end: float = 0.01
    lambda_align: float = 10.0
    lr: float = 2e-4
    beta1: float = 0.9
    beta2: float = 0.999
    weight_decay: float = 1e-5
    root_centered: bool = False
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.teacher_forcing_rate <= 1.0:
            raise ValueError("teacher_forcing_rate must lie in [0, 1]")
        if self.kl_start < 0 or self.kl_end < 0 or self.lambda_align < 0:
            raise ValueError("loss weights must be non-negative")

    def kl_weight(self, epoch):
        """Linear ramp reaching kl_end on the final epoch."""
        span = max(self.epochs - 1, 1)
        frac = min(epoch / span, 1.0)
        return self.kl_start + (self.kl_end - self.kl_start) * frac


@dataclass
class LossTerms:
    total: Tensor
    recon: Tensor
    kl: Tensor
    align: Tensor


def recon_per_sample(pred_joints, true_joints):
    """Eq.-style per-joint loss: sum over joints of the Euclidean error,
    one scalar per batch row."""
    diff = ad.sub(pred_joints, Tensor(np.asarray(true_joints)))
    return ad.sum_axis(ad.l2_norm(diff, axis=-1, eps=NORM_EPS), axis=1)


def kl_per_sample(mu_q, logvar_q, mu_p, logvar_p):
    """Diagonal-Gaussian KL summed over latent dims, one value per row."""
    var_ratio = ad.exp(ad.sub(logvar_q, logvar_p))
    delta_sq = ad.square(ad.sub(mu_q, mu_p))
    inv_var_p = ad.exp(ad.scale(logvar_p, -1.0))
    per_dim = ad.add(
        ad.sub(ad.sub(logvar_p, logvar_q), Tensor(np.ones(mu_q.shape))),
        ad.add(var_ratio, ad.mul(delta_sq, inv_var_p)),
    )
    return ad.scale(ad.sum_axis(per_dim, axis=1), 0.5)


def _masked_mean(values, mask_col, denom):
    return ad.scale(
        ad.tensor_sum(ad.mul(ad.reshape(values, mask_col.shape), mask_col)),
        1.0 / denom,
    )


def elbo_loss(model, batch, lambda_kl, lambda_align, noise, teacher_forcing):
    """Negative sequence ELBO over one batch.

    Args:
        batch: TrainingTensors (or any object with poses/joints/velocities/
            masks/labels/counters arrays).
        noise: (B, T, z_dim) standard-normal draws for reparameterization.
        teacher_forcing: (B,) 0/1 per-sequence forcing decisions.

    Returns LossTerms; ``total = recon + lambda_kl * kl + lambda_align *
    align`` with each term a masked mean over real frames (the alignment
    term is active only for movement-integration variants).
    """
    poses = batch.poses
    joints = batch.joints
    velocities = batch.velocities
    masks = batch.masks
    n_batch, n_steps = poses.shape[0], poses.shape[1]
    glmi = model.variant in GLMI_VARIANTS

    labels = Tensor(batch.labels)
    tf_col = Tensor(np.asarray(teacher_forcing, dtype=np.float64)[:, None])
    free_col = Tensor(1.0 - tf_col.data)
    denom = float(masks.sum())
    if denom == 0:
        raise EmptyDataset("all frames are masked out")

    state = model.init_state(n_batch)
    gen_prev = None  # previous generated pose vector (Tensor)
    gen_offset_prev = None
    gen_root_prev = None
    recon_sum = Tensor(np.zeros(()))
    kl_sum = Tensor(np.zeros(()))
    align_sum = Tensor(np.zeros(()))

    def mix(true_arr, gen_tensor):
        true_t = Tensor(true_arr)
        if gen_tensor is None:
            return true_t
        return ad.add(ad.mul(tf_col, true_t), ad.mul(free_col, gen_tensor))

    for t in range(n_steps):
        counter = Tensor(np.full((n_batch, 1), batch.counters[t]))
        mask_col = Tensor(masks[:, t: t + 1])

        mu_q, lv_q, state = model.posterior_step(
            Tensor(poses[:, t]), labels, counter, state
        )
        if t == 0:
            prev = Tensor(np.zeros((n_batch, model.pose_dim)))
            prev_offset = None
            prev_root = None
        else:
            prev = mix(poses[:, t - 1], gen_prev)
            if glmi:
                gt_offset = (
                    joints[:, t - 1] - joints[:, t - 1, :1, :]
                ).reshape(n_batch, model.joint_dim)
                prev_offset = mix(gt_offset, gen_offset_prev)
                prev_root = mix(joints[:, t - 1, 0, :], gen_root_prev)
            else:
                prev_offset = prev_root = None

        encoded_prev = model.encode(prev, labels, counter)
        mu_p, lv_p, state = model.prior_step(
            None, labels, counter, state, encoded=encoded_prev
        )
        z = reparameterized_sample(mu_q, lv_q, Tensor(noise[:, t]))
        pred_joints, aux, state = model.generator_step(
            z,
            None,
            labels,
            counter,
            state,
            prev_offset_pose=prev_offset,
            prev_root=prev_root,
            encoded=encoded_prev,
        )

        recon_sum = ad.add(
            recon_sum,
            ad.tensor_sum(
                ad.mul(
                    ad.reshape(recon_per_sample(pred_joints, joints[:, t]),
                               (n_batch, 1)),
                    mask_col,
                )
            ),
        )
        kl_sum = ad.add(
            kl_sum,
            ad.tensor_sum(
                ad.mul(
                    ad.reshape(kl_per_sample(mu_q, lv_q, mu_p, lv_p), (n_batch, 1)),
                    mask_col,
                )
            ),
        )
        if glmi:
            v_err = ad.l2_norm(
                ad.sub(aux["velocity"], Tensor(velocities[:, t])),
                axis=-1,
                eps=NORM_EPS,
            )
            align_sum = ad.add(
                align_sum,
                ad.tensor_sum(ad.mul(ad.reshape(v_err, (n_batch, 1)), mask_col)),
            )

        # feedback for the next step's free-running branch
        flat = ad.reshape(pred_joints, (n_batch, model.joint_dim))
        if glmi:
            gen_prev = ad.concat([flat, aux["velocity"]], axis=1)
            gen_offset_prev = aux["offset_pose"]
            gen_root_prev = aux["root"]
        else:
            gen_prev = flat

    recon = ad.scale(recon_sum, 1.0 / denom)
    kl = ad.scale(kl_sum, 1.0 / denom)
    align = ad.scale(align_sum, 1.0 / denom)
    total = ad.add(
        recon, ad.add(ad.scale(kl, lambda_kl), ad.scale(align, lambda_align))
    )
    return LossTerms(total=total, recon=recon, kl=kl, align=align)


@dataclass
class EpochStats:
    epoch: int
    kl_weight: float
    total: float
    recon: float
    kl: float
    align: float


def _batch_view(tensors, idx):
    """A light slice of TrainingTensors along the sequence axis."""
    return SimpleNamespace(
        poses=tensors.poses[idx],
        joints=tensors.joints[idx],
        velocities=tensors.velocities[idx],
        masks=tensors.masks[idx],
        labels=tensors.labels[idx],
        counters=tensors.counters,
    )


def train(model, dataset, config, log=None):
    """Train in place; returns the list of per-epoch EpochStats."""
    if len(dataset) == 0:
        raise EmptyDataset("cannot train on an empty dataset")
    tensors = to_training_tensors(
        dataset, model.variant, config.window, root_centered=config.root_centered
    )
    rng = np.random.default_rng(config.seed)
    state = AdamState()
    history = []
    n = tensors.n_sequences
    for epoch in range(config.epochs):
        kl_w = config.kl_weight(epoch)
        order = rng.permutation(n)
        sums = np.zeros(4)
        n_batches = 0
        for start in range(0, n, config.batch_size):
            idx = order[start: start + config.batch_size]
            view = _batch_view(tensors, idx)
            forcing = (
                rng.random(len(idx)) < config.teacher_forcing_rate
            ).astype(np.float64)
            noise = rng.standard_normal((len(idx), config.window, model.z_dim))
            model.params.zero_grad()
            with Tape() as tape:
                terms = elbo_loss(
                    model, view, kl_w, config.lambda_align, noise, forcing
                )
            tape.backward(terms.total)
            adam_step(
                dict(model.params.items()),
                model.params.grads(),
                state,
                lr=config.lr,
                beta1=config.beta1,
                beta2=config.beta2,
                weight_decay=config.weight_decay,
            )
            sums += [
                terms.total.item(),
                terms.recon.item(),
                terms.kl.item(),
                terms.align.item(),
            ]
            n_batches += 1
        stats = EpochStats(
            epoch, kl_w, *(sums / n_batches)
        )
        history.append(stats)
        if log is not None:
            log(stats)
    return history
