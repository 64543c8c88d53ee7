"""Conditioned temporal VAE over pose sequences.

Three networks around one shared input encoder: a posterior fed the current
pose, a learned prior fed the previous pose, and a recurrent generator that
decodes the latent into the next pose through one of four pose-decoding
variants:

  plain    joint coordinates regressed directly
  lie      axis-angle bone vectors + root position, joints via FK with the
           skeleton's fixed bone lengths
  glmi_m   lie pose pinned at the origin; root velocity inferred from the
           consecutive local poses by an MLP (movement integration)
  glmi_r   same with a GRU backbone for the velocity

Every network input is the concatenation of a pose vector, the one-hot
action, and a progress counter t/T.
"""

from dataclasses import dataclass, replace

import numpy as np

from .. import autodiff as ad
from ..autodiff import MLP, GruParams, Linear, Parameters, Tensor, gru_cell
from ..kinematics import wrap_to_pi

VARIANTS = ("plain", "lie", "glmi_m", "glmi_r")
GLMI_VARIANTS = ("glmi_m", "glmi_r")

LOGVAR_BOUND = 10.0  # safety clamp on emitted log-variances


@dataclass
class StepState:
    """Recurrent state carried across generation steps (one Tensor each)."""

    posterior_h: Tensor
    prior_h: Tensor
    gen_h1: Tensor
    gen_h2: Tensor
    glmi_h: Tensor


class Action2MotionModel:
    """Posterior/prior/generator networks plus a pose-decoding variant.

    Default dimensions follow the reference setup: encoder output 128,
    GRU hidden 128 (generator has two layers), latent 30, movement-feature
    20. Smaller values are accepted for toy-scale gradient checking.
    """

    def __init__(
        self,
        skeleton,
        action_vocab,
        variant="glmi_m",
        z_dim=30,
        h_o_dim=20,
        hidden_dim=128,
        enc_dim=128,
        seed=0,
    ):
        if variant not in VARIANTS:
            raise ValueError(f"unknown pose-decoder variant {variant!r}")
        if skeleton.root_index != 0:
            raise ValueError("decoders assume the root joint at index 0")
        self.skeleton = skeleton
        self.action_vocab = tuple(action_vocab)
        self.variant = variant
        self.z_dim = z_dim
        self.h_o_dim = h_o_dim
        self.hidden_dim = hidden_dim
        self.enc_dim = enc_dim
        self.seed = seed
        self.wrap_events = 0  # emitted lie vectors wrapped back to <= pi

        n_joints = skeleton.n_joints
        n_bones = skeleton.n_bones
        self.n_joints = n_joints
        self.joint_dim = 3 * n_joints
        self.pose_dim = self.joint_dim + (3 if variant in GLMI_VARIANTS else 0)
        c = len(self.action_vocab)
        in_dim = self.pose_dim + c + 1

        if variant == "plain":
            out_dim = 3 * n_joints
        elif variant == "lie":
            out_dim = 3 * n_bones + 3
        else:
            out_dim = 3 * n_bones + h_o_dim

        rng = np.random.default_rng(seed)
        p = Parameters()
        self.params = p
        self.encoder = MLP(p, "enc", (in_dim, enc_dim, enc_dim), rng)
        self.post_gru = GruParams.create(p, "post_gru", enc_dim, hidden_dim, rng)
        self.post_head = Linear(p, "post_head", hidden_dim, 2 * z_dim, rng)
        self.prior_gru = GruParams.create(p, "prior_gru", enc_dim, hidden_dim, rng)
        self.prior_head = Linear(p, "prior_head", hidden_dim, 2 * z_dim, rng)
        self.gen_gru1 = GruParams.create(
            p, "gen_gru1", enc_dim + z_dim, hidden_dim, rng
        )
        self.gen_gru2 = GruParams.create(p, "gen_gru2", hidden_dim, hidden_dim, rng)
        self.decoder = MLP(p, "dec", (hidden_dim, enc_dim, out_dim), rng)
        if variant == "glmi_m":
            glmi_in = 2 * self.joint_dim + h_o_dim
            self.glmi_mlp = MLP(p, "glmi_mlp", (glmi_in, 128, 3), rng)
        elif variant == "glmi_r":
            glmi_in = 2 * self.joint_dim + h_o_dim
            self.glmi_gru = GruParams.create(p, "glmi_gru", glmi_in, 128, rng)
            self.glmi_head = Linear(p, "glmi_head", 128, 3, rng)

    # ------------------------------------------------------------- plumbing

    @property
    def n_actions(self):
        return len(self.action_vocab)

    def action_one_hot(self, action):
        from ..datasets import UnknownAction

        if action not in self.action_vocab:
            raise UnknownAction(
                f"action {action!r} not in vocabulary {list(self.action_vocab)}"
            )
        vec = np.zeros(self.n_actions)
        vec[self.action_vocab.index(action)] = 1.0
        return vec

    def init_state(self, batch):
        def h(dim):
            return Tensor(np.zeros((batch, dim)))

        return StepState(
            posterior_h=h(self.hidden_dim),
            prior_h=h(self.hidden_dim),
            gen_h1=h(self.hidden_dim),
            gen_h2=h(self.hidden_dim),
            glmi_h=h(128) if self.variant == "glmi_r" else None,
        )

    def encode(self, pose, action, counter):
        """Shared encoder over (pose vector, one-hot action, t/T)."""
        return self.encoder(ad.concat([pose, action, counter], axis=1))

    def _dist_head(self, head, h):
        out = head(h)
        mu = ad.slice_axis(out, 0, self.z_dim, axis=1)
        logvar = ad.clip(
            ad.slice_axis(out, self.z_dim, 2 * self.z_dim, axis=1),
            -LOGVAR_BOUND,
            LOGVAR_BOUND,
        )
        return mu, logvar

    # ------------------------------------------------------------- networks

    def posterior_step(self, pose, action, counter, state):
        """Posterior over z_t given the current pose; returns
        (mu, logvar, new_state)."""
        h = self.encode(pose, action, counter)
        new_h = gru_cell(h, state.posterior_h, self.post_gru)
        mu, logvar = self._dist_head(self.post_head, new_h)
        return mu, logvar, replace(state, posterior_h=new_h)

    def prior_step(self, prev_pose, action, counter, state, encoded=None):
        """Learned prior over z_t given the previous pose (zero at t=1)."""
        h = encoded if encoded is not None else self.encode(prev_pose, action, counter)
        new_h = gru_cell(h, state.prior_h, self.prior_gru)
        mu, logvar = self._dist_head(self.prior_head, new_h)
        return mu, logvar, replace(state, prior_h=new_h)

    def generator_step(
        self,
        z,
        prev_pose,
        action,
        counter,
        state,
        prev_offset_pose=None,
        prev_root=None,
        encoded=None,
    ):
        """Decode one pose. Returns (joints Tensor (B, J, 3), aux, state).

        ``aux`` carries the decoder-variant extras: emitted lie block, root,
        velocity, offset pose, movement feature.
        """
        h = encoded if encoded is not None else self.encode(prev_pose, action, counter)
        g_in = ad.concat([h, z], axis=1)
        h1 = gru_cell(g_in, state.gen_h1, self.gen_gru1)
        h2 = gru_cell(h1, state.gen_h2, self.gen_gru2)
        dec = self.decoder(h2)
        state = replace(state, gen_h1=h1, gen_h2=h2)
        if self.variant == "plain":
            joints, aux = self.decode_pose_plain(dec)
        elif self.variant == "lie":
            joints, aux = self.decode_pose_lie(dec)
        else:
            joints, aux, state = self.decode_pose_glmi(
                dec, prev_offset_pose, prev_root, state
            )
        return joints, aux, state

    # ------------------------------------------------------------- decoders

    def decode_pose_plain(self, dec):
        batch = dec.shape[0]
        if dec.shape[1] != 3 * self.n_joints:
            raise ad.ShapeMismatch(
                f"plain decoder output {dec.shape} != (B, {3 * self.n_joints})"
            )
        joints = ad.reshape(dec, (batch, self.n_joints, 3))
        return joints, {"root": ad.slice_axis(joints, 0, 1, axis=1)}

    def _lie_to_joint_vectors(self, lie_flat):
        """(B, 3N) lie block -> (B, J, 3) with a zero root-orientation row."""
        batch = lie_flat.shape[0]
        padded = ad.concat([Tensor(np.zeros((batch, 3))), lie_flat], axis=1)
        return ad.reshape(padded, (batch, self.n_joints, 3))

    def _fk(self, lie_flat, root):
        tree = self.skeleton
        return ad.fk(
            self._lie_to_joint_vectors(lie_flat),
            root,
            tree.bone_lengths,
            tree.parent_array,
            tree.topo_order,
        )

    def decode_pose_lie(self, dec):
        n_lie = 3 * self.skeleton.n_bones
        if dec.shape[1] != n_lie + 3:
            raise ad.ShapeMismatch(
                f"lie decoder output {dec.shape} != (B, {n_lie + 3})"
            )
        lie_flat = ad.slice_axis(dec, 0, n_lie, axis=1)
        root = ad.slice_axis(dec, n_lie, n_lie + 3, axis=1)
        joints = self._fk(lie_flat, root)
        return joints, {"lie": lie_flat, "root": root}

    def decode_pose_glmi(self, dec, prev_offset_pose, prev_root, state):
        """Movement integration: local pose from FK at the origin, root
        velocity from (current local pose, previous local pose, feature),
        final joints = local pose + previous root + velocity."""
        n_lie = 3 * self.skeleton.n_bones
        if dec.shape[1] != n_lie + self.h_o_dim:
            raise ad.ShapeMismatch(
                f"glmi decoder output {dec.shape} != (B, {n_lie + self.h_o_dim})"
            )
        batch = dec.shape[0]
        lie_flat = ad.slice_axis(dec, 0, n_lie, axis=1)
        h_o = ad.slice_axis(dec, n_lie, n_lie + self.h_o_dim, axis=1)
        offset_joints = self._fk(lie_flat, Tensor(np.zeros((batch, 3))))
        offset_flat = ad.reshape(offset_joints, (batch, self.joint_dim))
        if prev_offset_pose is None:
            prev_offset_pose = Tensor(np.zeros((batch, self.joint_dim)))
        if prev_root is None:
            prev_root = Tensor(np.zeros((batch, 3)))
        backbone_in = ad.concat([offset_flat, prev_offset_pose, h_o], axis=1)
        if self.variant == "glmi_m":
            velocity = self.glmi_mlp(backbone_in)
        else:
            new_glmi_h = gru_cell(backbone_in, state.glmi_h, self.glmi_gru)
            velocity = self.glmi_head(new_glmi_h)
            state = replace(state, glmi_h=new_glmi_h)
        new_root = ad.add(prev_root, velocity)
        joints = ad.add(offset_joints, ad.reshape(new_root, (batch, 1, 3)))
        aux = {
            "lie": lie_flat,
            "velocity": velocity,
            "offset_pose": offset_flat,
            "h_o": h_o,
            "root": new_root,
        }
        return joints, aux, state

    # ------------------------------------------------------------ reporting

    def wrapped_lie(self, lie_flat_data):
        """Renormalize emitted lie vectors to norm <= pi, counting wraps."""
        vecs = np.asarray(lie_flat_data).reshape(-1, self.skeleton.n_bones, 3)
        wrapped, count = wrap_to_pi(vecs)
        self.wrap_events += count
        return wrapped

    def meta(self):
        return {
            "variant": self.variant,
            "z_dim": self.z_dim,
            "h_o_dim": self.h_o_dim,
            "hidden_dim": self.hidden_dim,
            "enc_dim": self.enc_dim,
            "seed": self.seed,
            "action_vocab": list(self.action_vocab),
            "skeleton": self.skeleton.to_dict(),
            "skeleton_hash": self.skeleton.spec_hash(),
        }

    def save(self, path, extra_meta=None):
        meta = self.meta()
        if extra_meta:
            meta["extra"] = extra_meta
        ad.save_checkpoint(path, self.params.state_dict(), meta)

    @classmethod
    def load(cls, path):
        from ..kinematics import KinematicTree

        arrays, meta = ad.load_checkpoint(path)
        model = cls(
            skeleton=KinematicTree.from_dict(meta["skeleton"]),
            action_vocab=meta["action_vocab"],
            variant=meta["variant"],
            z_dim=meta["z_dim"],
            h_o_dim=meta["h_o_dim"],
            hidden_dim=meta["hidden_dim"],
            enc_dim=meta["enc_dim"],
            seed=meta["seed"],
        )
        model.params.load_state_dict(arrays)
        return model
