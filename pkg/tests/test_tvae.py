import numpy as np
import pytest

from motionlab import autodiff as ad
from motionlab.autodiff import Tape, Tensor, gradcheck
from motionlab.datasets import (
    SyntheticSpec,
    UnknownAction,
    synthesize,
    to_training_tensors,
)
from motionlab.kinematics import KinematicTree, forward_kinematics, LiePose
from motionlab.skeletons import preset
from motionlab.tvae import (
    Action2MotionModel,
    TrainConfig,
    elbo_loss,
    generate,
    interpolate,
    kl_per_sample,
    outpaint,
    recon_per_sample,
    train,
    transition,
)

CHAIN3 = KinematicTree(
    joint_names=("j0", "j1", "j2"),
    parents=(-1, 0, 1),
    chains=((0, 1, 2),),
    bone_lengths=(0.0, 1.0, 0.8),
)


def tiny_model(variant, skeleton=CHAIN3, actions=("a", "b"), seed=1):
    return Action2MotionModel(
        skeleton,
        actions,
        variant=variant,
        z_dim=3,
        h_o_dim=4,
        hidden_dim=6,
        enc_dim=6,
        seed=seed,
    )


def tiny_batch(model, n_batch=2, n_steps=2, seed=0):
    from motionlab.datasets.motiondata import MotionClip, MotionDataset

    rng = np.random.default_rng(seed)
    clips = []
    for i in range(n_batch):
        joints = rng.normal(size=(n_steps, model.skeleton.n_joints, 3)) * 0.3
        clips.append(MotionClip(joints, model.action_vocab[i % 2], i, 10.0))
    ds = MotionDataset(clips, model.skeleton, model.action_vocab)
    return to_training_tensors(ds, model.variant, n_steps)


@pytest.fixture(scope="module")
def trained_tiny():
    """A small GLMI-M model trained briefly on the synthetic actions."""
    data = synthesize(SyntheticSpec(clips_per_action=8, frames=16), seed=3)
    model = Action2MotionModel(
        data.skeleton,
        data.action_vocab,
        variant="glmi_m",
        z_dim=8,
        h_o_dim=8,
        hidden_dim=32,
        enc_dim=32,
        seed=0,
    )
    config = TrainConfig(
        epochs=40, batch_size=24, window=16, kl_end=0.01, seed=0
    )
    history = train(model, data, config)
    return model, history


# ------------------------------------------------------------ step contracts


def test_posterior_and_prior_dims_default():
    model = Action2MotionModel(preset("toy8"), ("walk",), variant="lie", seed=0)
    assert model.z_dim == 30 and model.h_o_dim == 20
    assert model.hidden_dim == 128 and model.enc_dim == 128
    state = model.init_state(2)
    pose = Tensor(np.zeros((2, model.pose_dim)))
    act = Tensor(np.tile(model.action_one_hot("walk"), (2, 1)))
    c = Tensor(np.full((2, 1), 1.0))
    mu, lv, _ = model.posterior_step(pose, act, c, state)
    assert mu.shape == (2, 30) and lv.shape == (2, 30)
    mu_p, lv_p, _ = model.prior_step(pose, act, c, state)
    assert mu_p.shape == (2, 30) and lv_p.shape == (2, 30)


def test_shared_encoder_single_parameter_set():
    model = tiny_model("lie")
    enc_names = [n for n in model.params.names() if n.startswith("enc.")]
    assert enc_names  # one stack only; no prior/posterior-specific encoder
    assert not any(n.startswith("prior_enc") for n in model.params.names())
    pose = Tensor(np.ones((1, model.pose_dim)))
    act = Tensor(np.array([[1.0, 0.0]]))
    c = Tensor(np.array([[0.5]]))
    a = model.encode(pose, act, c)
    b = model.encode(pose, act, c)
    assert np.array_equal(a.data, b.data)


def test_step_determinism():
    model = tiny_model("glmi_m")
    state = model.init_state(1)
    pose = Tensor(np.ones((1, model.pose_dim)))
    act = Tensor(np.array([[0.0, 1.0]]))
    c = Tensor(np.array([[0.25]]))
    z = Tensor(np.full((1, model.z_dim), 0.3))
    j1, aux1, _ = model.generator_step(z, pose, act, c, state)
    j2, aux2, _ = model.generator_step(z, pose, act, c, state)
    assert np.array_equal(j1.data, j2.data)
    assert np.array_equal(aux1["velocity"].data, aux2["velocity"].data)


# --------------------------------------------------------------- decoders


def test_decode_plain_shape_and_gradients():
    model = tiny_model("plain")
    batch = tiny_batch(model)
    dec_width = 3 * model.n_joints
    dec = Tensor(np.arange(dec_width, dtype=float)[None])
    joints, _ = model.decode_pose_plain(dec)
    assert joints.shape == (1, model.n_joints, 3)
    assert np.array_equal(joints.data.reshape(1, -1), dec.data)
    # gradient reaches every decoder parameter
    model.params.zero_grad()
    noise = np.zeros((2, 2, model.z_dim))
    with Tape() as tape:
        terms = elbo_loss(model, batch, 1.0, 0.0, noise, np.ones(2))
    tape.backward(terms.total)
    for name in model.params.names():
        if name.startswith("dec."):
            grad = model.params[name].grad
            assert grad is not None and np.abs(grad).max() > 0


def test_decode_lie_zero_block_gives_rest_pose():
    model = tiny_model("lie")
    root = np.array([0.3, -0.2, 1.0])
    dec = Tensor(np.concatenate([np.zeros(6), root])[None])
    joints, aux = model.decode_pose_lie(dec)
    rest = forward_kinematics(
        CHAIN3, LiePose(np.zeros(3), root, np.zeros((2, 3)))
    )
    assert np.allclose(joints.data[0], rest, atol=1e-12)
    assert np.allclose(aux["root"].data[0], root)


def test_decode_glmi_reduction_and_decomposition():
    model = tiny_model("glmi_m")
    # force the velocity backbone to zero output
    for name in model.params.names():
        if name.startswith("glmi_mlp"):
            t = model.params[name]
            t.data = np.zeros_like(t.data)
    dec = Tensor(np.random.default_rng(0).normal(size=(1, 6 + model.h_o_dim)))
    joints, aux, _ = model.decode_pose_glmi(dec, None, None, model.init_state(1))
    offset = aux["offset_pose"].data.reshape(1, model.n_joints, 3)
    # zero backbone and zero previous root: prediction equals the local pose
    assert np.allclose(joints.data, offset, atol=1e-12)
    # with a live backbone, subtracting the local pose leaves one translation
    model2 = tiny_model("glmi_m", seed=7)
    joints2, aux2, _ = model2.decode_pose_glmi(
        dec, Tensor(np.ones((1, model2.joint_dim))), Tensor(np.ones((1, 3))),
        model2.init_state(1),
    )
    delta = joints2.data - aux2["offset_pose"].data.reshape(1, model2.n_joints, 3)
    assert np.abs(delta - delta[:, :1]).max() < 1e-12


def test_glmi_h_o_dim_default_20():
    model = Action2MotionModel(preset("toy8"), ("walk",), variant="glmi_m")
    n_lie = 3 * model.skeleton.n_bones
    dec = Tensor(np.zeros((1, n_lie + 20)))
    _, aux, _ = model.decode_pose_glmi(dec, None, None, model.init_state(1))
    assert aux["h_o"].shape == (1, 20)


# ------------------------------------------------------------------ losses


def test_recon_zero_on_perfect_reconstruction():
    joints = np.random.default_rng(0).normal(size=(3, 5, 3))
    val = recon_per_sample(Tensor(joints), joints)
    assert np.abs(val.data).max() < 1e-4  # eps-regularized norm at zero


def test_kl_per_sample_zero_and_nonnegative():
    mu = Tensor(np.random.default_rng(1).normal(size=(4, 3)))
    lv = Tensor(np.random.default_rng(2).normal(size=(4, 3)))
    assert np.abs(kl_per_sample(mu, lv, mu, lv).data).max() < 1e-12
    rng = np.random.default_rng(3)
    for _ in range(20):
        vals = kl_per_sample(
            Tensor(rng.normal(size=(4, 3))),
            Tensor(rng.normal(size=(4, 3))),
            Tensor(rng.normal(size=(4, 3))),
            Tensor(rng.normal(size=(4, 3))),
        ).data
        assert (vals >= -1e-12).all()


def test_train_config_defaults_and_validation():
    config = TrainConfig()
    assert config.teacher_forcing_rate == 0.6
    assert config.lambda_align == 10.0
    assert config.kl_start == 0.001
    assert config.lr == 2e-4 and config.weight_decay == 1e-5
    with pytest.raises(ValueError):
        TrainConfig(teacher_forcing_rate=1.5)
    # linear schedule reaches the end value on the last epoch
    c = TrainConfig(epochs=11, kl_start=0.001, kl_end=0.1)
    assert c.kl_weight(0) == pytest.approx(0.001)
    assert c.kl_weight(10) == pytest.approx(0.1)


def test_elbo_deterministic_and_forcing_sensitive():
    model = tiny_model("glmi_m")
    batch = tiny_batch(model, n_batch=2, n_steps=3)
    noise = np.random.default_rng(4).normal(size=(2, 3, model.z_dim))
    a = elbo_loss(model, batch, 0.5, 10.0, noise, np.ones(2))
    b = elbo_loss(model, batch, 0.5, 10.0, noise, np.ones(2))
    assert a.total.item() == b.total.item()
    c = elbo_loss(model, batch, 0.5, 10.0, noise, np.zeros(2))
    assert c.total.item() != a.total.item()
    assert a.kl.item() >= 0 and c.kl.item() >= 0


@pytest.mark.parametrize("variant", ["lie", "glmi_m"])
def test_elbo_gradcheck_two_frame_toy(variant):
    model = tiny_model(variant)
    batch = tiny_batch(model, n_batch=2, n_steps=2)
    noise = np.random.default_rng(5).normal(size=(2, 2, model.z_dim))
    forcing = np.array([1.0, 0.0])

    names = model.params.names()

    def loss_fn(*tensors):
        return elbo_loss(model, batch, 0.7, 2.0, noise, forcing).total

    gradcheck(loss_fn, [model.params[n] for n in names], eps=1e-5, rtol=1e-3)


# ---------------------------------------------------------------- training


def test_train_loss_decreases(trained_tiny):
    _, history = trained_tiny
    first = np.mean([h.recon for h in history[:3]])
    last = np.mean([h.recon for h in history[-3:]])
    assert last < 0.5 * first


def test_train_deterministic():
    data = synthesize(SyntheticSpec(clips_per_action=2, frames=8), seed=1)

    def run():
        model = Action2MotionModel(
            data.skeleton, data.action_vocab, variant="lie",
            z_dim=4, hidden_dim=8, enc_dim=8, seed=2,
        )
        train(model, data, TrainConfig(epochs=3, batch_size=6, window=8, seed=5))
        return model.params.state_dict()

    a, b = run(), run()
    for k in a:
        assert np.array_equal(a[k], b[k])


# -------------------------------------------------------------- applications


def test_generate_lengths_and_determinism(trained_tiny):
    model, _ = trained_tiny
    for length in (16, 60):
        motion = generate(model, "walk", length, seed=9)
        assert motion.joints.shape == (length, 8, 3)
        assert motion.lie_motion.n_frames == length
    again = generate(model, "walk", 16, seed=9)
    assert np.array_equal(again.joints, generate(model, "walk", 16, seed=9).joints)
    other = generate(model, "walk", 16, seed=10)
    assert not np.array_equal(again.joints, other.joints)


def test_generate_unknown_action(trained_tiny):
    model, _ = trained_tiny
    with pytest.raises(UnknownAction):
        generate(model, "cartwheel", 8, seed=0)


def test_generated_bone_lengths_exact(trained_tiny):
    model, _ = trained_tiny
    tree = model.skeleton
    motion = generate(model, "wave", 12, seed=4)
    for t in range(12):
        for j in tree.bone_joints:
            d = np.linalg.norm(
                motion.joints[t, j] - motion.joints[t, tree.parents[j]]
            )
            assert abs(d - tree.bone_lengths[j]) < 1e-9


def test_generated_lie_norms_wrapped(trained_tiny):
    model, _ = trained_tiny
    motion = generate(model, "squat", 12, seed=8)
    norms = np.linalg.norm(motion.lie_motion.lie, axis=-1)
    assert norms.max() <= np.pi + 1e-12


def test_interpolate_endpoints_and_midpoint(trained_tiny):
    model, _ = trained_tiny
    ref_a = generate(model, "wave", 10, seed=21)
    ref_b = generate(model, "wave", 10, seed=22)
    motions = interpolate(
        model, "wave", ref_a.first_z, ref_b.first_z, k=3, length=10, seed=21
    )
    assert np.array_equal(motions[0].joints, ref_a.joints)
    assert np.allclose(
        motions[1].first_z, (ref_a.first_z + ref_b.first_z) / 2
    )
    with pytest.raises(ValueError):
        interpolate(model, "wave", ref_a.first_z, ref_b.first_z, 1, 10, 0)


def test_interpolate_first_pose_path(trained_tiny):
    model, _ = trained_tiny
    ref_a = generate(model, "squat", 8, seed=31)
    ref_b = generate(model, "squat", 8, seed=35)
    k = 7
    motions = interpolate(
        model, "squat", ref_a.first_z, ref_b.first_z, k, length=8, seed=31
    )
    first = np.stack([m.joints[0].ravel() for m in motions])
    endpoint_gap = np.linalg.norm(first[-1] - first[0])
    adjacent = np.linalg.norm(np.diff(first, axis=0), axis=1)
    assert (adjacent < endpoint_gap + 1e-12).all()


def test_transition_single_entry_equals_generate(trained_tiny):
    model, _ = trained_tiny
    a = generate(model, "walk", 12, seed=13)
    b = transition(model, [("walk", 0)], 12, seed=13)
    assert np.array_equal(a.joints, b.joints)


def test_transition_three_actions_and_validation(trained_tiny):
    model, _ = trained_tiny
    motion = transition(
        model, [("walk", 0), ("wave", 4), ("squat", 8)], 12, seed=2
    )
    assert motion.joints.shape == (12, 8, 3)
    with pytest.raises(ValueError):
        transition(model, [("walk", 1)], 12, seed=2)
    with pytest.raises(ValueError):
        transition(model, [("walk", 0), ("wave", 20)], 12, seed=2)
    with pytest.raises(ValueError):
        transition(model, [("walk", 0), ("wave", 8), ("squat", 4)], 12, seed=2)


def test_outpaint_prefix_bit_exact(trained_tiny):
    model, _ = trained_tiny
    data = synthesize(SyntheticSpec(clips_per_action=1, frames=10), seed=9)
    prefix = data.clips[1].joints[:5]
    motion = outpaint(model, prefix, "walk", 12, seed=3)
    assert motion.joints.shape == (12, 8, 3)
    assert np.array_equal(motion.joints[:5], prefix)
    # one-frame completion at the boundary
    tail = outpaint(model, motion.joints[:11], "walk", 12, seed=3)
    assert np.array_equal(tail.joints[:11], motion.joints[:11])
    with pytest.raises(ValueError):
        outpaint(model, motion.joints, "walk", 12, seed=3)


def test_outpaint_diverges_after_prefix(trained_tiny):
    model, _ = trained_tiny
    data = synthesize(SyntheticSpec(clips_per_action=1, frames=10), seed=9)
    prefix = data.clips[1].joints[:4]
    a = outpaint(model, prefix, "walk", 12, seed=1)
    b = outpaint(model, prefix, "walk", 12, seed=2)
    assert np.array_equal(a.joints[:4], b.joints[:4])
    assert not np.array_equal(a.joints[4:], b.joints[4:])


def test_checkpoint_roundtrip_preserves_generation(tmp_path, trained_tiny):
    model, _ = trained_tiny
    ref = generate(model, "walk", 8, seed=77)
    path = tmp_path / "model.npz"
    model.save(path, extra_meta={"note": "test"})
    loaded = Action2MotionModel.load(path)
    assert loaded.variant == model.variant
    assert loaded.action_vocab == model.action_vocab
    out = generate(loaded, "walk", 8, seed=77)
    assert np.array_equal(ref.joints, out.joints)
