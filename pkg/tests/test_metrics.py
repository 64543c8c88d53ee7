import numpy as np
import pytest
import scipy.linalg

from motionlab.datasets import SyntheticSpec, synthesize
from motionlab.metrics import (
    ClassifierConfig,
    diversity,
    evaluate_real_baseline,
    extract_features,
    extract_features_batch,
    fid,
    fid_with_info,
    frechet_from_stats,
    multimodality,
    recognition_accuracy,
    sqrt_psd,
    train_classifier,
)
from motionlab.metrics.classifier import MotionClassifier


@pytest.fixture(scope="module")
def toy_data():
    return synthesize(SyntheticSpec(clips_per_action=20, frames=16), seed=21)


@pytest.fixture(scope="module")
def toy_classifier(toy_data):
    config = ClassifierConfig(epochs=40, batch_size=24, hidden_dim=48, seed=1)
    return train_classifier(toy_data, config)


# ----------------------------------------------------------- matrix sqrt/FID


def random_psd(rng, dim, scale=1.0):
    a = rng.normal(size=(dim, dim))
    return a @ a.T * scale / dim + 0.1 * np.eye(dim)


def test_sqrt_psd_squares_back():
    rng = np.random.default_rng(0)
    for _ in range(20):
        mat = random_psd(rng, 4)
        root = sqrt_psd(mat)
        assert np.abs(root @ root - mat).max() < 1e-8


def test_sqrt_psd_matches_scipy_oracle():
    rng = np.random.default_rng(1)
    for _ in range(20):
        mat = random_psd(rng, 5)
        assert np.abs(sqrt_psd(mat) - scipy.linalg.sqrtm(mat).real).max() < 1e-8


def test_frechet_one_dim_closed_form():
    # N(0,1) vs N(1,1) with population stats: distance exactly 1
    assert frechet_from_stats([0.0], [[1.0]], [1.0], [[1.0]]) == pytest.approx(
        1.0, abs=1e-12
    )


def test_frechet_matches_eigen_oracle_on_random_gaussians():
    rng = np.random.default_rng(2)
    for _ in range(20):
        mu1, mu2 = rng.normal(size=3), rng.normal(size=3)
        cov1, cov2 = random_psd(rng, 3), random_psd(rng, 3)
        got = frechet_from_stats(mu1, cov1, mu2, cov2)
        # independent route: general sqrtm of the asymmetric product
        cross = scipy.linalg.sqrtm(cov1 @ cov2).real
        want = float(
            (mu1 - mu2) @ (mu1 - mu2) + np.trace(cov1 + cov2 - 2 * cross)
        )
        assert abs(got - want) < 1e-8


def test_fid_identical_sets_zero():
    rng = np.random.default_rng(3)
    x = rng.normal(size=(300, 6))
    assert abs(fid(x, x.copy())) < 1e-6


def test_fid_symmetric_and_nonnegative():
    rng = np.random.default_rng(4)
    x = rng.normal(size=(200, 5))
    y = rng.normal(size=(220, 5)) + 0.3
    assert fid(x, y) == pytest.approx(fid(y, x), abs=1e-9)
    assert fid(x, y) >= -1e-8


def test_fid_regularizes_singular_covariance():
    x = np.zeros((50, 4))  # rank-0 covariance
    y = np.zeros((50, 4))
    value, regularized = fid_with_info(x, y)
    assert regularized
    assert value == pytest.approx(0.0, abs=1e-9)


# --------------------------------------------------- diversity/multimodality


def test_diversity_identical_features_zero():
    feats = np.tile([1.0, 2.0, 3.0], (100, 1))
    assert diversity(feats, s_d=50, seed=0) == 0.0


def test_diversity_default_pairs():
    import inspect

    assert inspect.signature(diversity).parameters["s_d"].default == 200


def test_diversity_two_point_pool_enumeration():
    u = np.array([0.0, 0.0])
    v = np.array([2.0, 0.0])
    # enumeration: with-replacement pairs are (u,u),(u,v),(v,u),(v,v),
    # expected distance = ||u - v|| / 2 = 1
    est = diversity(np.stack([u, v]), s_d=40000, seed=5)
    assert est == pytest.approx(1.0, abs=0.03)


def test_diversity_translation_and_scale():
    rng = np.random.default_rng(6)
    feats = rng.normal(size=(150, 4))
    base = diversity(feats, s_d=60, seed=7)
    assert diversity(feats + 5.0, s_d=60, seed=7) == pytest.approx(base)
    assert diversity(feats * 3.0, s_d=60, seed=7) == pytest.approx(3 * base)


def test_multimodality_collapsed_classes_zero():
    by_class = {
        "a": np.tile([1.0, 0.0], (30, 1)),
        "b": np.tile([0.0, 2.0], (30, 1)),
    }
    assert multimodality(by_class, s_m=10, seed=0) == 0.0


def test_multimodality_defaults_and_single_class_reduction():
    import inspect

    assert inspect.signature(multimodality).parameters["s_m"].default == 20
    rng = np.random.default_rng(8)
    feats = rng.normal(size=(80, 3))
    assert multimodality({"only": feats}, s_m=15, seed=9) == pytest.approx(
        diversity(feats, s_d=15, seed=9)
    )


def test_multimodality_missing_class():
    with pytest.raises(ValueError):
        multimodality({"a": np.zeros((0, 3))}, s_m=5)


# ----------------------------------------------------------------- classifier


def test_classifier_holdout_accuracy(toy_classifier):
    assert toy_classifier.holdout_accuracy >= 0.9


def test_classifier_deterministic(toy_data):
    config = ClassifierConfig(epochs=2, batch_size=24, hidden_dim=16, seed=4)
    a = train_classifier(toy_data, config)
    b = train_classifier(toy_data, config)
    for k in a.params.names():
        assert np.array_equal(a.params[k].data, b.params[k].data)


def test_extract_features_contracts(toy_classifier, toy_data):
    clip = toy_data.clips[0]
    f1 = extract_features(toy_classifier, clip.joints)
    f2 = extract_features(toy_classifier, clip.joints.copy())
    assert np.array_equal(f1, f2)
    assert f1.shape == (toy_classifier.feature_dim,)


def test_features_separate_actions(toy_classifier, toy_data):
    wave = [c.joints for c in toy_data.clips if c.action == "wave"][:8]
    walk = [c.joints for c in toy_data.clips if c.action == "walk"][:8]
    f_wave = extract_features_batch(toy_classifier, np.stack(wave)).mean(axis=0)
    f_walk = extract_features_batch(toy_classifier, np.stack(walk)).mean(axis=0)
    assert np.linalg.norm(f_wave - f_walk) > 0.5


def test_recognition_accuracy_trained_clips(toy_classifier, toy_data):
    joints = np.stack([c.joints for c in toy_data.clips])
    labels = [c.action for c in toy_data.clips]
    assert recognition_accuracy(toy_classifier, joints, labels) >= 0.95


def test_recognition_accuracy_uninformed_classifier(toy_data):
    # untrained net's predictions are independent of the intended labels,
    # so accuracy concentrates near 1/C (binomial bound)
    rng = np.random.default_rng(10)
    classifier = MotionClassifier(
        toy_data.skeleton, toy_data.action_vocab, hidden_dim=16, seed=11
    )
    n = 300
    joints = rng.normal(size=(n, 8, 8, 3))
    labels = [toy_data.action_vocab[i] for i in rng.integers(0, 3, size=n)]
    acc = recognition_accuracy(classifier, joints, labels)
    assert abs(acc - 1 / 3) < 0.12


# ----------------------------------------------------------------- reporting


def test_real_baseline_report(toy_classifier, toy_data):
    report = evaluate_real_baseline(
        toy_classifier, toy_data, trials=4, samples=40, s_d=20, s_m=5, seed=3
    )
    assert report.trials == 4
    assert all(report.ci95[m] >= 0 for m in report.ci95)
    assert report.accuracy > 0.9
    # real-vs-real FID is small-sample biased but must stay non-negative
    assert report.fid >= -1e-8
    assert "±" in report.row()
    again = evaluate_real_baseline(
        toy_classifier, toy_data, trials=4, samples=40, s_d=20, s_m=5, seed=3
    )
    assert again.means == report.means


def test_report_serialization(tmp_path, toy_classifier, toy_data):
    report = evaluate_real_baseline(
        toy_classifier, toy_data, trials=2, samples=20, s_d=10, s_m=4, seed=0
    )
    jpath = tmp_path / "report.json"
    cpath = tmp_path / "report.csv"
    report.save_json(jpath)
    report.save_csv(cpath)
    import json

    loaded = json.loads(jpath.read_text())
    assert loaded["means"]["fid"] == report.fid
    lines = cpath.read_text().splitlines()
    assert lines[0].startswith("metric,")
    assert len(lines) == 5
