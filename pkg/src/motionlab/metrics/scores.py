"""Distribution metrics over motion features: Frechet distance, diversity,
multimodality.

The Frechet distance uses the Gaussian closed form with the matrix square
root taken on the symmetrized product C1^(1/2) C2 C1^(1/2) (same trace,
numerically stable); the square root itself comes from a symmetric
eigendecomposition with negative eigenvalues clamped to zero, since sample
covariances at small n can be indefinite.
"""

import numpy as np


class SingularCovariance(RuntimeWarning):
    """A covariance was near-singular; eps * I regularization was applied."""


def sqrt_psd(mat):
    """Symmetric PSD square root via eigendecomposition (negatives clamped)."""
    mat = np.asarray(mat, dtype=np.float64)
    vals, vecs = np.linalg.eigh((mat + mat.T) / 2.0)
    vals = np.clip(vals, 0.0, None)
    return (vecs * np.sqrt(vals)) @ vecs.T


def frechet_from_stats(mu1, cov1, mu2, cov2):
    """Frechet distance between Gaussians from their moments."""
    mu1 = np.atleast_1d(np.asarray(mu1, dtype=np.float64))
    mu2 = np.atleast_1d(np.asarray(mu2, dtype=np.float64))
    cov1 = np.atleast_2d(np.asarray(cov1, dtype=np.float64))
    cov2 = np.atleast_2d(np.asarray(cov2, dtype=np.float64))
    diff = mu1 - mu2
    root1 = sqrt_psd(cov1)
    cross = sqrt_psd(root1 @ cov2 @ root1)
    return float(diff @ diff + np.trace(cov1 + cov2 - 2.0 * cross))


def _sample_stats(features):
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2 or features.shape[0] < 2:
        raise ValueError("need a (n >= 2, d) feature matrix")
    mu = features.mean(axis=0)
    cov = np.cov(features, rowvar=False)
    return mu, np.atleast_2d(cov)


def fid_with_info(real_features, gen_features, eps=1e-6, singular_tol=1e-10):
    """FID plus a flag telling whether eps * I regularization kicked in."""
    mu1, cov1 = _sample_stats(real_features)
    mu2, cov2 = _sample_stats(gen_features)
    regularized = False
    for cov in (cov1, cov2):
        if np.linalg.eigvalsh((cov + cov.T) / 2.0).min() < singular_tol:
            regularized = True
    if regularized:
        eye = eps * np.eye(cov1.shape[0])
        cov1 = cov1 + eye
        cov2 = cov2 + eye
    return frechet_from_stats(mu1, cov1, mu2, cov2), regularized


def fid(real_features, gen_features, eps=1e-6):
    """Frechet distance between the Gaussian fits of two feature sets."""
    value, _ = fid_with_info(real_features, gen_features, eps=eps)
    return value


def _two_subsets(features, size, rng):
    """Two same-size index sets: disjoint without replacement when the pool
    allows, with replacement otherwise."""
    n = len(features)
    if n >= 2 * size:
        idx = rng.choice(n, size=2 * size, replace=False)
        return idx[:size], idx[size:]
    return rng.choice(n, size=size, replace=True), rng.choice(
        n, size=size, replace=True
    )


def diversity(features, s_d=200, seed=0):
    """Mean pairwise feature distance across the whole pool (s_d pairs)."""
    features = np.asarray(features, dtype=np.float64)
    if len(features) == 0:
        raise ValueError("empty feature pool")
    rng = np.random.default_rng(seed)
    first, second = _two_subsets(features, s_d, rng)
    return float(
        np.linalg.norm(features[first] - features[second], axis=1).mean()
    )


def multimodality(features_by_class, s_m=20, seed=0):
    """Class-averaged mean pairwise distance within each action (s_m pairs
    per class)."""
    rng = np.random.default_rng(seed)
    totals = []
    for label, feats in features_by_class.items():
        feats = np.asarray(feats, dtype=np.float64)
        if len(feats) == 0:
            raise ValueError(f"class {label!r} has no features")
        first, second = _two_subsets(feats, s_m, rng)
        totals.append(np.linalg.norm(feats[first] - feats[second], axis=1).mean())
    if not totals:
        raise ValueError("no classes given")
    return float(np.mean(totals))
