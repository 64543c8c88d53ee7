"""Template-to-scan fitting: robust joint term, surface term with nearest
vertices refreshed per outer iteration, and a Gaussian-mixture pose prior,
minimized by gradient descent with backtracking line search.

The first two outer iterations omit the surface term so the joints and
regularizer pull the pose into the right basin before nearest-neighbor
assignments mean anything.
"""

import json
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .. import autodiff as ad
from ..autodiff import Tape, Tensor

LOG_2PI = float(np.log(2.0 * np.pi))


class NonDecreasingObjective(RuntimeWarning):
    """Line search could not reduce the objective; best iterate returned."""


def geman_mcclure(residual, sigma):
    """Robust penalty r^2 / (sigma^2 + r^2) on 3-vector residual rows;
    bounded in [0, 1) and monotone in the residual norm."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    residual = np.asarray(residual, dtype=np.float64)
    sq = (residual * residual).sum(axis=-1)
    return sq / (sigma * sigma + sq)


def geman_mcclure_tensor(residual, sigma):
    """Tape version over (M, 3) residuals; returns (M,)."""
    sq = ad.sum_axis(ad.square(residual), axis=-1)
    return ad.div(sq, ad.add(sq, Tensor(np.full(sq.shape, sigma * sigma))))


@dataclass(frozen=True, eq=False)
class GaussianMixturePrior:
    weights: np.ndarray  # (K,), sums to 1
    means: np.ndarray  # (K, D)
    covariances: np.ndarray  # (K, D, D) symmetric positive definite

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        mu = np.asarray(self.means, dtype=np.float64)
        cov = np.asarray(self.covariances, dtype=np.float64)
        if w.min() < 0 or abs(w.sum() - 1.0) > 1e-9:
            raise ValueError("mixture weights must be non-negative and sum to 1")
        if mu.ndim != 2 or cov.shape != (len(w), mu.shape[1], mu.shape[1]):
            raise ValueError("inconsistent mixture shapes")
        chol = np.zeros_like(cov)
        for i in range(len(w)):
            if np.abs(cov[i] - cov[i].T).max() > 1e-9:
                raise ValueError(f"covariance {i} is not symmetric")
            chol[i] = np.linalg.cholesky(cov[i])  # raises if not PD
        for name, arr in (
            ("weights", w),
            ("means", mu),
            ("covariances", cov),
        ):
            arr = np.ascontiguousarray(arr)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "_chol", chol)

    @property
    def dim(self):
        return self.means.shape[1]

    def component_log_consts(self):
        logdets = 2.0 * np.log(np.diagonal(self._chol, axis1=1, axis2=2)).sum(
            axis=1
        )
        return np.log(self.weights) - 0.5 * (self.dim * LOG_2PI + logdets)

    def whiteners(self):
        """A_i with A_i @ A_i^T = inv(cov_i): the inverse Cholesky factors."""
        eye = np.eye(self.dim)
        return np.stack(
            [
                np.linalg.solve(self._chol[i], eye).T
                for i in range(len(self.weights))
            ]
        )

    @classmethod
    def isotropic(cls, dim, scale=1.0):
        return cls(
            weights=[1.0],
            means=np.zeros((1, dim)),
            covariances=(scale**2) * np.eye(dim)[None],
        )

    def to_dict(self):
        return {
            "weights": self.weights.tolist(),
            "means": self.means.tolist(),
            "covariances": self.covariances.tolist(),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            np.asarray(d["weights"]),
            np.asarray(d["means"]),
            np.asarray(d["covariances"]),
        )


def save_prior(prior, path):
    with open(path, "w") as fh:
        json.dump(prior.to_dict(), fh, sort_keys=True)
        fh.write("\n")


def load_prior(path):
    with open(path) as fh:
        return GaussianMixturePrior.from_dict(json.load(fh))


def gmm_neg_log_likelihood(theta, prior):
    """-log sum_i g_i N(theta; mu_i, cov_i) with log-sum-exp stabilization."""
    theta = np.asarray(theta, dtype=np.float64).ravel()
    consts = prior.component_log_consts()
    whiteners = prior.whiteners()
    logs = np.empty(len(prior.weights))
    for i in range(len(prior.weights)):
        y = (theta - prior.means[i]) @ whiteners[i].T
        logs[i] = consts[i] - 0.5 * float(y @ y)
    peak = logs.max()
    return float(-(peak + np.log(np.exp(logs - peak).sum())))


def gmm_nll_tensor(theta_flat, prior):
    """Tape version: theta_flat is a (1, D) Tensor; returns a scalar."""
    consts = prior.component_log_consts()
    whiteners = prior.whiteners()
    logs = []
    for i in range(len(prior.weights)):
        diff = ad.sub(theta_flat, Tensor(prior.means[i][None]))
        y = ad.matmul(diff, Tensor(whiteners[i].T))
        quad = ad.tensor_sum(ad.square(y))
        logs.append(
            ad.reshape(
                ad.add(ad.scale(quad, -0.5), Tensor(np.array(consts[i]))), (1,)
            )
        )
    stacked = ad.concat(logs, axis=0)
    peak = Tensor(np.array(stacked.data.max()))
    lse = ad.add(peak, ad.log(ad.tensor_sum(ad.exp(ad.sub(stacked, peak)))))
    return ad.scale(lse, -1.0)


@dataclass
class FitResult:
    beta: np.ndarray
    theta: np.ndarray
    objective_history: list = field(default_factory=list)
    converged: bool = True
    line_search_failed: bool = False


def fit_skinned_template(
    template,
    target_mesh,
    target_joints,
    lambda_j=2.0,
    lambda_r=0.2,
    iters=12,
    inner_steps=12,
    sigma=0.1,
    prior=None,
    joint_weights=None,
    warmup_iters=2,
    step0=0.05,
):
    """Estimate (beta, theta) so the posed template matches the target.

    The objective is surface + lambda_j * joints + lambda_r * regularizer:
    per-target-vertex distances to the nearest template vertex (assignment
    refreshed every outer iteration), confidence-weighted robust joint
    residuals through the kinematic chain, and the mixture prior on theta.
    Gradients come off the tape; steps use Armijo backtracking, so accepted
    steps never increase the objective. If backtracking stalls, the best
    iterate so far is returned with ``line_search_failed`` set (and a
    NonDecreasingObjective warning).
    """
    target_joints = np.asarray(target_joints, dtype=np.float64)
    if target_joints.shape != (template.n_joints, 3):
        raise ValueError(
            f"target joints must be ({template.n_joints}, 3), got "
            f"{target_joints.shape}"
        )
    if prior is None:
        prior = GaussianMixturePrior.isotropic(3 * template.n_joints, scale=1.0)
    omega = (
        np.ones(template.n_joints)
        if joint_weights is None
        else np.asarray(joint_weights, dtype=np.float64)
    )
    target_v = target_mesh.vertices

    beta = Tensor(np.zeros(template.n_shape_dims), requires_grad=True)
    theta = Tensor(np.zeros((template.n_joints, 3)), requires_grad=True)

    def objective(nn_idx, use_surface):
        verts, joints = template.pose_tensors(beta, theta)
        res = ad.sub(joints, Tensor(target_joints))
        robust = geman_mcclure_tensor(res, sigma)
        loss = ad.scale(
            ad.tensor_sum(ad.mul(robust, Tensor(omega))), lambda_j
        )
        if lambda_r:
            flat = ad.reshape(theta, (1, 3 * template.n_joints))
            loss = ad.add(loss, ad.scale(gmm_nll_tensor(flat, prior), lambda_r))
        if use_surface:
            matched = ad.gather_rows(verts, nn_idx)
            dist = ad.l2_norm(
                ad.sub(Tensor(target_v), matched), axis=-1, eps=1e-12
            )
            loss = ad.add(loss, ad.tensor_sum(dist))
        return loss

    history = []
    stalled = False
    step = step0
    for outer in range(iters):
        use_surface = outer >= warmup_iters
        posed, _ = template.pose(beta.data, theta.data)
        nn_idx = cKDTree(posed).query(target_v)[1] if use_surface else None

        for _ in range(inner_steps):
            beta.grad = None
            theta.grad = None
            with Tape() as tape:
                loss = objective(nn_idx, use_surface)
            tape.backward(loss)
            current = loss.item()
            g_beta = beta.grad if beta.grad is not None else np.zeros_like(beta.data)
            g_theta = (
                theta.grad if theta.grad is not None else np.zeros_like(theta.data)
            )
            g_norm_sq = float((g_beta**2).sum() + (g_theta**2).sum())
            if g_norm_sq < 1e-20:
                break
            b0, t0 = beta.data.copy(), theta.data.copy()
            accepted = False
            trial = step
            for _ in range(40):
                beta.data = b0 - trial * g_beta
                theta.data = t0 - trial * g_theta
                candidate = objective(nn_idx, use_surface).item()
                if candidate <= current - 1e-4 * trial * g_norm_sq:
                    accepted = True
                    break
                trial /= 2.0
            if not accepted:
                # accepted steps were monotone; keep the latest iterate
                beta.data, theta.data = b0, t0
                stalled = True
                break
            history.append(candidate)
            step = min(trial * 2.0, 1.0)
        if stalled:
            break

    if stalled:
        warnings.warn(
            "backtracking exhausted without further descent",
            NonDecreasingObjective,
            stacklevel=2,
        )
    return FitResult(
        beta=beta.data.copy(),
        theta=theta.data.copy(),
        objective_history=history,
        converged=not stalled,
        line_search_failed=stalled,
    )
