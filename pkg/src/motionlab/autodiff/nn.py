"""Neural-net building blocks on top of the tape: parameter container,
linear layers, GRU cell, reparameterized sampling, diagonal-Gaussian KL."""

from dataclasses import dataclass, field

import numpy as np

from .tensor import (
    ShapeMismatch,
    Tensor,
    add,
    exp,
    log,
    matmul,
    mul,
    scale,
    sigmoid,
    square,
    sub,
    sum_axis,
    tanh,
    tensor_sum,
)


class Parameters:
    """Named trainable tensors. Read-only sharing across threads is safe;
    updates (optimizer steps) must be exclusive."""

    def __init__(self):
        self._tensors = {}

    def add(self, name, data):
        if name in self._tensors:
            raise ValueError(f"duplicate parameter name {name!r}")
        t = Tensor(np.asarray(data, dtype=np.float64), requires_grad=True)
        self._tensors[name] = t
        return t

    def __getitem__(self, name):
        return self._tensors[name]

    def __contains__(self, name):
        return name in self._tensors

    def __iter__(self):
        return iter(self._tensors)

    def __len__(self):
        return len(self._tensors)

    def items(self):
        return self._tensors.items()

    def names(self):
        return list(self._tensors)

    def zero_grad(self):
        for t in self._tensors.values():
            t.grad = None

    def grads(self):
        return {k: t.grad for k, t in self._tensors.items()}

    def state_dict(self):
        return {k: t.data.copy() for k, t in self._tensors.items()}

    def load_state_dict(self, state):
        missing = set(self._tensors) - set(state)
        if missing:
            raise KeyError(f"missing parameters in state: {sorted(missing)}")
        for k, t in self._tensors.items():
            arr = np.asarray(state[k], dtype=np.float64)
            if arr.shape != t.data.shape:
                raise ShapeMismatch(
                    f"parameter {k}: shape {arr.shape} != {t.data.shape}"
                )
            t.data = arr.copy()

    def n_scalars(self):
        return sum(t.data.size for t in self._tensors.values())


def uniform_init(rng, shape, fan_in):
    """Uniform in +-1/sqrt(fan_in); the seeded default for all layers."""
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


class Linear:
    def __init__(self, params, name, in_dim, out_dim, rng):
        self.w = params.add(f"{name}.w", uniform_init(rng, (in_dim, out_dim), in_dim))
        self.b = params.add(f"{name}.b", uniform_init(rng, (out_dim,), in_dim))

    def __call__(self, x):
        return add(matmul(x, self.w), self.b)


class MLP:
    """Linear stack with tanh between layers (none after the last)."""

    def __init__(self, params, name, dims, rng):
        self.layers = [
            Linear(params, f"{name}.{i}", dims[i], dims[i + 1], rng)
            for i in range(len(dims) - 1)
        ]

    def __call__(self, x):
        for i, layer in enumerate(self.layers):
            x = layer(x)
            if i < len(self.layers) - 1:
                x = tanh(x)
        return x


@dataclass
class GruParams:
    """Update/reset/candidate gate weights and biases for the input and
    hidden paths of a single GRU cell."""

    wx_z: Tensor
    wh_z: Tensor
    bx_z: Tensor
    bh_z: Tensor
    wx_r: Tensor
    wh_r: Tensor
    bx_r: Tensor
    bh_r: Tensor
    wx_h: Tensor
    wh_h: Tensor
    bx_h: Tensor
    bh_h: Tensor

    @classmethod
    def create(cls, params, name, in_dim, hidden_dim, rng):
        def w(gate, path, shape, fan_in):
            return params.add(
                f"{name}.{path}_{gate}", uniform_init(rng, shape, fan_in)
            )

        kw = {}
        for gate in ("z", "r", "h"):
            kw[f"wx_{gate}"] = w(gate, "wx", (in_dim, hidden_dim), in_dim)
            kw[f"wh_{gate}"] = w(gate, "wh", (hidden_dim, hidden_dim), hidden_dim)
            kw[f"bx_{gate}"] = w(gate, "bx", (hidden_dim,), in_dim)
            kw[f"bh_{gate}"] = w(gate, "bh", (hidden_dim,), hidden_dim)
        return cls(**kw)

    @property
    def hidden_dim(self):
        return self.wh_z.shape[0]


def gru_cell(x, h, p):
    """One GRU step: h' = (1 - z) * h_cand + z * h.

    Gates z (update) and r (reset) are sigmoids of affine maps of (x, h);
    the candidate applies the reset gate to the hidden path before its
    transform: h_cand = tanh(Wx x + bx + Wh (r * h) + bh).
    """
    if x.shape[0] != h.shape[0]:
        raise ShapeMismatch(f"batch mismatch: x {x.shape} vs h {h.shape}")
    z = sigmoid(
        add(add(matmul(x, p.wx_z), p.bx_z), add(matmul(h, p.wh_z), p.bh_z))
    )
    r = sigmoid(
        add(add(matmul(x, p.wx_r), p.bx_r), add(matmul(h, p.wh_r), p.bh_r))
    )
    cand = tanh(
        add(
            add(matmul(x, p.wx_h), p.bx_h),
            add(matmul(mul(r, h), p.wh_h), p.bh_h),
        )
    )
    one_minus_z = sub(Tensor(np.ones(z.shape)), z)
    return add(mul(one_minus_z, cand), mul(z, h))


def reparameterized_sample(mu, logvar, noise):
    """mu + exp(logvar / 2) * noise; gradients reach mu and logvar only."""
    if mu.shape != logvar.shape or mu.shape != np.asarray(noise.data).shape:
        raise ShapeMismatch(
            f"shapes differ: mu {mu.shape}, logvar {logvar.shape}, "
            f"noise {np.asarray(noise.data).shape}"
        )
    return add(mu, mul(exp(scale(logvar, 0.5)), noise.detach()))


def kl_diag_gaussians(mu_q, logvar_q, mu_p, logvar_p):
    """KL(q || p) for diagonal Gaussians, summed over dimensions and
    averaged over the batch (first axis). Always >= 0."""
    for t in (logvar_q, mu_p, logvar_p):
        if t.shape != mu_q.shape:
            raise ShapeMismatch("kl_diag_gaussians expects equal shapes")
    var_ratio = exp(sub(logvar_q, logvar_p))
    delta_sq = square(sub(mu_q, mu_p))
    inv_var_p = exp(scale(logvar_p, -1.0))
    per_dim = add(
        sub(sub(logvar_p, logvar_q), Tensor(np.ones(mu_q.shape))),
        add(var_ratio, mul(delta_sq, inv_var_p)),
    )
    total = scale(tensor_sum(per_dim), 0.5)
    batch = mu_q.shape[0] if mu_q.ndim > 1 else 1
    return scale(total, 1.0 / batch)


def log_softmax(logits):
    """Row-wise log softmax via the max-shifted logsumexp (exact gradient:
    the shift constant's dependence on the input cancels)."""
    shift = Tensor(logits.data.max(axis=-1, keepdims=True))
    centered = sub(logits, shift)
    lse = sum_axis(exp(centered), axis=-1, keepdims=True)
    return sub(centered, log(lse))
