"""Adam with decoupled weight decay.

Paper-default hyperparameters: lr 2e-4, betas (0.9, 0.999), weight decay 1e-5.
"""

from dataclasses import dataclass, field

import numpy as np


@dataclass
class AdamState:
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    t: int = 0


def adam_step(
    params,
    grads,
    state,
    lr=2e-4,
    beta1=0.9,
    beta2=0.999,
    weight_decay=1e-5,
    eps=1e-8,
):
    """One in-place Adam update over a named parameter dict.

    ``params`` maps name -> Tensor (data mutated); ``grads`` maps name ->
    ndarray or None (None is treated as zero: only decay applies). Returns
    the updated state.
    """
    state.t += 1
    t = state.t
    for name, tensor in params.items():
        g = grads.get(name)
        if g is None:
            g = np.zeros_like(tensor.data)
        if name not in state.m:
            state.m[name] = np.zeros_like(tensor.data)
            state.v[name] = np.zeros_like(tensor.data)
        m = state.m[name]
        v = state.v[name]
        m += (1.0 - beta1) * (g - m)
        v += (1.0 - beta2) * (g * g - v)
        m_hat = m / (1.0 - beta1**t)
        v_hat = v / (1.0 - beta2**t)
        tensor.data = tensor.data - lr * (
            m_hat / (np.sqrt(v_hat) + eps) + weight_decay * tensor.data
        )
    return state
