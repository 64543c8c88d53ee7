"""Finite-difference gradient checking for tape-recorded computations."""

import numpy as np

from .tensor import Tape, Tensor


def gradcheck(fn, inputs, eps=1e-5, rtol=1e-4, atol=1e-8):
    """Compare analytic gradients of ``fn(*inputs)`` to central differences.

    ``fn`` must map Tensors to a scalar Tensor and be deterministic. Each
    input is checked coordinate-wise; raises AssertionError on mismatch.
    """
    inputs = [t if isinstance(t, Tensor) else Tensor(t) for t in inputs]
    for t in inputs:
        t.requires_grad = True
        t.grad = None
    with Tape() as tape:
        loss = fn(*inputs)
    tape.backward(loss)
    for k, t in enumerate(inputs):
        analytic = t.grad if t.grad is not None else np.zeros_like(t.data)
        numeric = np.zeros_like(t.data)
        it = np.nditer(t.data, flags=["multi_index"])
        for _ in it:
            idx = it.multi_index
            orig = t.data[idx]
            t.data[idx] = orig + eps
            up = fn(*inputs).item()
            t.data[idx] = orig - eps
            down = fn(*inputs).item()
            t.data[idx] = orig
            numeric[idx] = (up - down) / (2 * eps)
        denom = max(np.abs(numeric).max(), np.abs(analytic).max(), 1e-8)
        err = np.abs(analytic - numeric).max()
        if err > atol + rtol * denom:
            raise AssertionError(
                f"gradient mismatch on input {k}: max abs err {err:.3e} "
                f"(scale {denom:.3e}, rtol {rtol})"
            )
    return True
