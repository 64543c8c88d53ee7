"""Reverse-mode automatic differentiation over dense float64 arrays.

A Tensor wraps an ndarray; operations compute values eagerly and, when a
Tape is active, append an operation record carrying the backward rule.
``Tape.backward`` replays the records in reverse, accumulating gradients
into ``.grad`` of every tensor marked ``requires_grad``.

A tape is confined to one thread; distinct tapes may run concurrently.
Outside any ``with Tape():`` block all operations are pure numpy forwards.
"""

import threading

import numpy as np


class ShapeMismatch(ValueError):
    pass


_STACK = threading.local()


def _tape_stack():
    if not hasattr(_STACK, "tapes"):
        _STACK.tapes = []
    return _STACK.tapes


def current_tape():
    stack = _tape_stack()
    return stack[-1] if stack else None


class Tensor:
    __slots__ = ("data", "grad", "requires_grad")

    def __init__(self, data, requires_grad=False):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = requires_grad

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    def zero_grad(self):
        self.grad = None

    def detach(self):
        return Tensor(self.data)

    def item(self):
        return float(self.data)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    # light operator sugar used throughout the model code
    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __neg__(self):
        return scale(self, -1.0)

    def __mul__(self, other):
        if isinstance(other, Tensor):
            return mul(self, other)
        return scale(self, float(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Tensor):
            return div(self, other)
        return scale(self, 1.0 / float(other))

    def __matmul__(self, other):
        return matmul(self, other)


class Tape:
    """Topologically ordered operation records with backward rules."""

    def __init__(self):
        self._records = []

    def __enter__(self):
        _tape_stack().append(self)
        return self

    def __exit__(self, *exc):
        popped = _tape_stack().pop()
        assert popped is self
        return False

    def __len__(self):
        return len(self._records)

    def record(self, out, parents, backward):
        self._records.append((out, parents, backward))

    def backward(self, loss):
        """Accumulate d loss / d x into x.grad for every tracked tensor."""
        if loss.data.ndim != 0:
            raise ShapeMismatch("backward expects a scalar loss")
        grads = {id(loss): np.ones(())}
        for out, parents, backward in reversed(self._records):
            g_out = grads.pop(id(out), None)
            if g_out is None:
                continue
            for parent, g in zip(parents, backward(g_out)):
                if g is None or not isinstance(parent, Tensor):
                    continue
                held = grads.get(id(parent))
                grads[id(parent)] = g if held is None else held + g
        # id() keys stay valid: records hold references until here
        for out, parents, _ in self._records:
            for t in parents + (out,):
                if isinstance(t, Tensor) and t.requires_grad and id(t) in grads:
                    g = grads.pop(id(t))
                    t.grad = g if t.grad is None else t.grad + g
        if loss.requires_grad and id(loss) in grads:
            g = grads.pop(id(loss))
            loss.grad = g if loss.grad is None else loss.grad + g


def constant(data):
    return Tensor(data)


def _coerce(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def _record(out_data, parents, backward):
    out = Tensor(out_data)
    tape = current_tape()
    if tape is not None:
        tape.record(out, tuple(parents), backward)
    return out


def _unbroadcast(grad, shape):
    """Reduce a broadcast gradient back to ``shape``."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, dim in enumerate(shape):
        if dim == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad.reshape(shape)


def _check_broadcastable(a, b, name):
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeMismatch(
            f"{name}: shapes {a.shape} and {b.shape} are incompatible"
        ) from None


# ------------------------------------------------------------ arithmetic ops


def add(a, b):
    a, b = _coerce(a), _coerce(b)
    _check_broadcastable(a, b, "add")
    out = a.data + b.data

    def backward(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return _record(out, (a, b), backward)


def sub(a, b):
    a, b = _coerce(a), _coerce(b)
    _check_broadcastable(a, b, "sub")
    out = a.data - b.data

    def backward(g):
        return _unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)

    return _record(out, (a, b), backward)


def mul(a, b):
    a, b = _coerce(a), _coerce(b)
    _check_broadcastable(a, b, "mul")
    out = a.data * b.data

    def backward(g):
        return (
            _unbroadcast(g * b.data, a.shape),
            _unbroadcast(g * a.data, b.shape),
        )

    return _record(out, (a, b), backward)


def div(a, b):
    a, b = _coerce(a), _coerce(b)
    _check_broadcastable(a, b, "div")
    out = a.data / b.data

    def backward(g):
        return (
            _unbroadcast(g / b.data, a.shape),
            _unbroadcast(-g * a.data / (b.data * b.data), b.shape),
        )

    return _record(out, (a, b), backward)


def scale(a, s):
    a = _coerce(a)
    s = float(s)

    def backward(g):
        return (g * s,)

    return _record(a.data * s, (a,), backward)


def matmul(a, b):
    a, b = _coerce(a), _coerce(b)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeMismatch(f"matmul: {a.shape} @ {b.shape}")
    out = a.data @ b.data

    def backward(g):
        return g @ b.data.T, a.data.T @ g

    return _record(out, (a, b), backward)


def transpose(a):
    a = _coerce(a)
    if a.ndim != 2:
        raise ShapeMismatch("transpose expects a 2-d tensor")

    def backward(g):
        return (g.T,)

    return _record(a.data.T.copy(), (a,), backward)


def reshape(a, shape):
    a = _coerce(a)
    old = a.shape
    out = a.data.reshape(shape)

    def backward(g):
        return (g.reshape(old),)

    return _record(out, (a,), backward)


def concat(tensors, axis=-1):
    tensors = [_coerce(t) for t in tensors]
    out = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.data.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def backward(g):
        return tuple(np.split(g, splits, axis=axis))

    return _record(out, tuple(tensors), backward)


def slice_axis(a, start, stop, axis=-1):
    a = _coerce(a)
    index = [slice(None)] * a.ndim
    index[axis] = slice(start, stop)
    index = tuple(index)
    out = a.data[index].copy()

    def backward(g):
        full = np.zeros(a.shape)
        full[index] = g
        return (full,)

    return _record(out, (a,), backward)


def gather_rows(a, indices):
    a = _coerce(a)
    indices = np.asarray(indices, dtype=np.int64)
    out = a.data[indices]

    def backward(g):
        full = np.zeros(a.shape)
        np.add.at(full, indices, g)
        return (full,)

    return _record(out, (a,), backward)


# ------------------------------------------------------------ nonlinearities


def tanh(a):
    a = _coerce(a)
    out = np.tanh(a.data)

    def backward(g):
        return (g * (1.0 - out * out),)

    return _record(out, (a,), backward)


def sigmoid(a):
    a = _coerce(a)
    out = 1.0 / (1.0 + np.exp(-a.data))

    def backward(g):
        return (g * out * (1.0 - out),)

    return _record(out, (a,), backward)


def relu(a):
    a = _coerce(a)
    out = np.maximum(a.data, 0.0)

    def backward(g):
        return (g * (a.data > 0),)

    return _record(out, (a,), backward)


def exp(a):
    a = _coerce(a)
    out = np.exp(a.data)

    def backward(g):
        return (g * out,)

    return _record(out, (a,), backward)


def log(a):
    a = _coerce(a)
    out = np.log(a.data)

    def backward(g):
        return (g / a.data,)

    return _record(out, (a,), backward)


def clip(a, lo, hi):
    """Clamp values to [lo, hi]; gradient is zero outside the bounds."""
    a = _coerce(a)
    out = np.clip(a.data, lo, hi)

    def backward(g):
        return (g * ((a.data > lo) & (a.data < hi)),)

    return _record(out, (a,), backward)


def square(a):
    a = _coerce(a)

    def backward(g):
        return (2.0 * g * a.data,)

    return _record(a.data * a.data, (a,), backward)


def sqrt(a):
    a = _coerce(a)
    out = np.sqrt(a.data)

    def backward(g):
        return (g / (2.0 * out),)

    return _record(out, (a,), backward)


# ---------------------------------------------------------------- reductions


def tensor_sum(a):
    a = _coerce(a)
    shape = a.shape

    def backward(g):
        return (np.broadcast_to(g, shape).copy(),)

    return _record(a.data.sum(), (a,), backward)


def sum_axis(a, axis, keepdims=False):
    a = _coerce(a)
    out = a.data.sum(axis=axis, keepdims=keepdims)

    def backward(g):
        if not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, a.shape).copy(),)

    return _record(out, (a,), backward)


def mean(a):
    a = _coerce(a)
    n = a.data.size
    shape = a.shape

    def backward(g):
        return (np.broadcast_to(g / n, shape).copy(),)

    return _record(a.data.mean(), (a,), backward)


def l2_norm(a, axis=-1, eps=0.0):
    """Euclidean norm along ``axis``; pass eps > 0 to stay differentiable
    at zero vectors (the norm becomes sqrt(sum(x^2) + eps))."""
    a = _coerce(a)
    sq = (a.data * a.data).sum(axis=axis) + eps
    out = np.sqrt(sq)

    def backward(g):
        denom = np.where(out == 0.0, 1.0, out)
        return (np.expand_dims(g / denom, axis) * a.data,)

    return _record(out, (a,), backward)
