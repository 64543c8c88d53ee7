"""Kernel backend selection.

The batched exponential-map / forward-kinematics kernels are the innermost
loops of Lie-decoder training, so they exist twice: a Cython extension
(``_fastkin``) and a pure numpy reference (``_refkin``). The compiled module
is used when importable; set ``MOTIONLAB_PURE=1`` to force the reference
path. Both expose the same functions and are cross-checked in the tests.
"""

import os

from . import _refkin

_FORCED_PURE = os.environ.get("MOTIONLAB_PURE", "") not in ("", "0")

if not _FORCED_PURE:
    try:
        from . import _fastkin as _impl

        COMPILED = True
    except ImportError:
        _impl = _refkin
        COMPILED = False
else:
    _impl = _refkin
    COMPILED = False

BACKEND_NAME = "fastkin" if COMPILED else "refkin"

hat_batch = _refkin.hat_batch
exp_batch = _impl.exp_batch
dexp_contract = _impl.dexp_contract
fk_forward = _impl.fk_forward
fk_backward = _impl.fk_backward

reference = _refkin


def get_backend(name):
    """Return the module implementing the kernel set ``name``."""
    if name == "refkin":
        return _refkin
    if name == "fastkin":
        if not COMPILED:
            raise ImportError("compiled kernel backend is not available")
        from . import _fastkin

        return _fastkin
    raise ValueError(f"unknown backend {name!r}")
