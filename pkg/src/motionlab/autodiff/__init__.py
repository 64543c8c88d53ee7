from .checkpoint import load_checkpoint, save_checkpoint
from .gradcheck import gradcheck
from .kin_ops import fk, rot_exp
from .nn import (
    MLP,
    GruParams,
    Linear,
    Parameters,
    gru_cell,
    kl_diag_gaussians,
    log_softmax,
    reparameterized_sample,
    uniform_init,
)
from .optim import AdamState, adam_step
from .tensor import (
    ShapeMismatch,
    Tape,
    Tensor,
    add,
    clip,
    concat,
    constant,
    current_tape,
    div,
    exp,
    gather_rows,
    l2_norm,
    log,
    matmul,
    mean,
    mul,
    relu,
    reshape,
    scale,
    sigmoid,
    slice_axis,
    sqrt,
    square,
    sub,
    sum_axis,
    tanh,
    tensor_sum,
    transpose,
)
