from .tensor import (
    NumericError,
    ShapeError,
    Tape,
    Tensor,
    TensorError,
    active_tape,
    add,
    as_tensor,
    backward,
    broadcast_to,
    concat,
    cos,
    cross_entropy,
    div,
    exp,
    l2norm,
    log,
    logsumexp,
    matmul,
    mul,
    no_grad,
    normalize,
    relu,
    reshape,
    sigmoid,
    silu,
    sin,
    softmax,
    sqrt,
    stop_gradient,
    sub,
    take_rows,
    tanh,
    tmax,
    tmean,
    transpose,
    tsum,
    zero_grads,
)
from .optim import AdamState, adam_step, global_grad_norm, poly_lr
from .checkpoint import load_checkpoint, save_checkpoint
