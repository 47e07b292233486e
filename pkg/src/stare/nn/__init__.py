"""Float64 tensor engine: differentiable ops, Adam and checkpoints."""

from .checkpoint import FORMAT_VERSION, CheckpointError, load_checkpoint, save_checkpoint
from .gradcheck import gradcheck, numeric_grad, rel_error
from .optim import AdamState, adam_step
from .tensor import (
    ShapeError,
    Tensor,
    add,
    add_bias,
    concat,
    contract,
    cross_entropy,
    dropout,
    embedding,
    gather_rows,
    gelu,
    layer_norm,
    log_softmax_np,
    lstm,
    matmul,
    reshape,
    scale,
    select,
    softmax,
    transpose,
)

__all__ = [
    "FORMAT_VERSION", "CheckpointError", "load_checkpoint", "save_checkpoint",
    "gradcheck", "numeric_grad", "rel_error", "AdamState", "adam_step",
    "ShapeError", "Tensor", "add", "add_bias", "concat", "contract", "cross_entropy", "dropout",
    "embedding", "gather_rows", "gelu", "layer_norm", "log_softmax_np", "lstm", "matmul", "reshape",
    "scale", "select", "softmax", "transpose",
]
