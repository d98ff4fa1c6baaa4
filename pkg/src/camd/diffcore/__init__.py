from .tensor import (
    DiffcoreError,
    GraphError,
    LabelError,
    LengthError,
    NumericError,
    ShapeError,
    Tensor,
    activation,
    add,
    backward,
    conv1d,
    cross_entropy,
    expand,
    layer_norm,
    linear,
    lstm_cell,
    lstm_update,
    matmul,
    mul,
    neg,
    relu,
    reshape,
    scale,
    sigmoid,
    softmax,
    stack,
    take,
    tanh,
    tmean,
    transpose,
    tsum,
)
from .optim import AdamW, AdamWState, adamw_step
from .gradcheck import grad_check

__all__ = [
    "DiffcoreError", "GraphError", "LabelError", "LengthError", "NumericError",
    "ShapeError", "Tensor", "activation", "add", "backward", "conv1d",
    "cross_entropy", "expand", "layer_norm", "linear", "lstm_cell", "lstm_update", "matmul",
    "mul", "neg", "relu", "reshape", "scale", "sigmoid", "softmax", "stack",
    "take", "tanh", "tmean", "transpose", "tsum",
    "AdamW", "AdamWState", "adamw_step", "grad_check",
]
