"""Autodiff core: tensors, differentiable ops, gradient checking."""
from .gradcheck import (
    analytic_grad,
    check_gradient,
    finite_difference_grad,
    max_relative_error,
)
from .ops import (
    add,
    clamp_min,
    dot,
    exp,
    forward_op,
    l2_normalize,
    log,
    log_sum_exp,
    matmul,
    mul,
    reduce_mean,
    reduce_sum,
    relu,
    reshape,
    scale,
    softmax,
    softmax_temperature,
    sub,
    take_rows,
    transpose,
)
from .tensor import Tensor, as_tensor, backward

__all__ = [
    "Tensor",
    "as_tensor",
    "backward",
    "add",
    "sub",
    "mul",
    "scale",
    "matmul",
    "dot",
    "transpose",
    "relu",
    "exp",
    "log",
    "reduce_sum",
    "reduce_mean",
    "reshape",
    "clamp_min",
    "take_rows",
    "l2_normalize",
    "log_sum_exp",
    "softmax",
    "softmax_temperature",
    "forward_op",
    "analytic_grad",
    "check_gradient",
    "finite_difference_grad",
    "max_relative_error",
]
