from .tensor import (ComputationRecord, NumericError, Parameter, Tensor, backward,
                     check_finite, grad_enabled, no_grad)
from .ops import (activation, add, conv2d, corrupted_backward, cross_entropy, div, einsum,
                  exp, flatten, fully_connected, global_avg_pool, log, log_softmax, matmul,
                  mean, mul, neg, norm, pad2d, pool_avg, pool_max, power, relu, reshape,
                  sigmoid, softmax, sqrt, sub, tanh, transpose)
from .ops import sum as reduce_sum
from .gradcheck import GradcheckReport, check_model, finite_diff_check, relative_error

__all__ = [
    "ComputationRecord", "NumericError", "Parameter", "Tensor", "backward", "check_finite",
    "grad_enabled", "no_grad", "activation", "add", "conv2d", "corrupted_backward",
    "cross_entropy", "div", "einsum", "exp", "flatten", "fully_connected", "global_avg_pool",
    "log", "log_softmax", "matmul", "mean", "mul", "neg", "norm", "pad2d", "pool_avg",
    "pool_max", "power", "reduce_sum", "relu", "reshape", "sigmoid", "softmax", "sqrt", "sub",
    "tanh", "transpose", "GradcheckReport", "check_model", "finite_diff_check",
    "relative_error",
]
