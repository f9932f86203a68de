"""Dense float64 matrices with reverse-mode differentiation."""

from sgcn.autodiff.fused import (
    DEGREE_FLOOR,
    LSTM_PARAM_NAMES,
    block_adjacency,
    cosine_matrix,
    lstm_scan,
    sym_normalize,
)
from sgcn.autodiff.gradcheck import check_gradients, finite_diff_check, numeric_gradient, relative_error
from sgcn.autodiff.ops import (
    add,
    concat_cols,
    concat_rows,
    elementwise,
    gather_rows,
    hadamard,
    matmul,
    pool_rows,
    relu,
    scale,
    sigmoid,
    softmax,
    softmax_cross_entropy,
    sub,
    sum_all,
    tanh,
    transpose,
)
from sgcn.autodiff.tensor import OpRecord, Tape, Tensor, backward

__all__ = [
    "DEGREE_FLOOR", "LSTM_PARAM_NAMES", "OpRecord", "Tape", "Tensor",
    "add", "backward", "block_adjacency", "check_gradients", "concat_cols",
    "concat_rows", "cosine_matrix", "elementwise", "finite_diff_check",
    "gather_rows", "hadamard", "lstm_scan", "matmul", "numeric_gradient",
    "pool_rows", "relative_error", "relu", "scale", "sigmoid", "softmax",
    "softmax_cross_entropy", "sub", "sum_all", "sym_normalize", "tanh",
    "transpose",
]
