"""Primitive differentiable operations.

Every function takes and returns :class:`Tensor`. When an input is taped the
result is recorded together with a closure computing the vector-Jacobian
product for each input.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from sgcn.autodiff.tensor import Tensor, emit
from sgcn.errors import EmptyInputError, LabelIndexError, ShapeError

ELEMENTWISE_OPS = ("add", "sub", "hadamard", "sigmoid", "tanh", "relu")
POOL_KINDS = ("max", "mean")


def _same_shape(op: str, a: Tensor, b: Tensor) -> None:
    if a.shape != b.shape:
        raise ShapeError(f"{op}: shape mismatch {a.rows}x{a.cols} vs {b.rows}x{b.cols}")


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.cols != b.rows:
        raise ShapeError(f"matmul: cannot multiply {a.rows}x{a.cols} by {b.rows}x{b.cols}")
    av, bv = a.value, b.value
    return emit("matmul", (a, b), av @ bv, lambda g: (g @ bv.T, av.T @ g))


def add(a: Tensor, b: Tensor) -> Tensor:
    _same_shape("add", a, b)
    return emit("add", (a, b), a.value + b.value, lambda g: (g, g))


def sub(a: Tensor, b: Tensor) -> Tensor:
    _same_shape("sub", a, b)
    return emit("sub", (a, b), a.value - b.value, lambda g: (g, -g))


def hadamard(a: Tensor, b: Tensor) -> Tensor:
    _same_shape("hadamard", a, b)
    av, bv = a.value, b.value
    return emit("hadamard", (a, b), av * bv, lambda g: (g * bv, g * av))


def sigmoid_values(x: np.ndarray) -> np.ndarray:
    # tanh form: overflow-free and exactly 0.5 at 0
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def sigmoid(a: Tensor) -> Tensor:
    s = sigmoid_values(a.value)
    return emit("sigmoid", (a,), s, lambda g: (g * s * (1.0 - s),))


def tanh(a: Tensor) -> Tensor:
    t = np.tanh(a.value)
    return emit("tanh", (a,), t, lambda g: (g * (1.0 - t * t),))


def relu(a: Tensor) -> Tensor:
    mask = a.value > 0.0
    return emit("relu", (a,), np.where(mask, a.value, 0.0), lambda g: (g * mask,))


_UNARY = {"sigmoid": sigmoid, "tanh": tanh, "relu": relu}
_BINARY = {"add": add, "sub": sub, "hadamard": hadamard}


def elementwise(op: str, a: Tensor, b: Tensor | None = None) -> Tensor:
    """Dispatch one of :data:`ELEMENTWISE_OPS` by name."""
    if op in _BINARY:
        if b is None:
            raise ShapeError(f"{op} needs two operands")
        return _BINARY[op](a, b)
    if op in _UNARY:
        return _UNARY[op](a)
    raise ValueError(f"unknown elementwise op {op!r}; expected one of {ELEMENTWISE_OPS}")


def transpose(a: Tensor) -> Tensor:
    return emit("transpose", (a,), a.value.T.copy(), lambda g: (g.T,))


def concat_cols(a: Tensor, b: Tensor) -> Tensor:
    if a.rows != b.rows:
        raise ShapeError(f"concat_cols: row mismatch {a.rows}x{a.cols} vs {b.rows}x{b.cols}")
    k = a.cols
    out = np.concatenate([a.value, b.value], axis=1)
    return emit("concat_cols", (a, b), out, lambda g: (g[:, :k], g[:, k:]))


def concat_rows(a: Tensor, b: Tensor) -> Tensor:
    if a.cols != b.cols:
        raise ShapeError(f"concat_rows: column mismatch {a.rows}x{a.cols} vs {b.rows}x{b.cols}")
    k = a.rows
    out = np.concatenate([a.value, b.value], axis=0)
    return emit("concat_rows", (a, b), out, lambda g: (g[:k], g[k:]))


def gather_rows(table: Tensor, indices: Sequence[int]) -> Tensor:
    """Row lookup; repeated indices receive the sum of their gradients."""
    idx = np.asarray(indices, dtype=np.int64)
    if idx.size == 0:
        raise EmptyInputError("gather_rows: no indices")
    if idx.min() < 0 or idx.max() >= table.rows:
        raise LabelIndexError(f"gather_rows: index out of range for {table.rows} rows")
    n_rows, n_cols = table.shape

    def back(g):
        full = np.zeros((n_rows, n_cols))
        np.add.at(full, idx, g)
        return (full,)

    return emit("gather_rows", (table,), table.value[idx], back)


def pool_rows(kind: str, x: Tensor) -> Tensor:
    """Column-wise max or mean over rows, giving a 1 x cols tensor.

    Max routes the gradient to the first row attaining the maximum in each
    column.
    """
    if x.rows == 0:
        raise EmptyInputError("pool_rows: zero rows")
    v = x.value
    r, c = v.shape
    if kind == "max":
        arg = np.argmax(v, axis=0)  # first occurrence on ties
        cols = np.arange(c)

        def back(g):
            out = np.zeros((r, c))
            out[arg, cols] = g[0]
            return (out,)

        return emit("pool_max", (x,), v[arg, cols].reshape(1, c), back)
    if kind == "mean":
        return emit(
            "pool_mean",
            (x,),
            v.mean(axis=0, keepdims=True),
            lambda g: (np.broadcast_to(g / r, (r, c)).copy(),),
        )
    raise ValueError(f"unknown pool kind {kind!r}; expected one of {POOL_KINDS}")


def softmax(z: np.ndarray) -> np.ndarray:
    e = np.exp(z - z.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def softmax_cross_entropy(logits: Tensor, label: int) -> Tensor:
    """Mean-free cross entropy of a single 1 x C logit row against ``label``."""
    if logits.rows != 1:
        raise ShapeError(f"softmax_cross_entropy expects 1xC logits, got {logits.rows}x{logits.cols}")
    n_cls = logits.cols
    if not 0 <= label < n_cls:
        raise LabelIndexError(f"label {label} out of range for {n_cls} classes")
    z = logits.value[0]
    zmax = z.max()
    shifted = z - zmax
    lse = np.log(np.exp(shifted).sum())
    loss = lse - shifted[label]

    def back(g):
        p = np.exp(shifted - lse)
        p[label] -= 1.0
        return (g[0, 0] * p.reshape(1, n_cls),)

    return emit("softmax_xent", (logits,), np.array([[loss]]), back)


def sum_all(a: Tensor) -> Tensor:
    shape = a.shape
    return emit("sum", (a,), np.array([[a.value.sum()]]), lambda g: (np.full(shape, g[0, 0]),))


def scale(a: Tensor, c: float) -> Tensor:
    return emit("scale", (a,), a.value * c, lambda g: (g * c,))
