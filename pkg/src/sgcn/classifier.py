"""Concat pooling over graph nodes and the two-layer MLP head."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from sgcn.autodiff import Tensor, add, concat_cols, matmul, pool_rows, relu
from sgcn.errors import EmptyInputError, ShapeError


@dataclass
class MlpParams:
    W1: np.ndarray  # 2*d_g x h_mlp
    b1: np.ndarray  # 1 x h_mlp
    W2: np.ndarray  # h_mlp x C
    b2: np.ndarray  # 1 x C

    @property
    def num_classes(self) -> int:
        return self.W2.shape[1]

    def tensors(self):
        return [Tensor(a) for a in (self.W1, self.b1, self.W2, self.b2)]


def concat_pool(x_g: Tensor) -> Tensor:
    """``[max over rows ; mean over rows]`` as a 1 x 2*d_g row."""
    if x_g.rows == 0:
        raise EmptyInputError("concat_pool: no nodes")
    return concat_cols(pool_rows("max", x_g), pool_rows("mean", x_g))


def classify(x_c: Tensor, p: Union[MlpParams, Sequence[Tensor]]) -> Tensor:
    """Logits ``ReLU(x W1 + b1) W2 + b2``; softmax is left to the loss."""
    W1, b1, W2, b2 = p.tensors() if isinstance(p, MlpParams) else p
    if x_c.rows != 1 or x_c.cols != W1.rows:
        raise ShapeError(f"classify: input is {x_c.rows}x{x_c.cols}, MLP expects 1x{W1.rows}")
    hidden = relu(add(matmul(x_c, W1), b1))
    return add(matmul(hidden, W2), b2)


def predict(logits) -> int:
    """Argmax, lowest index on ties."""
    z = logits.value if isinstance(logits, Tensor) else np.asarray(logits, dtype=np.float64)
    return int(np.argmax(z.reshape(-1)))
