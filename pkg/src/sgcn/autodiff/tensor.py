"""Dense 2-D tensors and the define-by-run gradient tape."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from sgcn.errors import ContractError, ShapeError

BackwardFn = Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]


def as_matrix(value) -> np.ndarray:
    """Coerce scalars and vectors to a float64 row-major matrix."""
    arr = np.asarray(value, dtype=np.float64)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        arr = arr.reshape(1, -1)
    elif arr.ndim != 2:
        raise ShapeError(f"tensors are 2-D, got an array of shape {arr.shape}")
    return arr


class Tensor:
    """A 2-D float64 matrix, optionally bound to a node on a :class:`Tape`.

    Tensors without a tape are plain immutable values. Tensors produced by
    :meth:`Tape.watch` or by an op with at least one taped input carry
    ``tape`` and ``node_id`` so that :func:`backward` can reach them.
    """

    __slots__ = ("value", "tape", "node_id")

    def __init__(self, value, tape: Optional["Tape"] = None, node_id: Optional[int] = None):
        self.value = as_matrix(value)
        self.tape = tape
        self.node_id = node_id

    @property
    def shape(self) -> Tuple[int, int]:
        return self.value.shape

    @property
    def rows(self) -> int:
        return self.value.shape[0]

    @property
    def cols(self) -> int:
        return self.value.shape[1]

    def item(self) -> float:
        if self.value.size != 1:
            raise ContractError(f"item() needs a 1x1 tensor, got {self.shape}")
        return float(self.value[0, 0])

    def numpy(self) -> np.ndarray:
        return self.value

    def __repr__(self) -> str:
        tag = f", node={self.node_id}" if self.node_id is not None else ""
        return f"Tensor({self.rows}x{self.cols}{tag})"


@dataclass
class OpRecord:
    op: str
    inputs: Tuple[Optional[int], ...]
    output: int
    backward: BackwardFn


class Tape:
    """Ordered record of the operations of one forward pass.

    A tape is single-use and single-threaded: build it during the forward
    pass, call :meth:`backward` once, read gradients with :meth:`grad`.
    """

    def __init__(self):
        self.records: List[OpRecord] = []
        self.shapes: List[Tuple[int, int]] = []
        self.grads: Dict[int, np.ndarray] = {}

    def _new_node(self, shape: Tuple[int, int]) -> int:
        self.shapes.append(shape)
        return len(self.shapes) - 1

    def watch(self, value) -> Tensor:
        """Register a leaf (parameter or input) and return its taped handle."""
        arr = value.value if isinstance(value, Tensor) else as_matrix(value)
        return Tensor(arr, self, self._new_node(arr.shape))

    def record(self, op: str, inputs: Sequence[Tensor], out: np.ndarray, backward: BackwardFn) -> Tensor:
        ids = tuple(t.node_id if t.tape is self else None for t in inputs)
        node = self._new_node(out.shape)
        self.records.append(OpRecord(op, ids, node, backward))
        return Tensor(out, self, node)

    def backward(self, loss: Tensor) -> Dict[int, np.ndarray]:
        if loss.tape is not self:
            raise ContractError("loss tensor does not belong to this tape")
        if loss.shape != (1, 1):
            raise ContractError(f"backward needs a scalar (1x1) loss, got {loss.rows}x{loss.cols}")
        grads: Dict[int, np.ndarray] = {loss.node_id: np.ones((1, 1))}
        for rec in reversed(self.records):
            g = grads.get(rec.output)
            if g is None or all(i is None for i in rec.inputs):
                continue
            in_grads = rec.backward(g)
            for node, ig in zip(rec.inputs, in_grads):
                if node is None or ig is None:
                    continue
                if node in grads:
                    grads[node] = grads[node] + ig
                else:
                    grads[node] = ig
        self.grads = grads
        return grads

    def grad(self, t: Tensor) -> np.ndarray:
        """Gradient of the last backward's loss w.r.t. ``t`` (zeros if unreachable)."""
        if t.tape is not self:
            raise ContractError("tensor does not belong to this tape")
        g = self.grads.get(t.node_id)
        return np.zeros(t.shape) if g is None else g


def backward(tape: Tape, loss: Tensor) -> Dict[int, np.ndarray]:
    return tape.backward(loss)


def tape_of(*tensors: Tensor) -> Optional[Tape]:
    tape = None
    for t in tensors:
        if t.tape is None:
            continue
        if tape is None:
            tape = t.tape
        elif t.tape is not tape:
            raise ContractError("operands live on two different tapes")
    return tape


def emit(op: str, inputs: Sequence[Tensor], out: np.ndarray, backward_fn: BackwardFn) -> Tensor:
    """Wrap ``out``; record it when any input is taped."""
    tape = tape_of(*inputs)
    if tape is None:
        return Tensor(out)
    return tape.record(op, inputs, out, backward_fn)
