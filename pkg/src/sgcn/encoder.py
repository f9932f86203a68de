"""Embedding lookup and the bidirectional LSTM argument encoder."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from sgcn.autodiff import (
    LSTM_PARAM_NAMES,
    Tape,
    Tensor,
    add,
    concat_cols,
    gather_rows,
    hadamard,
    lstm_scan,
    matmul,
    sigmoid,
    tanh,
    transpose,
)
from sgcn.errors import EmptyInputError, ShapeError
from sgcn.rng import SplitMix64

PAD_INDEX = 0
OOV_INDEX = 1
N_SPECIAL = 2


@dataclass
class EmbeddingTable:
    """Word vectors with two reserved rows: PAD (index 0, zeros) and OOV (index 1)."""

    vocab: Dict[str, int]
    matrix: np.ndarray
    lowercase: bool = True

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]

    def __len__(self) -> int:
        return self.matrix.shape[0]

    def index(self, token: str) -> int:
        if self.lowercase:
            token = token.lower()
        return self.vocab.get(token, OOV_INDEX)

    def indices(self, tokens: Sequence[str]) -> List[int]:
        return [self.index(t) for t in tokens]

    @classmethod
    def from_vectors(
        cls,
        tokens: Sequence[str],
        vectors: np.ndarray,
        rng: SplitMix64,
        lowercase: bool = True,
    ) -> "EmbeddingTable":
        vectors = np.asarray(vectors, dtype=np.float64)
        d_e = vectors.shape[1]
        matrix = np.zeros((len(tokens) + N_SPECIAL, d_e))
        matrix[OOV_INDEX] = rng.uniform(-0.05, 0.05, d_e)
        matrix[N_SPECIAL:] = vectors
        vocab = {tok: k + N_SPECIAL for k, tok in enumerate(tokens)}
        return cls(vocab, matrix, lowercase)


def glorot(rng: SplitMix64, rows: int, cols: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (rows + cols))
    return rng.uniform(-limit, limit, (rows, cols))


@dataclass
class LstmParams:
    """One LSTM direction: ``W_*`` (H x H), ``U_*`` (H x d_e), ``b_*`` (1 x H)."""

    arrays: Dict[str, np.ndarray] = field(default_factory=dict)

    @classmethod
    def init(cls, hidden: int, d_e: int, rng: SplitMix64, forget_bias: float = 1.0) -> "LstmParams":
        arrays = {}
        for gate in "ifoc":
            arrays[f"W_{gate}"] = glorot(rng, hidden, hidden)
        for gate in "ifoc":
            arrays[f"U_{gate}"] = glorot(rng, hidden, d_e)
        for gate in "ifoc":
            arrays[f"b_{gate}"] = np.zeros((1, hidden))
        arrays["b_f"][:] = forget_bias
        return cls(arrays)

    @property
    def hidden(self) -> int:
        return self.arrays["W_i"].shape[0]

    @property
    def d_e(self) -> int:
        return self.arrays["U_i"].shape[1]

    def ordered(self) -> List[np.ndarray]:
        return [self.arrays[name] for name in LSTM_PARAM_NAMES]


ParamLike = Union[LstmParams, Sequence[Tensor]]


def _tensors(p: ParamLike) -> List[Tensor]:
    if isinstance(p, LstmParams):
        return [Tensor(a) for a in p.ordered()]
    p = list(p)
    if len(p) != 12:
        raise ShapeError(f"expected 12 LSTM parameter tensors, got {len(p)}")
    return p


def embed_sequence(table: EmbeddingTable, tokens: Sequence[str], matrix: Optional[Tensor] = None) -> Tensor:
    """Stack the embedding rows of ``tokens`` into a T x d_e tensor.

    Pass a taped ``matrix`` (the table's weights) to fine-tune embeddings;
    otherwise the lookup is a constant.
    """
    if len(tokens) == 0:
        raise EmptyInputError("cannot embed an empty token sequence")
    src = matrix if matrix is not None else Tensor(table.matrix)
    return gather_rows(src, table.indices(tokens))


def lstm_step(p: ParamLike, x_t: Tensor, h_prev: Tensor, c_prev: Tensor) -> Tuple[Tensor, Tensor]:
    """One LSTM cell update on row vectors, built from primitive tape ops."""
    (W_i, W_f, W_o, W_c, U_i, U_f, U_o, U_c, b_i, b_f, b_o, b_c) = _tensors(p)
    H = W_i.rows
    if h_prev.shape != (1, H) or c_prev.shape != (1, H):
        raise ShapeError(f"lstm_step: state must be 1x{H}, got {h_prev.shape} and {c_prev.shape}")
    if x_t.shape != (1, U_i.cols):
        raise ShapeError(f"lstm_step: input must be 1x{U_i.cols}, got {x_t.rows}x{x_t.cols}")

    def pre(W, U, b):
        return add(add(matmul(h_prev, transpose(W)), matmul(x_t, transpose(U))), b)

    i = sigmoid(pre(W_i, U_i, b_i))
    f = sigmoid(pre(W_f, U_f, b_f))
    o = sigmoid(pre(W_o, U_o, b_o))
    c = add(hadamard(f, c_prev), hadamard(i, tanh(pre(W_c, U_c, b_c))))
    h = hadamard(o, tanh(c))
    return h, c


def bilstm_encode(fwd: ParamLike, bwd: ParamLike, x: Tensor) -> Tensor:
    """Positional representations ``[h_fwd_t ; h_bwd_t]`` for every row of ``x``."""
    if x.rows == 0:
        raise EmptyInputError("bilstm_encode: empty input")
    forward = lstm_scan(x, _tensors(fwd), reverse=False)
    backward = lstm_scan(x, _tensors(bwd), reverse=True)
    return concat_cols(forward, backward)


def watch_lstm(tape: Tape, p: LstmParams) -> List[Tensor]:
    return [tape.watch(a) for a in p.ordered()]
