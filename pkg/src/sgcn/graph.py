"""Semantic interaction graph between two arguments and its graph convolution."""

from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Union

import numpy as np

from sgcn.autodiff import (
    Tensor,
    block_adjacency,
    concat_rows,
    cosine_matrix,
    matmul,
    relu,
    sym_normalize,
)
from sgcn.autodiff.fused import DEGREE_FLOOR
from sgcn.errors import DataError, EmptyInputError, ShapeError


@dataclass
class InteractionGraph:
    m: int
    n: int
    cross: Tensor  # m x n cosine weights
    adjacency: Tensor  # [[I, M], [M^T, I]]
    normalized: Tensor
    degree_floor_hits: int = 0

    @property
    def num_nodes(self) -> int:
        return self.m + self.n

    @property
    def num_edges(self) -> int:
        return self.m * self.n


@dataclass
class GcnParams:
    W_g: np.ndarray  # d_h x d_g

    @property
    def d_g(self) -> int:
        return self.W_g.shape[1]


def edge_weight(u: Tensor, v: Tensor) -> Tensor:
    """Cosine similarity of two row vectors as a 1x1 tensor."""
    if u.rows != 1 or v.rows != 1:
        raise ShapeError(f"edge_weight takes row vectors, got {u.shape} and {v.shape}")
    return cosine_matrix(u, v)


def build_graph(h1: Tensor, h2: Tensor, floor: float = DEGREE_FLOOR) -> InteractionGraph:
    """Build the bipartite-plus-self-loop graph over both arguments' positions.

    Nodes 0..m-1 are argument-1 positions, m..m+n-1 argument-2 positions.
    Degrees below ``floor`` (possible because cosine weights can be
    negative) are clamped and counted in ``degree_floor_hits``.
    """
    if h1.rows == 0 or h2.rows == 0:
        raise EmptyInputError("build_graph: both arguments need at least one position")
    cross = cosine_matrix(h1, h2)
    adjacency = block_adjacency(cross)
    normalized, hits = sym_normalize(adjacency, floor)
    return InteractionGraph(h1.rows, h2.rows, cross, adjacency, normalized, hits)


def gcn_forward(g: InteractionGraph, x: Tensor, w_g: Union[Tensor, np.ndarray]) -> Tensor:
    """One graph convolution ``ReLU(A_hat X W_g)``."""
    if not isinstance(w_g, Tensor):
        w_g = Tensor(w_g)
    if x.rows != g.num_nodes:
        raise ShapeError(f"gcn_forward: X has {x.rows} rows but the graph has {g.num_nodes} nodes")
    if x.cols != w_g.rows:
        raise ShapeError(f"gcn_forward: X is {x.rows}x{x.cols} but W_g is {w_g.rows}x{w_g.cols}")
    return relu(matmul(g.normalized, matmul(x, w_g)))


def stack_nodes(h1: Tensor, h2: Tensor) -> Tensor:
    return concat_rows(h1, h2)


def interaction_matrix(h1, h2) -> np.ndarray:
    """Untaped pairwise cosine scores between argument positions (m x n)."""
    a = Tensor(h1.value if isinstance(h1, Tensor) else h1)
    b = Tensor(h2.value if isinstance(h2, Tensor) else h2)
    return cosine_matrix(a, b).value


def write_matrix_csv(matrix: np.ndarray, path: Union[str, os.PathLike]) -> None:
    """First line ``m,n``, then one line of ``n`` values per row."""
    m, n = matrix.shape
    with open(path, "w") as fh:
        fh.write(f"{m},{n}\n")
        for row in matrix:
            fh.write(",".join(format(v, ".17g") for v in row) + "\n")


def read_matrix_csv(path: Union[str, os.PathLike]) -> np.ndarray:
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines:
        raise DataError(f"{path}: empty matrix file")
    try:
        m, n = (int(v) for v in lines[0].split(","))
        rows = [[float(v) for v in ln.split(",")] for ln in lines[1:]]
    except ValueError as exc:
        raise DataError(f"{path}: malformed matrix CSV ({exc})") from exc
    arr = np.array(rows, dtype=np.float64).reshape(len(rows), -1) if rows else np.zeros((0, n))
    if arr.shape != (m, n):
        raise DataError(f"{path}: header says {m}x{n} but body is {arr.shape[0]}x{arr.shape[1]}")
    return arr
