"""Composite operations with hand-derived backward passes.

Each of these could be spelled with the primitives in :mod:`sgcn.autodiff.ops`
but would put hundreds of tiny records on the tape per example. Tests check
them against both finite differences and primitive compositions.
"""

from __future__ import annotations

from typing import Sequence, Tuple

import numpy as np

from sgcn.autodiff.ops import sigmoid_values
from sgcn.autodiff.tensor import Tensor, emit
from sgcn.errors import EmptyInputError, ShapeError

NORM_EPS = 1e-12
DEGREE_FLOOR = 1e-6
LSTM_PARAM_NAMES = (
    "W_i", "W_f", "W_o", "W_c",
    "U_i", "U_f", "U_o", "U_c",
    "b_i", "b_f", "b_o", "b_c",
)


def cosine_matrix(a: Tensor, b: Tensor) -> Tensor:
    """Pairwise cosine similarity between the rows of ``a`` and ``b``.

    Rows with norm below 1e-12 get similarity 0 and receive no gradient.
    """
    if a.cols != b.cols:
        raise ShapeError(f"cosine_matrix: width mismatch {a.rows}x{a.cols} vs {b.rows}x{b.cols}")
    if a.rows == 0 or b.rows == 0:
        raise EmptyInputError("cosine_matrix: empty operand")
    na = np.linalg.norm(a.value, axis=1, keepdims=True)
    nb = np.linalg.norm(b.value, axis=1, keepdims=True)
    ok_a = na >= NORM_EPS
    ok_b = nb >= NORM_EPS
    ua = np.where(ok_a, a.value / np.where(ok_a, na, 1.0), 0.0)
    ub = np.where(ok_b, b.value / np.where(ok_b, nb, 1.0), 0.0)
    out = np.clip(ua @ ub.T, -1.0, 1.0)

    def back(g):
        d_ua = g @ ub
        d_ub = g.T @ ua
        ga = (d_ua - np.sum(d_ua * ua, axis=1, keepdims=True) * ua) / np.where(ok_a, na, 1.0)
        gb = (d_ub - np.sum(d_ub * ub, axis=1, keepdims=True) * ub) / np.where(ok_b, nb, 1.0)
        return ga * ok_a, gb * ok_b

    return emit("cosine_matrix", (a, b), out, back)


def block_adjacency(cross: Tensor) -> Tensor:
    """Assemble ``[[I_m, M], [M^T, I_n]]`` from the m x n cross block ``M``."""
    m, n = cross.shape
    if m == 0 or n == 0:
        raise EmptyInputError("block_adjacency: empty argument")
    out = np.eye(m + n)
    out[:m, m:] = cross.value
    out[m:, :m] = cross.value.T
    return emit("block_adjacency", (cross,), out, lambda g: (g[:m, m:] + g[m:, :m].T,))


def sym_normalize(adj: Tensor, floor: float = DEGREE_FLOOR) -> Tuple[Tensor, int]:
    """``D^-1/2 A D^-1/2`` with row-sum degrees clamped below at ``floor``.

    Returns the normalized matrix and the number of clamped degrees. Clamped
    degrees are constants for the backward pass.
    """
    if adj.rows != adj.cols:
        raise ShapeError(f"sym_normalize needs a square matrix, got {adj.rows}x{adj.cols}")
    a = adj.value
    deg = a.sum(axis=1)
    clamped = deg < floor
    d = np.where(clamped, floor, deg)
    s = 1.0 / np.sqrt(d)
    out = s[:, None] * a * s[None, :]

    def back(g):
        ga = g * s[:, None] * s[None, :]
        gs = (g * a * s[None, :]).sum(axis=1) + (g * a * s[:, None]).sum(axis=0)
        gd = np.where(clamped, 0.0, gs * (-0.5) * s / d)
        return (ga + gd[:, None],)

    return emit("sym_normalize", (adj,), out, back), int(clamped.sum())


def _stack(params: Sequence[Tensor]):
    w = np.concatenate([p.value for p in params[0:4]], axis=0)  # 4H x H
    u = np.concatenate([p.value for p in params[4:8]], axis=0)  # 4H x d_e
    b = np.concatenate([p.value for p in params[8:12]], axis=1)  # 1 x 4H
    return w, u, b


def lstm_scan(x: Tensor, params: Sequence[Tensor], reverse: bool = False) -> Tensor:
    """Run one LSTM direction over the rows of ``x`` from zero initial state.

    ``params`` follows :data:`LSTM_PARAM_NAMES`: recurrent matrices H x H,
    input matrices H x d_e, biases 1 x H. Output row t is the hidden state
    produced at input position t, whichever way the scan runs.
    """
    if len(params) != 12:
        raise ShapeError(f"lstm_scan needs 12 parameter tensors, got {len(params)}")
    T, d_e = x.shape
    if T == 0:
        raise EmptyInputError("lstm_scan: empty sequence")
    H = params[0].rows
    for name, p in zip(LSTM_PARAM_NAMES, params):
        want = (H, H) if name[0] == "W" else (H, d_e) if name[0] == "U" else (1, H)
        if p.shape != want:
            raise ShapeError(f"lstm_scan: {name} is {p.rows}x{p.cols}, expected {want[0]}x{want[1]}")
    w, u, b = _stack(params)
    order = range(T - 1, -1, -1) if reverse else range(T)
    pre_x = x.value @ u.T + b  # T x 4H
    hs = np.zeros((T, H))
    cs = np.zeros((T, H))
    gates = np.zeros((T, 4 * H))
    h_prev = np.zeros(H)
    c_prev = np.zeros(H)
    prev_of = {}
    for t in order:
        z = pre_x[t] + w @ h_prev
        i = sigmoid_values(z[:H])
        f = sigmoid_values(z[H:2 * H])
        o = sigmoid_values(z[2 * H:3 * H])
        cand = np.tanh(z[3 * H:])
        c = f * c_prev + i * cand
        h = o * np.tanh(c)
        gates[t] = np.concatenate([i, f, o, cand])
        prev_of[t] = (h_prev, c_prev)
        hs[t], cs[t] = h, c
        h_prev, c_prev = h, c

    xv = x.value

    def back(g):
        dw = np.zeros_like(w)
        dz_all = np.zeros((T, 4 * H))
        dh_next = np.zeros(H)
        dc_next = np.zeros(H)
        for t in reversed(order):
            i, f, o, cand = gates[t, :H], gates[t, H:2 * H], gates[t, 2 * H:3 * H], gates[t, 3 * H:]
            hp, cp = prev_of[t]
            tc = np.tanh(cs[t])
            dh = g[t] + dh_next
            dc = dh * o * (1.0 - tc * tc) + dc_next
            dz = np.concatenate([
                dc * cand * i * (1.0 - i),
                dc * cp * f * (1.0 - f),
                dh * tc * o * (1.0 - o),
                dc * i * (1.0 - cand * cand),
            ])
            dz_all[t] = dz
            dw += np.outer(dz, hp)
            dh_next = w.T @ dz
            dc_next = dc * f
        du = dz_all.T @ xv
        db = dz_all.sum(axis=0, keepdims=True)
        dx = dz_all @ u
        grads = [dx]
        grads += [dw[k * H:(k + 1) * H] for k in range(4)]
        grads += [du[k * H:(k + 1) * H] for k in range(4)]
        grads += [db[:, k * H:(k + 1) * H] for k in range(4)]
        return grads

    return emit("lstm_scan_rev" if reverse else "lstm_scan", (x, *params), hs, back)
