"""Central finite-difference gradient checking."""

from __future__ import annotations

from typing import Callable, List, Sequence

import numpy as np

from sgcn.autodiff.tensor import Tape, Tensor
from sgcn.errors import NumericError


def relative_error(a: np.ndarray, b: np.ndarray) -> float:
    """Max over entries of ``|a - b| / max(1e-8, |a| + |b|)``."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.size == 0:
        return 0.0
    return float(np.max(np.abs(a - b) / np.maximum(1e-8, np.abs(a) + np.abs(b))))


def numeric_gradient(f: Callable[[], float], params: Sequence[np.ndarray], eps: float = 1e-5) -> List[np.ndarray]:
    """Central differences of ``f()`` w.r.t. each array in ``params``.

    The arrays are perturbed in place and restored afterwards, so ``f`` must
    read them at call time.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    out = []
    for p in params:
        g = np.zeros_like(p)
        flat, gflat = p.reshape(-1), g.reshape(-1)
        for k in range(flat.size):
            orig = flat[k]
            flat[k] = orig + eps
            hi = f()
            flat[k] = orig - eps
            lo = f()
            flat[k] = orig
            if not (np.isfinite(hi) and np.isfinite(lo)):
                raise NumericError(f"objective is not finite near coordinate {k}")
            gflat[k] = (hi - lo) / (2.0 * eps)
        out.append(g)
    return out


def finite_diff_check(
    f: Callable[[], float],
    params: Sequence[np.ndarray],
    analytic: Sequence[np.ndarray],
    eps: float = 1e-5,
) -> float:
    """Largest relative error between ``analytic`` and central differences."""
    numeric = numeric_gradient(f, params, eps)
    return max((relative_error(a, n) for a, n in zip(analytic, numeric)), default=0.0)


def check_gradients(
    build: Callable[..., Tensor],
    arrays: Sequence[np.ndarray],
    eps: float = 1e-5,
) -> float:
    """Gradient-check ``build(*tensors) -> scalar`` at the point ``arrays``.

    ``build`` receives one taped tensor per array and must return a 1x1
    tensor. Returns the max relative error over every input.
    """
    arrays = [np.array(a, dtype=np.float64) for a in arrays]
    if any(a.ndim != 2 for a in arrays):
        raise ValueError("check_gradients expects 2-D arrays")

    def value() -> float:
        return build(*(Tensor(a) for a in arrays)).item()

    tape = Tape()
    leaves = [tape.watch(a) for a in arrays]
    tape.backward(build(*leaves))
    analytic = [tape.grad(t) for t in leaves]
    return finite_diff_check(value, arrays, analytic, eps)
