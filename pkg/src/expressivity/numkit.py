"""Small deterministic numeric core shared by the estimator, probes and generators.

Matrices are plain ``numpy.ndarray`` objects of dtype float64. Randomness comes
from numpy's Philox counter-based bit generator, so a ``(seed, stream)`` pair
always yields the same draws on every platform numpy supports.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "as_matrix",
    "log_mean_exp",
    "elu",
    "elu_grad",
    "elu_and_grad",
    "make_rng",
    "derive_rng",
    "permutation",
]


def as_matrix(data, name: str = "matrix") -> np.ndarray:
    """Coerce ``data`` to a finite 2-D float64 array."""
    arr = np.asarray(data, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


def log_mean_exp(values) -> float:
    """Return ``log(mean(exp(values)))`` using a max shift."""
    v = np.asarray(values, dtype=np.float64).ravel()
    if v.size == 0:
        raise ValueError("empty batch")
    if not np.all(np.isfinite(v)):
        raise ValueError("log_mean_exp input contains non-finite entries")
    shift = v.max()
    return float(shift + np.log(np.mean(np.exp(v - shift))))


def elu(x):
    """ELU with unit alpha: ``x`` for ``x >= 0`` and ``exp(x) - 1`` below zero."""
    x = np.asarray(x, dtype=np.float64)
    out = np.where(x >= 0, x, np.expm1(np.minimum(x, 0.0)))
    return float(out) if out.ndim == 0 else out


def elu_grad(x):
    x = np.asarray(x, dtype=np.float64)
    out = np.exp(np.minimum(x, 0.0))
    return float(out) if out.ndim == 0 else out


def elu_and_grad(z: np.ndarray, overwrite: bool = False,
                 grad_out: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Activation and derivative of ELU from one ``exp`` call.

    Uses ``elu'(z) = exp(min(z, 0))`` and ``elu(z) = max(z, 0) + elu'(z) - 1``.
    With ``overwrite`` the activation is written into ``z``; ``grad_out``
    receives the derivative when given.
    """
    grad = np.minimum(z, 0.0, out=grad_out)
    np.exp(grad, out=grad)
    act = np.maximum(z, 0.0, out=z if overwrite else None)
    act += grad
    act -= 1.0
    return act, grad


def make_rng(seed: int) -> np.random.Generator:
    """Generator over Philox keyed by ``seed`` (any non-negative int up to 128 bits)."""
    if seed < 0:
        raise ValueError("seed must be non-negative")
    return np.random.Generator(np.random.Philox(key=int(seed)))


def derive_rng(master_seed: int, index: int) -> np.random.Generator:
    """Independent generator for task ``index`` under ``master_seed``.

    The Philox key is fixed to ``master_seed`` and the task index selects a
    disjoint counter block, so streams never overlap and do not depend on
    scheduling order.
    """
    if master_seed < 0 or index < 0:
        raise ValueError("master_seed and index must be non-negative")
    bitgen = np.random.Philox(key=int(master_seed))
    # each jump advances 2**128 draws
    bitgen = bitgen.jumped(int(index) + 1)
    return np.random.Generator(bitgen)


def permutation(n: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform random permutation of ``0..n-1`` (numpy's Fisher-Yates shuffle)."""
    if n < 1:
        raise ValueError("permutation length must be at least 1")
    return rng.permutation(n)
