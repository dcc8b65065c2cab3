"""Synthetic feature/attribute pairs with known mutual information (in nats)."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .numkit import derive_rng, make_rng
from .protocols import AttributeVector

FAMILIES = ("gaussian_pair", "linear_gaussian", "discrete_embed", "independent")

ONE_HOT_SCALE = 5.0
MC_SAMPLES = 1_000_000


@dataclass(frozen=True)
class SynthSpec:
    """Recipe for one synthetic dataset.

    ``parameter`` is the correlation for ``gaussian_pair``, the signal fraction
    R^2 for ``linear_gaussian`` and the noise standard deviation for
    ``discrete_embed``; ``independent`` ignores it.
    """

    family: str
    n: int = 5000
    dim: int = 1
    parameter: float = 0.0
    classes: int = 4
    seed: int = 0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}; expected one of {FAMILIES}")
        if self.n < 4:
            raise ValueError("n must be at least 4")
        if self.dim < 1:
            raise ValueError("dim must be at least 1")
        if self.family == "gaussian_pair" and not abs(self.parameter) < 1:
            raise ValueError("gaussian_pair needs |rho| < 1")
        if self.family == "linear_gaussian" and not 0 <= self.parameter < 1:
            raise ValueError("linear_gaussian needs 0 <= R^2 < 1")
        if self.family == "discrete_embed":
            if self.classes < 2:
                raise ValueError("discrete_embed needs at least 2 classes")
            if self.parameter < 0:
                raise ValueError("discrete_embed noise sigma must be non-negative")


class OracleMI(NamedTuple):
    value: float
    stderr: float


def gaussian_mi(rho: float) -> float:
    return -0.5 * math.log1p(-rho * rho)


def discrete_embed_mi(classes: int, sigma: float, samples: int = MC_SAMPLES,
                      seed: int = 0, chunk: int = 100_000) -> OracleMI:
    """MI between a uniform label and its scaled one-hot code plus isotropic noise.

    ``I = log K + E[log p(a | f)]``; by symmetry the expectation is taken with
    the true label fixed to 0. The posterior logits are ``scale * f / sigma^2``.
    """
    if sigma == 0:
        return OracleMI(math.log(classes), 0.0)
    rng = derive_rng(seed, 1)
    total = 0.0
    total_sq = 0.0
    done = 0
    while done < samples:
        m = min(chunk, samples - done)
        f = sigma * rng.standard_normal((m, classes))
        f[:, 0] += ONE_HOT_SCALE
        logits = f * (ONE_HOT_SCALE / sigma**2)
        top = logits.max(axis=1)
        log_post = logits[:, 0] - top - np.log(np.exp(logits - top[:, None]).sum(axis=1))
        total += log_post.sum()
        total_sq += (log_post**2).sum()
        done += m
    mean = total / samples
    var = max(total_sq / samples - mean * mean, 0.0)
    return OracleMI(math.log(classes) + mean, math.sqrt(var / samples))


def true_mi(spec: SynthSpec) -> OracleMI:
    if spec.family == "gaussian_pair":
        return OracleMI(gaussian_mi(spec.parameter), 0.0)
    if spec.family == "linear_gaussian":
        return OracleMI(-0.5 * math.log1p(-spec.parameter), 0.0)
    if spec.family == "discrete_embed":
        return discrete_embed_mi(spec.classes, spec.parameter, seed=spec.seed)
    return OracleMI(0.0, 0.0)


def generate(spec: SynthSpec) -> tuple[np.ndarray, AttributeVector, float]:
    """Draw ``(F, A, true_mi)``.

    ``discrete_embed`` features always have one column per class, so ``dim``
    is ignored there; ``gaussian_pair`` is scalar by construction.
    """
    rng = make_rng(spec.seed)
    n = spec.n
    name = spec.family
    kind = "continuous"
    if spec.family == "gaussian_pair":
        rho = spec.parameter
        x = rng.standard_normal(n)
        a = rho * x + math.sqrt(1.0 - rho * rho) * rng.standard_normal(n)
        F = x[:, None]
    elif spec.family == "linear_gaussian":
        F = rng.standard_normal((n, spec.dim))
        w = rng.standard_normal(spec.dim)
        w *= math.sqrt(spec.parameter) / np.linalg.norm(w)
        a = F @ w + math.sqrt(1.0 - spec.parameter) * rng.standard_normal(n)
    elif spec.family == "discrete_embed":
        labels = rng.integers(0, spec.classes, size=n)
        F = ONE_HOT_SCALE * np.eye(spec.classes)[labels]
        if spec.parameter > 0:
            F = F + spec.parameter * rng.standard_normal(F.shape)
        a = labels.astype(np.float64)
        kind = "discrete-label"
    else:
        F = rng.standard_normal((n, spec.dim))
        a = rng.standard_normal(n)[rng.permutation(n)]
    return F, AttributeVector(a, kind=kind, name=name), true_mi(spec).value
