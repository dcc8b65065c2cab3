"""Expressivity protocols for flattened features and convolutional feature maps.

Protocol 1 appends the attribute to the feature matrix and averages the
converged lower bound over ``M`` independently initialised restarts.
Protocol 2 first draws one fixed subset of ``z`` channels, vectorises those
maps per sample and then runs Protocol 1 on the result. The same subset is
reused for every attribute probed on a layer, which follows from deriving it
from the master seed alone.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .mine import MineRunResult, TrainConfig, TrainingDiverged, run_mine
from .numkit import as_matrix, derive_rng, make_rng

DEFAULT_RESTARTS = 16

ATTRIBUTE_KINDS = ("continuous", "discrete-label")


class RestartDiverged(RuntimeError):
    def __init__(self, restart: int, cause: TrainingDiverged):
        self.restart = restart
        self.iteration = cause.iteration
        super().__init__(f"restart {restart}: {cause}")


@dataclass
class AttributeVector:
    values: np.ndarray
    kind: str = "continuous"
    name: str = "attribute"

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64).ravel()
        if self.kind not in ATTRIBUTE_KINDS:
            raise ValueError(f"unknown attribute kind {self.kind!r}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError(f"attribute {self.name!r} contains non-finite values")
        if self.kind == "discrete-label":
            v = self.values
            if np.any(v < 0) or np.any(v != np.round(v)):
                raise ValueError(
                    f"discrete-label attribute {self.name!r} must hold non-negative integers"
                )

    def __len__(self):
        return self.values.shape[0]


@dataclass
class FeatureMapStack:
    """``n x k x d x d`` activations of one convolutional layer."""

    data: np.ndarray

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64)
        if self.data.ndim != 4 or self.data.shape[2] != self.data.shape[3]:
            raise ValueError(f"feature maps must have shape (n, k, d, d), got {self.data.shape}")
        if not np.all(np.isfinite(self.data)):
            raise ValueError("feature maps contain non-finite values")

    @property
    def n(self) -> int:
        return self.data.shape[0]

    @property
    def k(self) -> int:
        return self.data.shape[1]

    @property
    def d(self) -> int:
        return self.data.shape[2]


@dataclass(frozen=True)
class ChannelSubset:
    indices: tuple[int, ...]
    source_k: int
    seed: int

    def __post_init__(self):
        idx = tuple(int(i) for i in self.indices)
        if list(idx) != sorted(set(idx)):
            raise ValueError("channel indices must be sorted and distinct")
        if idx and (idx[0] < 0 or idx[-1] >= self.source_k):
            raise ValueError("channel index out of range")
        object.__setattr__(self, "indices", idx)

    @property
    def z(self) -> int:
        return len(self.indices)

    def to_dict(self) -> dict:
        return {"indices": list(self.indices), "source_k": self.source_k, "seed": self.seed}


@dataclass
class ExpressivityEstimate:
    per_restart: np.ndarray
    mean: float
    max: float
    attribute: str
    feature_dim: int
    config: TrainConfig
    channel_subset: ChannelSubset | None = None
    runs: list[MineRunResult] = field(default_factory=list, repr=False)

    @classmethod
    def from_runs(cls, runs, attribute, feature_dim, config, channel_subset=None):
        vals = np.array([r.expressivity for r in runs], dtype=np.float64)
        return cls(
            per_restart=vals,
            mean=float(np.mean(vals)),
            max=float(np.max(vals)),
            attribute=attribute,
            feature_dim=feature_dim,
            config=config,
            channel_subset=channel_subset,
            runs=list(runs),
        )

    def to_dict(self) -> dict:
        d = {
            "attribute": self.attribute,
            "per_restart": [float(v) for v in self.per_restart],
            "mean": self.mean,
            "max": self.max,
            "feature_dim": self.feature_dim,
            "iterations": [r.iterations_run for r in self.runs],
            "converged": [r.converged for r in self.runs],
            "config": self.config.to_dict(),
        }
        if self.channel_subset is not None:
            d["channel_subset"] = self.channel_subset.to_dict()
        return d


def _as_attribute(A) -> AttributeVector:
    return A if isinstance(A, AttributeVector) else AttributeVector(A)


def augment(F, A) -> np.ndarray:
    """``[F | A]``: the attribute becomes the last column."""
    F = as_matrix(F, "F")
    a = _as_attribute(A).values
    if a.shape[0] != F.shape[0]:
        raise ValueError(f"length mismatch: F has {F.shape[0]} rows, A has {a.shape[0]} values")
    return np.column_stack([F, a])


def select_channels(k: int, z: int, seed: int) -> ChannelSubset:
    if not 1 <= z <= k:
        raise ValueError(f"channel count z={z} must satisfy 1 <= z <= k={k}")
    rng = make_rng(seed)
    idx = np.sort(rng.choice(k, size=z, replace=False))
    return ChannelSubset(tuple(int(i) for i in idx), source_k=k, seed=seed)


def flatten_maps(stack: FeatureMapStack, subset: ChannelSubset) -> np.ndarray:
    """Concatenate the selected ``d x d`` maps of each sample, row-major, in subset order."""
    if subset.source_k != stack.k:
        raise ValueError(
            f"channel subset was drawn for k={subset.source_k} but the stack has k={stack.k}"
        )
    sel = stack.data[:, list(subset.indices)]
    return sel.reshape(stack.n, -1)


def grayscale_flatten(images) -> np.ndarray:
    """Average the R, G and B planes and vectorise row-major."""
    images = np.asarray(images, dtype=np.float64)
    if images.ndim != 4:
        raise ValueError(f"images must have shape (n, 3, h, w), got {images.shape}")
    if images.shape[1] != 3:
        raise ValueError(f"grayscale conversion needs exactly 3 channels, got {images.shape[1]}")
    n = images.shape[0]
    return images.mean(axis=1).reshape(n, -1)


def default_workers() -> int:
    return os.cpu_count() or 1


def run_restarts(X: np.ndarray, M: int, config: TrainConfig, master_seed: int,
                 workers: int = 1) -> list[MineRunResult]:
    """``M`` independent trainings; results are returned in restart order."""
    if M < 1:
        raise ValueError("need at least one restart")

    def one(i):
        try:
            return run_mine(X, config, derive_rng(master_seed, i))
        except TrainingDiverged as exc:
            raise RestartDiverged(i, exc) from exc

    if workers <= 1 or M == 1:
        return [one(i) for i in range(M)]
    with ThreadPoolExecutor(max_workers=min(workers, M)) as pool:
        return list(pool.map(one, range(M)))


def protocol1(F, A, M: int = DEFAULT_RESTARTS, config: TrainConfig | None = None,
              master_seed: int = 42, workers: int = 1) -> ExpressivityEstimate:
    config = config or TrainConfig()
    A = _as_attribute(A)
    X = augment(F, A)
    if X.shape[0] < 4:
        raise ValueError("need at least 4 samples")
    runs = run_restarts(X, M, config, master_seed, workers)
    return ExpressivityEstimate.from_runs(runs, A.name, X.shape[1] - 1, config)


def protocol2(stack: FeatureMapStack, A, z: int, M: int = DEFAULT_RESTARTS,
              config: TrainConfig | None = None, master_seed: int = 42,
              workers: int = 1) -> ExpressivityEstimate:
    subset = select_channels(stack.k, z, master_seed)
    F = flatten_maps(stack, subset)
    est = protocol1(F, A, M, config, master_seed, workers)
    est.channel_subset = subset
    return est
