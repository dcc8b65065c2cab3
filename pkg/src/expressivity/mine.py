"""MINE statistics network and its Donsker-Varadhan training loop.

The statistics network is a two-hidden-layer ELU perceptron

    T(x) = w3 . elu(W2 elu(W1 x + b1) + b2) + b3

where ``x`` is a feature row with the attribute value appended. Training
maximises the minibatch lower bound

    V = mean_i T(f_i, a_i) - log mean_i exp(T(f_i, a~_i))

with ``a~`` a fresh within-batch permutation of the attributes. The gradient
replaces the marginal denominator ``mean exp(T)`` by an exponential moving
average to reduce minibatch bias.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace

import numpy as np

from .numkit import as_matrix, elu_and_grad, log_mean_exp

__all__ = [
    "MineParams",
    "TrainConfig",
    "MineRunResult",
    "TrainingDiverged",
    "init_params",
    "forward",
    "forward_batch",
    "batch_objective",
    "surrogate_loss",
    "backward",
    "standardize_columns",
    "run_mine",
    "Adam",
    "SGD",
]


class TrainingDiverged(RuntimeError):
    """Raised when the loss or gradient becomes non-finite."""

    def __init__(self, iteration: int, detail: str = ""):
        self.iteration = iteration
        msg = f"training diverged at iteration {iteration}"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)


@dataclass
class MineParams:
    """Parameters of the statistics network. ``b3`` is held as a 0-d array."""

    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: np.ndarray
    w3: np.ndarray
    b3: np.ndarray

    def __post_init__(self):
        for f in fields(self):
            setattr(self, f.name, np.asarray(getattr(self, f.name), dtype=np.float64))
        if self.b3.shape != ():
            raise ValueError("b3 must be a scalar")
        h1, d = self.W1.shape
        h2 = self.W2.shape[0]
        if (
            self.b1.shape != (h1,)
            or self.W2.shape != (h2, h1)
            or self.b2.shape != (h2,)
            or self.w3.shape != (h2,)
        ):
            raise ValueError("inconsistent parameter shapes")

    @property
    def input_dim(self) -> int:
        return self.W1.shape[1]

    def arrays(self) -> list[np.ndarray]:
        return [getattr(self, f.name) for f in fields(self)]

    def copy(self) -> "MineParams":
        return MineParams(*(a.copy() for a in self.arrays()))

    def zeros_like(self) -> "MineParams":
        return MineParams(*(np.zeros_like(a) for a in self.arrays()))

    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(a)) for a in self.arrays())

    @classmethod
    def zeros(cls, input_dim: int, hidden: tuple[int, int] = (256, 128)) -> "MineParams":
        h1, h2 = hidden
        return cls(
            np.zeros((h1, input_dim)), np.zeros(h1),
            np.zeros((h2, h1)), np.zeros(h2),
            np.zeros(h2), np.zeros(()),
        )


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 512
    learning_rate: float = 1e-3
    max_iters: int = 5000
    convergence_window: int = 50
    convergence_tol: float = 1e-3
    ema_rate: float = 0.01
    optimizer: str = "adam"
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    hidden: tuple[int, int] = (256, 128)
    standardize: bool = True

    def __post_init__(self):
        if self.batch_size < 2:
            raise ValueError("batch_size must be at least 2")
        if not 0.0 < self.ema_rate <= 1.0:
            raise ValueError("ema_rate must lie in (0, 1]")
        if self.optimizer not in ("adam", "sgd"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.max_iters < 1 or self.convergence_window < 1:
            raise ValueError("max_iters and convergence_window must be positive")
        if len(self.hidden) != 2 or min(self.hidden) < 1:
            raise ValueError("hidden must be two positive widths")
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))

    def to_dict(self) -> dict:
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        d["hidden"] = list(self.hidden)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        d = dict(d)
        if "hidden" in d:
            d["hidden"] = tuple(d["hidden"])
        return cls(**d)

    def with_overrides(self, **kw) -> "TrainConfig":
        return replace(self, **{k: v for k, v in kw.items() if v is not None})


@dataclass
class MineRunResult:
    expressivity: float
    iterations_run: int
    final_window_mean: float
    converged: bool
    history: np.ndarray = field(default_factory=lambda: np.zeros(0), repr=False)

    def __eq__(self, other):
        if not isinstance(other, MineRunResult):
            return NotImplemented
        return (
            self.expressivity == other.expressivity
            and self.iterations_run == other.iterations_run
            and self.final_window_mean == other.final_window_mean
            and self.converged == other.converged
            and np.array_equal(self.history, other.history)
        )


def init_params(input_dim: int, rng: np.random.Generator,
                hidden: tuple[int, int] = (256, 128)) -> MineParams:
    """Glorot-uniform weights, zero biases."""
    if input_dim < 2:
        raise ValueError("input_dim must be at least 2 (one feature plus the attribute)")
    h1, h2 = hidden

    def glorot(fan_out, fan_in):
        lim = math.sqrt(6.0 / (fan_in + fan_out))
        return rng.uniform(-lim, lim, size=(fan_out, fan_in))

    W1 = glorot(h1, input_dim)
    W2 = glorot(h2, h1)
    w3 = glorot(1, h2).ravel()
    return MineParams(W1, np.zeros(h1), W2, np.zeros(h2), w3, np.zeros(()))


def forward_batch(params: MineParams, X: np.ndarray):
    """Evaluate ``T`` on every row of ``X``; returns ``(t, cache)``."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != params.input_dim:
        raise ValueError(
            f"input width {X.shape[-1] if X.ndim else 0} does not match network input {params.input_dim}"
        )
    z1 = X @ params.W1.T
    z1 += params.b1
    h1, g1 = elu_and_grad(z1, overwrite=True)
    z2 = h1 @ params.W2.T
    z2 += params.b2
    h2, g2 = elu_and_grad(z2, overwrite=True)
    t = h2 @ params.w3 + params.b3
    cache = {"x": X, "h1": h1, "g1": g1, "h2": h2, "g2": g2}
    return t, cache


def forward(params: MineParams, x) -> tuple[float, dict]:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError("forward expects a single input vector")
    t, cache = forward_batch(params, x[None, :])
    return float(t[0]), cache


def _backprop(params: MineParams, cache: dict, upstream: np.ndarray) -> MineParams:
    """Reverse-mode pass: gradient of ``sum_i upstream_i * T(x_i)``.

    Consumes the cache: the stored activation derivatives are overwritten.
    """
    dz2 = cache.pop("g2")
    dz2 *= params.w3
    dz2 *= upstream[:, None]
    dh1 = dz2 @ params.W2
    dh1 *= cache.pop("g1")
    return MineParams(
        W1=dh1.T @ cache["x"],
        b1=dh1.sum(axis=0),
        W2=dz2.T @ cache["h1"],
        b2=dz2.sum(axis=0),
        w3=cache["h2"].T @ upstream,
        b3=upstream.sum(),
    )


class _Workspace:
    """Fixed buffers for repeated forward/backward passes on ``rows``-row batches.

    Same arithmetic as :func:`forward_batch` and :func:`_backprop`, but every
    intermediate lives in a preallocated array. Fresh multi-megabyte
    temporaries are returned to the OS and page-faulted back on each
    iteration, which costs more than the elementwise work itself.
    """

    def __init__(self, params: MineParams, rows: int):
        h1, h2 = params.b1.size, params.b2.size
        self.z1 = np.empty((rows, h1))
        self.g1 = np.empty((rows, h1))
        self.dh1 = np.empty((rows, h1))
        self.z2 = np.empty((rows, h2))
        self.g2 = np.empty((rows, h2))
        self.t = np.empty(rows)
        self.grads = params.zeros_like()

    def forward(self, params: MineParams, X: np.ndarray) -> np.ndarray:
        np.matmul(X, params.W1.T, out=self.z1)
        self.z1 += params.b1
        elu_and_grad(self.z1, overwrite=True, grad_out=self.g1)
        np.matmul(self.z1, params.W2.T, out=self.z2)
        self.z2 += params.b2
        elu_and_grad(self.z2, overwrite=True, grad_out=self.g2)
        np.matmul(self.z2, params.w3, out=self.t)
        self.t += params.b3
        return self.t

    def backward(self, params: MineParams, X: np.ndarray, upstream: np.ndarray) -> MineParams:
        """Gradients of ``sum_i upstream_i * T(x_i)``; overwrites the stored derivatives."""
        g = self.grads
        dz2 = self.g2
        dz2 *= params.w3
        dz2 *= upstream[:, None]
        np.matmul(dz2, params.W2, out=self.dh1)
        self.dh1 *= self.g1
        np.matmul(self.dh1.T, X, out=g.W1)
        np.sum(self.dh1, axis=0, out=g.b1)
        np.matmul(dz2.T, self.z1, out=g.W2)
        np.sum(dz2, axis=0, out=g.b2)
        np.matmul(self.z2.T, upstream, out=g.w3)
        g.b3[...] = upstream.sum()
        return g


def _pair_inputs(F_batch, A_batch, A_shuffled):
    F_batch = as_matrix(F_batch, "F_batch")
    A_batch = np.asarray(A_batch, dtype=np.float64).ravel()
    A_shuffled = np.asarray(A_shuffled, dtype=np.float64).ravel()
    b = F_batch.shape[0]
    if A_batch.shape[0] != b or A_shuffled.shape[0] != b:
        raise ValueError(
            f"batch length mismatch: F has {b} rows, A {A_batch.shape[0]}, shuffled A {A_shuffled.shape[0]}"
        )
    if b < 2:
        raise ValueError("batch must contain at least 2 rows")
    joint = np.column_stack([F_batch, A_batch])
    marginal = np.column_stack([F_batch, A_shuffled])
    return np.vstack([joint, marginal]), b


def batch_objective(params: MineParams, F_batch, A_batch, A_shuffled) -> float:
    """Donsker-Varadhan lower bound ``V`` on one batch."""
    X, b = _pair_inputs(F_batch, A_batch, A_shuffled)
    t, _ = forward_batch(params, X)
    return float(np.mean(t[:b]) - log_mean_exp(t[b:]))


def surrogate_loss(params: MineParams, F_batch, A_batch, A_shuffled, ema_denominator: float) -> float:
    """``-mean T_joint + mean exp(T_marginal) / ema``.

    Its exact gradient is the EMA-corrected gradient of ``-V``, which makes it
    the right target for finite-difference checks of :func:`backward`.
    """
    X, b = _pair_inputs(F_batch, A_batch, A_shuffled)
    t, _ = forward_batch(params, X)
    return float(-np.mean(t[:b]) + np.mean(np.exp(t[b:])) / ema_denominator)


def backward(params: MineParams, F_batch, A_batch, A_shuffled, ema_denominator: float) -> MineParams:
    """Gradient of ``-V`` with the marginal denominator replaced by ``ema_denominator``."""
    if not ema_denominator > 0:
        raise ValueError("ema_denominator must be positive")
    X, b = _pair_inputs(F_batch, A_batch, A_shuffled)
    t, cache = forward_batch(params, X)
    up = np.empty(2 * b)
    up[:b] = -1.0 / b
    up[b:] = np.exp(t[b:]) / (b * ema_denominator)
    return _backprop(params, cache, up)


class Adam:
    def __init__(self, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.t = 0
        self.m = None
        self.v = None

    def step(self, params: list[np.ndarray], grads: list[np.ndarray]) -> None:
        if self.m is None:
            self.m = [np.zeros_like(p) for p in params]
            self.v = [np.zeros_like(p) for p in params]
            self._scratch = [(np.empty_like(p), np.empty_like(p)) for p in params]
        self.t += 1
        bc1 = 1.0 - self.beta1 ** self.t
        bc2 = 1.0 - self.beta2 ** self.t
        # p -= lr * (m / bc1) / (sqrt(v / bc2) + eps), without temporaries
        for p, g, m, v, (s, u) in zip(params, grads, self.m, self.v, self._scratch):
            m *= self.beta1
            np.multiply(g, 1.0 - self.beta1, out=s)
            m += s
            v *= self.beta2
            np.multiply(g, g, out=s)
            s *= 1.0 - self.beta2
            v += s
            np.divide(m, bc1, out=s)
            s *= self.lr
            np.divide(v, bc2, out=u)
            np.sqrt(u, out=u)
            u += self.eps
            s /= u
            p -= s


class SGD:
    def __init__(self, lr=1e-3):
        self.lr = lr

    def step(self, params, grads):
        for p, g in zip(params, grads):
            p -= self.lr * g


def _make_optimizer(config: TrainConfig):
    if config.optimizer == "adam":
        return Adam(config.learning_rate, config.beta1, config.beta2, config.eps)
    return SGD(config.learning_rate)


def standardize_columns(X: np.ndarray) -> np.ndarray:
    """Per-column z-score. Constant columns are centred only."""
    mu = X.mean(axis=0)
    sd = X.std(axis=0)
    sd[sd == 0] = 1.0
    return (X - mu) / sd


def run_mine(X, config: TrainConfig, rng: np.random.Generator,
             params: MineParams | None = None) -> MineRunResult:
    """Train one statistics network on the augmented matrix ``X``.

    The last column of ``X`` is the attribute. Each iteration takes the next
    minibatch of an epoch-wise shuffle, permutes its attribute column to form
    marginal pairs, refreshes the EMA denominator and takes one optimizer
    step. Training stops when the means of two consecutive non-overlapping
    windows of ``V`` differ by less than ``convergence_tol`` or after
    ``max_iters`` iterations. The reported expressivity is the mean ``V``
    over the final window.
    """
    X = as_matrix(X, "X")
    n, d = X.shape
    if n < 4:
        raise ValueError("run_mine needs at least 4 samples")
    if d < 2:
        raise ValueError("X needs at least one feature column plus the attribute column")
    if config.standardize:
        X = standardize_columns(X)
    b = min(config.batch_size, n)
    w = config.convergence_window

    if params is None:
        params = init_params(d, rng, config.hidden)
    else:
        params = params.copy()
    arrays = params.arrays()
    opt = _make_optimizer(config)

    history = np.empty(config.max_iters)
    up = np.empty(2 * b)
    up[:b] = -1.0 / b
    batch = np.empty((2 * b, d))
    work = _Workspace(params, 2 * b)
    order = rng.permutation(n)
    cursor = 0
    ema = None
    converged = False
    it = 0

    for it in range(1, config.max_iters + 1):
        if cursor + b > n:
            order = rng.permutation(n)
            cursor = 0
        idx = order[cursor:cursor + b]
        cursor += b
        batch[:b] = X[idx]
        batch[b:] = batch[:b]
        batch[b:, -1] = batch[:b, -1][rng.permutation(b)]

        t = work.forward(params, batch)
        tj, tm = t[:b], t[b:]
        if not (np.all(np.isfinite(t)) and tm.max() < 700.0):
            raise TrainingDiverged(it, "statistics network output overflow")
        et = np.exp(tm)
        et_mean = float(et.mean())
        v_batch = float(tj.mean()) - log_mean_exp(tm)
        ema = et_mean if ema is None else (1.0 - config.ema_rate) * ema + config.ema_rate * et_mean
        if not (ema > 0 and math.isfinite(ema)):
            raise TrainingDiverged(it, "moving-average denominator underflow")
        history[it - 1] = v_batch

        up[b:] = et / (b * ema)
        grads = work.backward(params, batch, up)
        garr = grads.arrays()
        if not all(np.all(np.isfinite(g)) for g in garr):
            raise TrainingDiverged(it, "non-finite gradient")
        opt.step(arrays, garr)

        if it % w == 0 and it >= 2 * w:
            cur = history[it - w:it].mean()
            prev = history[it - 2 * w:it - w].mean()
            if abs(cur - prev) < config.convergence_tol:
                converged = True
                break

    history = history[:it].copy()
    win = history[-min(w, it):]
    final_mean = float(win.mean())
    if not math.isfinite(final_mean):
        raise TrainingDiverged(it, "non-finite objective")
    return MineRunResult(
        expressivity=final_mean,
        iterations_run=it,
        final_window_mean=final_mean,
        converged=converged,
        history=history,
    )
