"""Linear probes used to corroborate expressivity orderings."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

from .mine import Adam
from .numkit import as_matrix, make_rng

DEFAULT_TRAIN = 3000
DEFAULT_TEST = 2000


@dataclass
class LinearWeights:
    """Affine predictor ``x @ coef + intercept`` (logit scale for classifiers)."""

    coef: np.ndarray
    intercept: float
    task: str

    def decision(self, F) -> np.ndarray:
        F = as_matrix(F, "F")
        if F.shape[1] != self.coef.shape[0]:
            raise ValueError(f"expected {self.coef.shape[0]} feature columns, got {F.shape[1]}")
        return F @ self.coef + self.intercept

    def predict(self, F) -> np.ndarray:
        s = self.decision(F)
        if self.task == "classification":
            return _sigmoid(s)
        return s


@dataclass
class ProbeReport:
    task: str
    train_size: int
    test_size: int
    metric_name: str
    metric_value: float
    attribute: str = "attribute"
    r_squared: float | None = None

    def to_dict(self) -> dict:
        d = {
            "task": self.task,
            "train_size": self.train_size,
            "test_size": self.test_size,
            "metric_name": self.metric_name,
            "metric_value": self.metric_value,
            "attribute": self.attribute,
        }
        if self.r_squared is not None:
            d["r_squared"] = self.r_squared
        return d


def _sigmoid(s):
    return 0.5 * (1.0 + np.tanh(0.5 * s))


def split(F, A, train_n: int = DEFAULT_TRAIN, test_n: int = DEFAULT_TEST, seed: int = 0):
    """Disjoint random train/test rows: ``((F_train, A_train), (F_test, A_test))``."""
    F = as_matrix(F, "F")
    A = np.asarray(A, dtype=np.float64).ravel()
    n = F.shape[0]
    if A.shape[0] != n:
        raise ValueError(f"length mismatch: F has {n} rows, A has {A.shape[0]} values")
    if train_n < 1 or test_n < 1:
        raise ValueError("train and test sizes must be positive")
    if n < train_n + test_n:
        raise ValueError(f"insufficient samples: need {train_n + test_n}, have {n}")
    perm = make_rng(seed).permutation(n)
    tr, te = perm[:train_n], perm[train_n:train_n + test_n]
    return (F[tr], A[tr]), (F[te], A[te])


def fit_linear_regression(F_train, y_train, ridge: float = 1e-6) -> LinearWeights:
    """Ridge least squares with an unpenalised intercept, via the normal equations."""
    F = as_matrix(F_train, "F_train")
    y = np.asarray(y_train, dtype=np.float64).ravel()
    if F.shape[0] != y.shape[0]:
        raise ValueError("F_train and y_train lengths differ")
    if F.shape[0] < 2:
        raise ValueError("need at least 2 training rows")
    mu = F.mean(axis=0)
    ybar = y.mean()
    Fc = F - mu
    gram = Fc.T @ Fc
    gram[np.diag_indices_from(gram)] += ridge
    rhs = Fc.T @ (y - ybar)
    try:
        w = np.linalg.solve(gram, rhs)
    except np.linalg.LinAlgError:
        # ridge == 0 on a rank-deficient design
        w = np.linalg.lstsq(gram, rhs, rcond=None)[0]
    return LinearWeights(w, float(ybar - mu @ w), "regression")


@dataclass(frozen=True)
class LogisticConfig:
    l2: float = 1e-4
    learning_rate: float = 1e-2
    max_iters: int = 2000
    grad_tol: float = 1e-6


def fit_logistic_regression(F_train, labels, config: LogisticConfig | None = None) -> LinearWeights:
    """Full-batch Adam on the L2-regularised mean logistic loss.

    Features are standardised internally for conditioning; the returned
    weights act on raw features.
    """
    config = config or LogisticConfig()
    F = as_matrix(F_train, "F_train")
    y = np.asarray(labels, dtype=np.float64).ravel()
    if F.shape[0] != y.shape[0]:
        raise ValueError("F_train and labels lengths differ")
    if not np.all((y == 0) | (y == 1)):
        raise ValueError("labels must be binary 0/1")
    if y.min() == y.max():
        raise ValueError("degenerate labels")
    mu = F.mean(axis=0)
    sd = F.std(axis=0)
    sd[sd == 0] = 1.0
    Z = (F - mu) / sd
    n = Z.shape[0]
    w = np.zeros(Z.shape[1])
    c = np.zeros(())
    opt = Adam(lr=config.learning_rate)
    for _ in range(config.max_iters):
        r = _sigmoid(Z @ w + c) - y
        gw = Z.T @ r / n + config.l2 * w
        gc = r.mean()
        if np.sqrt(gw @ gw + gc * gc) < config.grad_tol:
            break
        opt.step([w, c], [gw, np.asarray(gc)])
    coef = w / sd
    return LinearWeights(coef, float(c - mu @ coef), "classification")


def _task_name(task: str) -> str:
    aliases = {"classify": "classification", "regress": "regression"}
    task = aliases.get(task, task)
    if task not in ("classification", "regression"):
        raise ValueError(f"unknown task {task!r}")
    return task


def r_squared(pred, y) -> float:
    y = np.asarray(y, dtype=np.float64).ravel()
    ss_res = np.sum((y - pred) ** 2)
    ss_tot = np.sum((y - y.mean()) ** 2)
    return float(1.0 - ss_res / ss_tot) if ss_tot > 0 else 0.0


def evaluate(weights: LinearWeights, F_test, targets, task: str,
             attribute: str = "attribute", train_size: int = 0) -> ProbeReport:
    """Accuracy at threshold 0.5 for classifiers, mean absolute error for regressors."""
    task = _task_name(task)
    y = np.asarray(targets, dtype=np.float64).ravel()
    F_test = as_matrix(F_test, "F_test")
    if F_test.shape[0] != y.shape[0]:
        raise ValueError("F_test and targets lengths differ")
    pred = weights.predict(F_test)
    if task == "classification":
        value = float(np.mean((pred >= 0.5) == (y >= 0.5)))
        return ProbeReport(task, train_size, y.shape[0], "accuracy", value, attribute)
    value = float(np.mean(np.abs(pred - y)))
    return ProbeReport(task, train_size, y.shape[0], "mean-absolute-error", value, attribute,
                       r_squared=r_squared(pred, y))


def run_probe(F, A, task: str, train_n: int = DEFAULT_TRAIN, test_n: int = DEFAULT_TEST,
              seed: int = 0, attribute: str = "attribute") -> ProbeReport:
    """Split, fit the task's linear model and score it on the held-out rows."""
    task = _task_name(task)
    (Ftr, ytr), (Fte, yte) = split(F, A, train_n, test_n, seed)
    if task == "classification":
        weights = fit_logistic_regression(Ftr, ytr)
    else:
        weights = fit_linear_regression(Ftr, ytr)
    return evaluate(weights, Fte, yte, task, attribute=attribute, train_size=train_n)


def rank_correlation(xs, ys) -> float:
    """Spearman's rho with midranks for ties."""
    x = np.asarray(xs, dtype=np.float64).ravel()
    y = np.asarray(ys, dtype=np.float64).ravel()
    if x.shape != y.shape:
        raise ValueError("xs and ys must have equal length")
    if x.shape[0] < 3:
        raise ValueError("rank correlation needs at least 3 points")
    rx = rankdata(x) - (x.shape[0] + 1) / 2
    ry = rankdata(y) - (y.shape[0] + 1) / 2
    denom = np.sqrt((rx @ rx) * (ry @ ry))
    if denom == 0:
        raise ValueError("rank correlation undefined for a constant input")
    return float(np.clip((rx @ ry) / denom, -1.0, 1.0))
