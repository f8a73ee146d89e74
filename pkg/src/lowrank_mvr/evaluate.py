"""Error metrics, k-fold splitting and cross-validated choice of the penalty."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DimensionError
from .models import LossKind
from .solver import Termination, fit

__all__ = [
    "Metrics",
    "CvPlan",
    "coefficient_rmse",
    "prediction_error",
    "kfold_indices",
    "default_lambda_grid",
    "tune_lambda",
    "select_lambda_validation",
    "nested_cv_experiment",
    "summarize",
]

log = logging.getLogger(__name__)


def summarize(values):
    """Mean and sample standard deviation (0 for a single value)."""
    a = np.asarray(values, dtype=float)
    if a.size == 0:
        return float("nan"), float("nan")
    std = float(np.std(a, ddof=1)) if a.size > 1 else 0.0
    return float(np.mean(a)), std


@dataclass
class Metrics:
    """Aggregated errors. Fields are means; ``std`` and ``per_replication``
    hold the spread and raw values keyed by metric name."""

    rmse_C: float | None = None
    rmse_gamma: float | None = None
    prediction_error: float | None = None
    std: dict = field(default_factory=dict)
    per_replication: dict = field(default_factory=dict)

    @classmethod
    def from_values(cls, **values):
        means, stds, raw = {}, {}, {}
        for name, vals in values.items():
            if vals is None:
                means[name] = None
                continue
            raw[name] = [float(v) for v in vals]
            means[name], stds[name] = summarize(vals)
        return cls(std=stds, per_replication=raw, **means)

    def as_dict(self):
        out = {}
        for name in ("rmse_C", "rmse_gamma", "prediction_error"):
            mean = getattr(self, name)
            out[name] = None if mean is None else {"mean": mean, "std": self.std.get(name, 0.0)}
        return out


@dataclass(frozen=True)
class CvPlan:
    folds: int = 5
    lambda_grid: tuple = (0.0,)
    inner_folds: int = 5
    seed: int = 0
    leave_one_out: bool = False

    def __post_init__(self):
        grid = tuple(float(v) for v in np.atleast_1d(self.lambda_grid))
        if not grid:
            raise ValueError("lambda grid must not be empty")
        if any(not (v >= 0 and np.isfinite(v)) for v in grid):
            raise ValueError("lambda grid values must be finite and nonnegative")
        object.__setattr__(self, "lambda_grid", grid)
        if not self.leave_one_out and int(self.folds) < 2:
            raise ValueError("need at least 2 folds")
        if int(self.inner_folds) < 2:
            raise ValueError("need at least 2 inner folds")

    def n_folds(self, n):
        return n if self.leave_one_out else int(self.folds)


def coefficient_rmse(est, truth):
    """Per-entry RMSE of C and per-coordinate RMSE of gamma."""
    if est.C.shape != truth.C.shape or est.gamma.shape != truth.gamma.shape:
        raise DimensionError(f"shape mismatch: {est.shape} vs {truth.shape}")
    rc = float(np.sqrt(np.mean((est.C - truth.C) ** 2)))
    rg = float(np.sqrt(np.mean((est.gamma - truth.gamma) ** 2))) if est.gamma.size else 0.0
    return rc, rg


def prediction_error(model, coeff, test):
    """Response RMSE for regression models, misclassification rate for logistic."""
    if test.n < 1:
        raise ValueError("test set is empty")
    if model.kind is not test.model.kind:
        raise ValueError(f"model kind {model.kind.value} does not match test data "
                         f"({test.model.kind.value})")
    theta = test.linear_predictor(coeff)
    if model.kind is LossKind.LOGISTIC:
        # sigmoid(theta) > 1/2 exactly when theta > 0; ties predict 0
        return float(np.mean((theta > 0).astype(float) != test.y))
    return float(np.sqrt(np.mean((test.y - theta) ** 2)))


def kfold_indices(n, k, seed=0):
    """Random partition of ``range(n)`` into k folds whose sizes differ by at most 1."""
    n, k = int(n), int(k)
    if not 2 <= k <= n:
        raise ValueError(f"cannot split {n} samples into {k} folds")
    perm = np.random.default_rng(seed).permutation(n)
    return [np.sort(f) for f in np.array_split(perm, k)]


def default_lambda_grid(n, points=20):
    return tuple(np.logspace(-4, 2, points) * n)


def _fit_and_score(train, test, config, init=None):
    res = fit(train, config, init)
    return res, prediction_error(train.model, res.coefficients, test)


def tune_lambda(data, config_base, plan):
    """Pick the penalty weight by k-fold cross-validation.

    Returns ``(lambda_best, cv_table)``; each table row records the fold
    errors, their mean and how many fits stalled. A weight whose fits all
    stalled is marked invalid and never selected. Ties go to the smaller
    weight.
    """
    grid = sorted(set(plan.lambda_grid))
    k = plan.n_folds(data.n)
    if data.n < k:
        raise ValueError(f"n = {data.n} is smaller than the number of folds {k}")
    folds = kfold_indices(data.n, k, plan.seed)
    everything = np.arange(data.n)
    splits = [(np.setdiff1d(everything, f), f) for f in folds]

    table = []
    for lam in grid:
        cfg = config_base.replace(lam=lam)
        errors, stalls = [], 0
        for train_idx, test_idx in splits:
            res, err = _fit_and_score(data.subset(train_idx), data.subset(test_idx), cfg)
            stalls += res.termination is Termination.LINE_SEARCH_STALL
            errors.append(err)
        valid = stalls < len(splits)
        table.append({"lambda": lam, "mean_error": float(np.mean(errors)),
                      "fold_errors": errors, "stalls": stalls, "valid": valid})
        log.debug("lambda %.4g: cv error %.6g", lam, table[-1]["mean_error"])

    candidates = [row for row in table if row["valid"]]
    if not candidates:
        raise RuntimeError("every fit stalled for every lambda in the grid")
    best = min(candidates, key=lambda row: (row["mean_error"], row["lambda"]))
    return best["lambda"], table


def select_lambda_validation(train, valid, config_base, grid):
    """Pick the penalty weight minimizing error on an independent validation set.

    Returns ``(lambda_best, fit_result, table)`` where ``fit_result`` is the
    training fit at the chosen weight.
    """
    table, best = [], None
    for lam in sorted(set(float(v) for v in grid)):
        res, err = _fit_and_score(train, valid, config_base.replace(lam=lam))
        table.append({"lambda": lam, "validation_error": err,
                      "termination": res.termination.value})
        if best is None or err < best[1]:
            best = (lam, err, res)
    return best[0], best[2], table


def nested_cv_experiment(data, config_base, plan, runs=1):
    """Cross-validated test error with the penalty tuned on each training part.

    For every outer fold the weight is tuned by ``plan.inner_folds``-fold
    CV on the remaining samples, refit there and scored on the held-out
    fold. One run pools the held-out errors into a single rate; ``runs``
    repetitions with fresh partitions give the mean and standard deviation.
    Leave-one-out partitions do not depend on the seed, so their spread is 0.
    """
    k = plan.n_folds(data.n)
    inner = replace(plan, folds=plan.inner_folds, leave_one_out=False)
    everything = np.arange(data.n)
    run_errors, chosen = [], []
    for run in range(int(runs)):
        if plan.leave_one_out:
            folds = [np.array([i]) for i in range(data.n)]
        else:
            folds = kfold_indices(data.n, k, plan.seed + run)
        weighted = 0.0
        for f in folds:
            train = data.subset(np.setdiff1d(everything, f))
            test = data.subset(f)
            inner_plan = replace(inner, folds=min(inner.folds, train.n))
            lam, _ = tune_lambda(train, config_base, inner_plan)
            chosen.append(lam)
            _, err = _fit_and_score(train, test, config_base.replace(lam=lam))
            weighted += err * test.n if data.model.kind is LossKind.LOGISTIC else err ** 2 * test.n
        total = weighted / data.n
        run_errors.append(total if data.model.kind is LossKind.LOGISTIC else float(np.sqrt(total)))
    metrics = Metrics.from_values(prediction_error=run_errors)
    metrics.per_replication["lambda"] = chosen
    return metrics
