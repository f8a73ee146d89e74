"""Replicated generate / tune / fit / evaluate studies."""
from __future__ import annotations

import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .datagen import (NoiseSpec, ShapeKind, SyntheticSpec, derive_seed, make_lowrank_sparse,
                      make_shape, sample_dataset, split_seed)
from .evaluate import (CvPlan, Metrics, coefficient_rmse, prediction_error,
                       select_lambda_validation, summarize, tune_lambda)
from .linalg import Coefficients
from .models import LossModel
from .solver import SolverConfig, fit

__all__ = ["Experiment", "make_signal", "run_replication", "run_experiment", "default_workers",
           "WORKERS_ENV"]

log = logging.getLogger(__name__)

WORKERS_ENV = "LOWRANK_MVR_WORKERS"

TUNING_MODES = ("validation", "cv", "none")


def default_workers():
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


@dataclass(frozen=True)
class Experiment:
    """One simulation design. ``signal`` is a ShapeKind or a SyntheticSpec."""

    signal: object = field(default_factory=ShapeKind)
    n: int = 500
    n_val: int | None = None
    n_test: int | None = None
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    model: LossModel = field(default_factory=LossModel)
    gamma_star: tuple | None = None
    solver: SolverConfig = field(default_factory=lambda: SolverConfig(rank=1))
    lambda_grid: tuple = (0.0,)
    tuning: str = "validation"
    folds: int = 5
    reps: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.tuning not in TUNING_MODES:
            raise ValueError(f"tuning must be one of {TUNING_MODES}, got {self.tuning!r}")
        if int(self.reps) < 1:
            raise ValueError("reps must be at least 1")

    def describe(self):
        sig = self.signal
        out = {"signal": asdict(sig) if not isinstance(sig, ShapeKind)
               else {"shape": sig.shape.value, "g": sig.g},
               "n": self.n, "n_val": self.n_val or self.n, "n_test": self.n_test or self.n,
               "noise": str(self.noise), "model": self.model.kind.value,
               "lambda_grid": list(self.lambda_grid), "tuning": self.tuning,
               "folds": self.folds, "reps": self.reps, "seed": self.seed,
               "solver": asdict(self.solver)}
        if self.model.kind.value == "robust":
            out["alpha"] = self.model.alpha
        return out


def make_signal(signal, seed, gamma_star=None):
    """Truth coefficients for a shape or a synthetic spec."""
    if isinstance(signal, SyntheticSpec):
        C = make_lowrank_sparse(signal, seed)
        g = signal.gamma_star if gamma_star is None else gamma_star
    else:
        C = make_shape(signal)
        g = np.ones(5) if gamma_star is None else gamma_star
    return Coefficients(C, g)


def run_replication(exp, index):
    """Metrics of replicate ``index``; seeds are derived from ``exp.seed ^ index``."""
    s_signal, s_train, s_val, s_test = split_seed(derive_seed(exp.seed, index), 4)
    truth = make_signal(exp.signal, s_signal, exp.gamma_star)
    noise = None if exp.model.kind.value == "logistic" else exp.noise

    def draw(n, s):
        return sample_dataset(truth.C, truth.gamma, n, noise, exp.model, seed=s)

    train = draw(exp.n, s_train)
    test = draw(exp.n_test or exp.n, s_test)
    if exp.tuning == "validation" and len(set(exp.lambda_grid)) > 1:
        valid = draw(exp.n_val or exp.n, s_val)
        lam, res, _ = select_lambda_validation(train, valid, exp.solver, exp.lambda_grid)
    else:
        if exp.tuning == "cv" and len(set(exp.lambda_grid)) > 1:
            plan = CvPlan(folds=exp.folds, lambda_grid=exp.lambda_grid, seed=s_val % (2 ** 31))
            lam, _ = tune_lambda(train, exp.solver, plan)
        else:
            lam = float(exp.lambda_grid[0])
        res = fit(train, exp.solver.replace(lam=lam))
    rc, rg = coefficient_rmse(res.coefficients, truth)
    return {"index": index, "rmse_C": rc, "rmse_gamma": rg,
            "prediction_error": prediction_error(exp.model, res.coefficients, test),
            "lambda": lam, "iterations": res.iterations,
            "termination": res.termination.value}


def _safe_replication(args):
    exp, index = args
    try:
        return run_replication(exp, index)
    except Exception as exc:  # recorded per replicate; the caller decides on failure
        log.warning("replication %d failed: %s", index, exc)
        return {"index": index, "error": f"{type(exc).__name__}: {exc}"}


def run_experiment(exp, workers=None):
    """Run all replicates and aggregate mean and standard deviation per metric.

    Replicates run in a process pool when ``workers > 1``; results are
    aggregated in replicate order either way.
    """
    workers = default_workers() if workers is None else max(1, int(workers))
    jobs = [(exp, i) for i in range(int(exp.reps))]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_safe_replication, jobs))
    else:
        rows = [_safe_replication(j) for j in jobs]
    ok = [r for r in rows if "error" not in r]
    failed = [r for r in rows if "error" in r]
    metrics = Metrics.from_values(**{k: [r[k] for r in ok] for k in
                                     ("rmse_C", "rmse_gamma", "prediction_error")})
    out = {"command": "experiment", "config": exp.describe(),
           "reps": int(exp.reps), "completed": len(ok), "failures": len(failed)}
    out.update(metrics.as_dict())
    lam_mean, lam_std = summarize([r["lambda"] for r in ok])
    out["lambda"] = {"mean": lam_mean, "std": lam_std}
    out["per_replication"] = rows
    return out
