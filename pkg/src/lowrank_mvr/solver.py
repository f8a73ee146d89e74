"""Alternating projected gradient descent under a rank constraint.

Each iteration takes a projected gradient step in ``C`` (followed by a
truncated-SVD projection onto rank ``r``) and then a plain gradient step in
``gamma``. Step sizes come from a backtracking search that starts at
``alpha_init`` and shrinks by ``beta`` until the objective does not increase.
"""
from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, NumericError
from .linalg import Coefficients, project_rank
from .models import Dataset, Objective, gradient, loss_value

__all__ = ["SolverConfig", "FitResult", "Termination", "StepKind", "fit", "line_search"]

log = logging.getLogger(__name__)


class Termination(str, enum.Enum):
    TOLERANCE = "Tolerance"
    ITERATION_CAP = "IterationCap"
    LINE_SEARCH_STALL = "LineSearchStall"


class StepKind(str, enum.Enum):
    C_STEP = "C-step"
    GAMMA_STEP = "gamma-step"


@dataclass(frozen=True)
class SolverConfig:
    rank: int
    lam: float = 0.0
    beta: float = 0.5
    eps_n: float = 1e-6
    n_max: int = 500
    alpha_init: float = 1.0
    max_backtracks: int = 60

    def __post_init__(self):
        if int(self.rank) < 1:
            raise ValueError(f"rank must be positive, got {self.rank}")
        if not self.lam >= 0:
            raise ValueError(f"lam must be nonnegative, got {self.lam}")
        if not 0 < self.beta < 1:
            raise ValueError(f"beta must lie in (0, 1), got {self.beta}")
        if not self.eps_n > 0:
            raise ValueError(f"eps_n must be positive, got {self.eps_n}")
        if int(self.n_max) < 1 or int(self.max_backtracks) < 1:
            raise ValueError("n_max and max_backtracks must be positive")
        if not self.alpha_init > 0:
            raise ValueError(f"alpha_init must be positive, got {self.alpha_init}")

    def replace(self, **changes):
        kw = {f: getattr(self, f) for f in self.__dataclass_fields__}
        kw.update(changes)
        return SolverConfig(**kw)


@dataclass(frozen=True)
class FitResult:
    coefficients: Coefficients
    objective_trace: tuple = field(repr=False)
    iterations: int
    termination: Termination

    @property
    def objective(self):
        return self.objective_trace[-1]


def _loss_sum(obj, f, C):
    """Objective from a precomputed linear predictor; inf when not finite."""
    with np.errstate(over="ignore", invalid="ignore"):
        val = float(np.sum(loss_value(obj.model, obj.dataset.y, f)))
        val += obj.lam * float(np.abs(C).sum())
    return val if np.isfinite(val) else np.inf


def _search(trial, current_value, config):
    """Backtrack on ``alpha`` until ``trial(alpha)`` does not increase the objective.

    ``trial`` returns ``(point, value)``. Returns ``(alpha, point, value)``, or
    ``(0.0, None, current_value)`` when ``max_backtracks`` shrinks all fail.
    """
    alpha = config.alpha_init
    for _ in range(config.max_backtracks):
        point, value = trial(alpha)
        if value <= current_value:
            return alpha, point, value
        alpha *= config.beta
    return 0.0, None, current_value


def _c_trial(obj, C, grad_C, zg, rank):
    Xflat = obj.dataset.Xflat

    def trial(alpha):
        Cn = project_rank(C - alpha * grad_C, rank) if alpha else C
        return Cn, _loss_sum(obj, Xflat @ Cn.ravel() + zg, Cn)

    return trial


def _gamma_trial(obj, C, gamma, grad_g, xc):
    Z = obj.dataset.Z

    def trial(alpha):
        gn = gamma - alpha * grad_g
        return gn, _loss_sum(obj, xc + Z @ gn, C)

    return trial


def line_search(obj, current, direction_kind, grad_part, config, current_value=None):
    """Backtracking step for one block of the alternating update.

    Returns ``(step, candidate)``. The candidate's objective never exceeds
    that of ``current``; a step of 0 with ``candidate is current`` signals
    that no acceptable step was found.
    """
    kind = StepKind(direction_kind)
    d = obj.dataset
    C, gamma = current.C, current.gamma
    grad_part = np.asarray(grad_part, dtype=float)
    if current_value is None:
        current_value = obj.value(current)
    if kind is StepKind.C_STEP:
        if grad_part.shape != C.shape:
            raise DimensionError(f"C gradient has shape {grad_part.shape}, expected {C.shape}")
        if not np.any(grad_part):
            return config.alpha_init, current
        trial = _c_trial(obj, C, grad_part, d.Z @ gamma, config.rank)
        step, point, _ = _search(trial, current_value, config)
        return (step, current) if point is None else (step, current.replace(C=point))
    if grad_part.shape != gamma.shape:
        raise DimensionError(f"gamma gradient has shape {grad_part.shape}, expected {gamma.shape}")
    if not np.any(grad_part):
        return config.alpha_init, current
    trial = _gamma_trial(obj, C, gamma, grad_part, d.Xflat @ C.ravel())
    step, point, _ = _search(trial, current_value, config)
    return (step, current) if point is None else (step, current.replace(gamma=point))


def fit(data, config, init=None):
    """Fit ``(C, gamma)`` by alternating projected gradient descent.

    Parameters
    ----------
    data : Dataset
    config : SolverConfig
    init : Coefficients, optional
        Starting point; zeros by default.

    Returns
    -------
    FitResult
        Final iterate, the objective after every iteration (iteration 0
        included) and the reason the loop stopped.
    """
    if data.n < 1:
        raise ValueError("cannot fit an empty dataset")
    if config.rank > min(data.m, data.q):
        raise ValueError(f"rank {config.rank} exceeds min(m, q) = {min(data.m, data.q)}")
    if init is None:
        init = Coefficients.zeros(data.m, data.q, data.p)
    elif init.C.shape != (data.m, data.q) or init.gamma.shape != (data.p,):
        raise DimensionError(f"init {init.shape} does not match data")

    obj = Objective(data, config.lam)
    Xflat, Z = data.Xflat, data.Z
    C = np.array(init.C)
    gamma = np.array(init.gamma)
    value = obj.value_at(C, gamma)
    trace = [value]
    termination = Termination.ITERATION_CAP
    iterations = 0

    for k in range(1, int(config.n_max) + 1):
        point = Coefficients(C, gamma)
        gC, _ = gradient(obj, point)
        stalled_c = False
        if np.any(gC):
            trial = _c_trial(obj, C, gC, Z @ gamma, config.rank)
            step, Cn, value_c = _search(trial, value, config)
            if Cn is None:
                stalled_c = True
            else:
                C, value = Cn, value_c

        point = Coefficients(C, gamma)
        _, gg = gradient(obj, point)
        xc = Xflat @ C.ravel()
        stalled_g = False
        if np.any(gg):
            trial = _gamma_trial(obj, C, gamma, gg, xc)
            step, gn, value_g = _search(trial, value, config)
            if gn is None:
                stalled_g = True
            else:
                gamma, value = gn, value_g

        # re-projection of C; kept only when it does not raise the objective
        Cp = project_rank(C, config.rank)
        value_p = _loss_sum(obj, Xflat @ Cp.ravel() + Z @ gamma, Cp)
        if value_p <= value:
            C, value = Cp, value_p

        iterations = k
        trace.append(value)
        if stalled_c and stalled_g:
            termination = Termination.LINE_SEARCH_STALL
            break
        if abs(trace[-1] - trace[-2]) <= config.eps_n:
            termination = Termination.TOLERANCE
            break

    if not np.isfinite(value):
        raise NumericError("objective became non-finite")
    log.debug("fit finished after %d iterations (%s), F = %.6g", iterations, termination.value, value)
    return FitResult(Coefficients(C, gamma), tuple(trace), iterations, termination)
