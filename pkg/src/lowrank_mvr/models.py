"""Losses, the penalized objective, its gradient and the weighted Hessian.

The objective for data ``{(X_i, z_i, y_i)}`` is

    F(C, gamma) = sum_i l(y_i, <X_i, C> + gamma^T z_i) + lam * ||C||_1

with ``l`` the squared error, the Huber loss or the logistic loss.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import CapacityError, DimensionError, NumericError
from .linalg import Coefficients

__all__ = [
    "LossKind",
    "LossModel",
    "Dataset",
    "Objective",
    "loss_value",
    "loss_deriv",
    "curvature_weight",
    "objective_value",
    "gradient",
    "hessian",
    "design_matrix",
    "HESSIAN_MAX_DIM",
]

HESSIAN_MAX_DIM = 4096

# Huber threshold used when none is given
DEFAULT_HUBER_ALPHA = 1.345


class LossKind(str, enum.Enum):
    ORDINARY = "ordinary"
    ROBUST = "robust"
    LOGISTIC = "logistic"


@dataclass(frozen=True)
class LossModel:
    kind: LossKind = LossKind.ORDINARY
    alpha: float = DEFAULT_HUBER_ALPHA

    def __post_init__(self):
        object.__setattr__(self, "kind", LossKind(self.kind))
        if self.kind is LossKind.ROBUST and not self.alpha > 0:
            raise ValueError(f"Huber threshold must be positive, got {self.alpha}")

    @classmethod
    def ordinary(cls):
        return cls(LossKind.ORDINARY)

    @classmethod
    def robust(cls, alpha=DEFAULT_HUBER_ALPHA):
        return cls(LossKind.ROBUST, float(alpha))

    @classmethod
    def logistic(cls):
        return cls(LossKind.LOGISTIC)


def _check_binary(model, y):
    if model.kind is LossKind.LOGISTIC and not np.all((y == 0) | (y == 1)):
        raise ValueError("logistic responses must be 0 or 1")


def _sigmoid(f):
    return 0.5 * (1.0 + np.tanh(0.5 * f))


def loss_value(model, y, f):
    """Per-sample loss; broadcasts over arrays."""
    y = np.asarray(y, dtype=float)
    f = np.asarray(f, dtype=float)
    _check_binary(model, y)
    if model.kind is LossKind.ORDINARY:
        out = (y - f) ** 2
    elif model.kind is LossKind.ROBUST:
        t = np.abs(y - f)
        a = model.alpha
        out = np.where(t <= a, 0.5 * t * t, a * (t - 0.5 * a))
    else:
        # log(1 + e^f) - y f without overflow or cancellation at large |f|
        out = np.maximum(f, 0.0) - y * f + np.log1p(np.exp(-np.abs(f)))
    return out if out.ndim else float(out)


def loss_deriv(model, y, f):
    """Derivative of :func:`loss_value` with respect to ``f``."""
    y = np.asarray(y, dtype=float)
    f = np.asarray(f, dtype=float)
    _check_binary(model, y)
    if model.kind is LossKind.ORDINARY:
        out = -2.0 * (y - f)
    elif model.kind is LossKind.ROBUST:
        out = -np.clip(y - f, -model.alpha, model.alpha)
    else:
        out = _sigmoid(f) - y
    return out if out.ndim else float(out)


def curvature_weight(model, y, f):
    """Second-derivative weight ``w_2`` entering the Hessian."""
    y = np.asarray(y, dtype=float)
    f = np.asarray(f, dtype=float)
    _check_binary(model, y)
    if model.kind is LossKind.ORDINARY:
        out = np.full(np.broadcast(y, f).shape, 2.0)
    elif model.kind is LossKind.ROBUST:
        out = (np.abs(y - f) < model.alpha).astype(float)
    else:
        s = _sigmoid(f)
        out = s * (1.0 - s)
    return out if out.ndim else float(out)


@dataclass(frozen=True, eq=False)
class Dataset:
    """n samples of a matrix predictor, a vector predictor and a response.

    ``X`` has shape (n, m, q), ``Z`` shape (n, p) and ``y`` shape (n,).
    """

    X: np.ndarray
    Z: np.ndarray
    y: np.ndarray
    model: LossModel = LossModel()

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        Z = np.asarray(self.Z, dtype=float)
        y = np.asarray(self.y, dtype=float).reshape(-1)
        if X.ndim != 3:
            raise DimensionError(f"X must have shape (n, m, q), got {X.shape}")
        n = X.shape[0]
        if Z.ndim == 1 and n == 0:
            Z = Z.reshape(0, -1)
        if Z.ndim != 2 or Z.shape[0] != n or y.shape[0] != n:
            raise DimensionError(
                f"inconsistent sample counts: X {X.shape}, Z {Z.shape}, y {y.shape}")
        for name, a in (("X", X), ("Z", Z), ("y", y)):
            if not np.all(np.isfinite(a)):
                raise NumericError(f"{name} has non-finite entries")
        _check_binary(self.model, y)
        for name, a in (("X", X), ("Z", Z), ("y", y)):
            a.flags.writeable = False
            object.__setattr__(self, name, a)

    @property
    def n(self):
        return self.X.shape[0]

    @property
    def m(self):
        return self.X.shape[1]

    @property
    def q(self):
        return self.X.shape[2]

    @property
    def p(self):
        return self.Z.shape[1]

    @property
    def Xflat(self):
        """Matrix predictors flattened row-major to shape (n, m*q)."""
        return self.X.reshape(self.n, self.m * self.q)

    def subset(self, idx):
        idx = np.asarray(idx)
        return Dataset(self.X[idx], self.Z[idx], self.y[idx], self.model)

    def with_model(self, model):
        return Dataset(self.X, self.Z, self.y, model)

    def linear_predictor(self, coeff):
        _check_shapes(self, coeff)
        return self.Xflat @ coeff.C.ravel() + self.Z @ coeff.gamma

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return (self.model == other.model
                and np.array_equal(self.X, other.X)
                and np.array_equal(self.Z, other.Z)
                and np.array_equal(self.y, other.y))


def _check_shapes(data, coeff):
    if coeff.C.shape != (data.m, data.q) or coeff.gamma.shape != (data.p,):
        raise DimensionError(
            f"coefficients {coeff.shape} do not match data (m, q, p) = "
            f"{(data.m, data.q, data.p)}")


@dataclass(frozen=True, eq=False)
class Objective:
    """Penalized loss: data plus an l1 weight on the entries of C."""

    dataset: Dataset
    lam: float = 0.0

    def __post_init__(self):
        if not self.lam >= 0:
            raise ValueError(f"penalty weight must be nonnegative, got {self.lam}")

    @property
    def model(self):
        return self.dataset.model

    def value(self, coeff):
        return objective_value(self, coeff)

    def value_at(self, C, gamma):
        """Objective at raw arrays, skipping the Coefficients wrapper."""
        d = self.dataset
        with np.errstate(over="ignore", invalid="ignore"):
            f = d.Xflat @ C.ravel() + d.Z @ gamma
            val = float(np.sum(loss_value(d.model, d.y, f))) + self.lam * float(np.abs(C).sum())
        if not np.isfinite(val):
            raise NumericError("objective is not finite")
        return val


def objective_value(obj, coeff):
    _check_shapes(obj.dataset, coeff)
    return obj.value_at(coeff.C, coeff.gamma)


def gradient(obj, coeff):
    """Partial derivatives ``(dF/dC, dF/dgamma)``.

    The l1 term contributes ``lam * sign(C)`` with sign(0) = 0.
    """
    d = obj.dataset
    _check_shapes(d, coeff)
    f = d.Xflat @ coeff.C.ravel() + d.Z @ coeff.gamma
    w = np.atleast_1d(loss_deriv(d.model, d.y, f))
    gC = (w @ d.Xflat).reshape(d.m, d.q) + obj.lam * np.sign(coeff.C)
    gg = w @ d.Z
    if not (np.all(np.isfinite(gC)) and np.all(np.isfinite(gg))):
        raise NumericError("gradient is not finite")
    return gC, gg


def design_matrix(data):
    """Rows ``vec(X_i, z_i)``: row-major X followed by z."""
    return np.hstack([data.Xflat, data.Z])


def hessian(obj, coeff):
    """Weighted Gram matrix ``sum_i w_2i vec(X_i, z_i) vec(X_i, z_i)^T``."""
    d = obj.dataset
    dim = d.m * d.q + d.p
    if dim > HESSIAN_MAX_DIM:
        raise CapacityError(f"Hessian dimension {dim} exceeds {HESSIAN_MAX_DIM}")
    f = d.linear_predictor(coeff)
    w = np.atleast_1d(curvature_weight(d.model, d.y, f))
    V = design_matrix(d)
    H = (V.T * w) @ V
    return 0.5 * (H + H.T)
