"""Dense matrix primitives: trace inner product, rank projection, distances
and the tangent-space projectors of the fixed-rank matrix manifold.

Matrices are plain 2-D ``numpy`` arrays of floats. Coefficient pairs are
held in :class:`Coefficients`.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, NumericError, RankDeficiencyError

__all__ = [
    "Coefficients",
    "TangentFrame",
    "as_matrix",
    "frob_inner",
    "project_rank",
    "numerical_rank",
    "param_distance",
    "tangent_frame",
    "tangent_project",
    "RANK_TOL",
]

# relative singular value floor for rank-deficiency detection
RANK_TOL = 1e-12


def as_matrix(a, name="matrix"):
    """Return ``a`` as a finite 2-D float array, raising on bad input."""
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 1:
        raise DimensionError(f"{name} must be a non-empty 2-D array, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise NumericError(f"{name} has non-finite entries")
    return a


@dataclass(frozen=True)
class Coefficients:
    """A coefficient pair ``(C, gamma)``: C is m x q, gamma has length p."""

    C: np.ndarray
    gamma: np.ndarray

    def __post_init__(self):
        C = np.array(self.C, dtype=float, ndmin=2)
        gamma = np.array(self.gamma, dtype=float).reshape(-1)
        if C.ndim != 2:
            raise DimensionError(f"C must be 2-D, got shape {C.shape}")
        if not (np.all(np.isfinite(C)) and np.all(np.isfinite(gamma))):
            raise NumericError("coefficients must be finite")
        C.flags.writeable = False
        gamma.flags.writeable = False
        object.__setattr__(self, "C", C)
        object.__setattr__(self, "gamma", gamma)

    @classmethod
    def zeros(cls, m, q, p):
        return cls(np.zeros((m, q)), np.zeros(p))

    @property
    def shape(self):
        return self.C.shape + (self.gamma.size,)

    def replace(self, C=None, gamma=None):
        return Coefficients(self.C if C is None else C,
                            self.gamma if gamma is None else gamma)


def frob_inner(A, B):
    """Trace inner product ``trace(B^T A) = sum_ij A_ij B_ij``."""
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    if A.shape != B.shape:
        raise DimensionError(f"shape mismatch: {A.shape} vs {B.shape}")
    return float(np.dot(A.ravel(), B.ravel()))


def _svd(A):
    try:
        return np.linalg.svd(A, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"SVD did not converge: {exc}") from exc


def project_rank(A, r):
    """Best rank-``r`` approximation of ``A`` in Frobenius norm (truncated SVD)."""
    A = as_matrix(A)
    r = int(r)
    if not 1 <= r <= min(A.shape):
        raise ValueError(f"rank {r} out of range for shape {A.shape}")
    U, s, Vt = _svd(A)
    return (U[:, :r] * s[:r]) @ Vt[:r]


def numerical_rank(A, rtol=1e-10):
    """Number of singular values above ``rtol * sigma_1``."""
    s = np.linalg.svd(np.asarray(A, dtype=float), compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.sum(s > rtol * s[0]))


def param_distance(a, b):
    """Euclidean distance between two coefficient pairs."""
    if a.C.shape != b.C.shape or a.gamma.shape != b.gamma.shape:
        raise DimensionError(f"shape mismatch: {a.shape} vs {b.shape}")
    dC = np.linalg.norm(a.C - b.C)
    dg = np.linalg.norm(a.gamma - b.gamma)
    return float(np.hypot(dC, dg))


@dataclass(frozen=True)
class TangentFrame:
    """Leading singular triplets of a rank-r matrix.

    ``U`` (m x r) and ``V`` (q x r) have orthonormal columns and ``sigma``
    is nonincreasing and positive.
    """

    U: np.ndarray
    V: np.ndarray
    sigma: np.ndarray

    @property
    def rank(self):
        return self.sigma.size

    @property
    def curvature(self):
        """Curvature constant ``2 / sigma_r`` of the fixed-rank manifold here."""
        return 2.0 / self.sigma[-1]

    def reconstruct(self):
        return (self.U * self.sigma) @ self.V.T


def tangent_frame(Cstar, r):
    Cstar = as_matrix(Cstar, "Cstar")
    r = int(r)
    if not 1 <= r <= min(Cstar.shape):
        raise ValueError(f"rank {r} out of range for shape {Cstar.shape}")
    U, s, Vt = _svd(Cstar)
    if s[0] == 0.0 or s[r - 1] <= RANK_TOL * s[0]:
        raise RankDeficiencyError(
            f"sigma_{r} = {s[r - 1]:.3g} is below {RANK_TOL:g} * sigma_1 = {s[0]:.3g}")
    return TangentFrame(U[:, :r].copy(), Vt[:r].T.copy(), s[:r].copy())


def tangent_project(frame, D, y, orthogonal=False):
    """Split ``(D, y)`` along the tangent space at the frame's point.

    The normal component is ``((I - U U^T) D (I - V V^T), 0)``; the tangent
    component is the remainder, and carries ``y`` unchanged.
    """
    D = np.asarray(D, dtype=float)
    y = np.asarray(y, dtype=float)
    m, q = frame.U.shape[0], frame.V.shape[0]
    if D.shape != (m, q):
        raise DimensionError(f"D has shape {D.shape}, frame expects {(m, q)}")
    left = D - frame.U @ (frame.U.T @ D)
    normal = left - (left @ frame.V) @ frame.V.T
    if orthogonal:
        return normal, np.zeros_like(y)
    return D - normal, y.copy()
