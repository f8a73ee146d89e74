"""Numerical checks of the local geometry and rate results behind the estimator.

* :func:`check_assumptions` estimates the design and Hessian eigenvalue
  constants on a sphere around the truth.
* :func:`check_curvature` samples rank-r points near ``C*`` and measures how
  far they leave the tangent space relative to their tangent displacement.
* :func:`check_descent_lemma` evaluates the manifold lower bound on the
  objective gap at sampled rank-r points.
* :func:`rate_experiment` fits a log-log line of estimation error vs n.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .datagen import ShapeKind, SyntheticSpec, NoiseSpec, derive_seed, make_lowrank_sparse, make_shape, sample_dataset
from .errors import CapacityError, NumericError
from .linalg import Coefficients, param_distance, project_rank, tangent_frame, tangent_project
from .models import HESSIAN_MAX_DIM, LossModel, Objective, design_matrix, gradient, hessian
from .solver import SolverConfig, fit

__all__ = [
    "AssumptionReport",
    "CurvatureReport",
    "DescentReport",
    "RateFit",
    "power_iteration",
    "check_assumptions",
    "sample_rank_r_point",
    "check_curvature",
    "check_descent_lemma",
    "rate_experiment",
    "RATE_SLOPE_RANGE",
]

RATE_SLOPE_RANGE = (-0.7, -0.3)


def power_iteration(matvec, dim, tol=1e-8, max_iter=20000, seed=0):
    """Largest eigenvalue of a symmetric PSD operator given by ``matvec``."""
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(dim)
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(max_iter):
        w = matvec(v)
        lam_new = float(v @ w)
        norm = np.linalg.norm(w)
        if norm == 0.0:
            return 0.0
        v = w / norm
        if abs(lam_new - lam) <= tol * max(abs(lam_new), 1e-300):
            return lam_new
        lam = lam_new
    raise NumericError(f"power iteration did not converge in {max_iter} steps")


@dataclass
class AssumptionReport:
    c1_hat: float
    c2_hat: float
    c3_hat: float
    c0: float
    n_probe: int
    passes: dict = field(default_factory=dict)

    def as_dict(self):
        return {"c1_hat": self.c1_hat, "c2_hat": self.c2_hat, "c3_hat": self.c3_hat,
                "c0": self.c0, "n_probe": self.n_probe, "checks": dict(self.passes),
                "pass": all(self.passes.values())}


def _sphere_point(truth, radius, rng):
    dC = rng.standard_normal(truth.C.shape)
    dg = rng.standard_normal(truth.gamma.shape)
    scale = radius / np.hypot(np.linalg.norm(dC), np.linalg.norm(dg))
    return Coefficients(truth.C + scale * dC, truth.gamma + scale * dg)


def check_assumptions(data, truth, c0, n_probe=20, seed=0):
    """Empirical constants: design operator norm and Hessian eigenvalue range.

    ``c1_hat`` is the top eigenvalue of ``(1/n) sum vec vec^T``; ``c2_hat`` and
    ``c3_hat`` are the smallest and largest eigenvalues of ``H / n`` over the
    truth and ``n_probe`` points at distance ``c0`` from it.
    """
    dim = data.m * data.q + data.p
    if dim > HESSIAN_MAX_DIM:
        raise CapacityError(f"dimension {dim} exceeds {HESSIAN_MAX_DIM}")
    if n_probe < 1:
        raise ValueError("n_probe must be at least 1")
    V = design_matrix(data)
    n = data.n
    c1 = power_iteration(lambda x: V.T @ (V @ x) / n, dim, seed=seed)

    rng = np.random.default_rng(seed)
    obj = Objective(data, 0.0)
    points = [truth] + [_sphere_point(truth, c0, rng) for _ in range(int(n_probe))]
    lo, hi = np.inf, -np.inf
    for pt in points:
        ev = np.linalg.eigvalsh(hessian(obj, pt) / n)
        lo, hi = min(lo, ev[0]), max(hi, ev[-1])
    lo = max(float(lo), 0.0) if lo > -1e-10 * max(hi, 1.0) else float(lo)
    passes = {"c1_positive": bool(c1 > 0), "c2_positive": bool(lo > 0), "c2_le_c3": bool(lo <= hi)}
    return AssumptionReport(float(c1), lo, float(hi), float(c0), int(n_probe), passes)


def sample_rank_r_point(frame, truth, radius, rng, aligned=False, max_tries=100):
    """Random rank-r pair within ``radius`` of ``truth``.

    A random tangent direction at ``C*`` (or, with ``aligned``, a direction
    ``U A V^T`` inside the row/column spaces) is scaled to a random length,
    added to ``C*`` and projected back to rank r; gamma is shifted by a
    random vector taking part of the remaining radius.
    """
    r = frame.rank
    for _ in range(max_tries):
        if aligned:
            A = rng.standard_normal((r, r))
            D = frame.U @ A @ frame.V.T
        else:
            D, _ = tangent_project(frame, rng.standard_normal(truth.C.shape),
                                   np.zeros(0))
        length = radius * rng.uniform(0.05, 1.0)
        C = project_rank(truth.C + D * (length / np.linalg.norm(D)), r)
        dc = np.linalg.norm(C - truth.C)
        if dc > radius:
            continue
        g = rng.standard_normal(truth.gamma.shape)
        room = np.sqrt(max(radius ** 2 - dc ** 2, 0.0)) * rng.uniform(0.0, 1.0)
        if g.size and np.linalg.norm(g) > 0:
            g *= room / np.linalg.norm(g)
        return Coefficients(C, truth.gamma + g)
    raise NumericError("could not sample a rank-r point inside the radius")


@dataclass
class CurvatureReport:
    max_ratio: float
    bound: float
    sigma_r: float
    trials: int
    passed: bool

    def as_dict(self):
        return {"max_ratio": self.max_ratio, "bound": self.bound, "sigma_r": self.sigma_r,
                "trials": self.trials, "pass": self.passed}


def check_curvature(Cstar, gamma_star, r, trials=1000, seed=0, aligned=False, atol=1e-9):
    """Largest observed ``||normal part|| / ||tangent part||^2`` of displacements
    to rank-r points within ``sigma_r(C*) / 2``, against the bound ``2 / sigma_r``."""
    frame = tangent_frame(Cstar, r)
    truth = Coefficients(Cstar, gamma_star)
    sigma_r = float(frame.sigma[-1])
    radius = sigma_r / 2.0
    rng = np.random.default_rng(seed)
    worst, done = 0.0, 0
    while done < trials:
        pt = sample_rank_r_point(frame, truth, radius, rng, aligned=aligned)
        dC = pt.C - truth.C
        dg = pt.gamma - truth.gamma
        tC, tg = tangent_project(frame, dC, dg)
        nC, _ = tangent_project(frame, dC, dg, orthogonal=True)
        t2 = float(np.sum(tC ** 2) + np.sum(tg ** 2))
        if np.sqrt(t2) < 1e-12:
            continue
        worst = max(worst, float(np.linalg.norm(nC)) / t2)
        done += 1
    bound = float(frame.curvature)
    return CurvatureReport(worst, bound, sigma_r, int(trials), bool(worst <= bound + atol))


@dataclass
class DescentReport:
    min_slack: float
    tolerance: float
    c_h1: float
    trials: int
    passed: bool

    def as_dict(self):
        return {"min_slack": self.min_slack, "tolerance": self.tolerance, "c_h1": self.c_h1,
                "trials": self.trials, "pass": self.passed}


def check_descent_lemma(data, truth, c0, trials=200, seed=0, rank=None, n_probe=20, rtol=1e-6):
    """Check the lower bound on the objective gap around the truth.

    At rank-r points x with ``b = dist(x, x*) <= c0``::

        f(x) - f(x*) >= b^2 C_H1 / 2 - b ||P_T grad f(x*)|| - C_T b^2 ||P_perp grad f(x*)||

    where f is the unpenalized objective, ``C_T = 2 / sigma_r(C*)`` and
    ``C_H1`` is the smallest Hessian eigenvalue found by
    :func:`check_assumptions`. Slack is the left side minus the right side.
    """
    r = rank if rank is not None else np.linalg.matrix_rank(truth.C)
    frame = tangent_frame(truth.C, r)
    if c0 > frame.sigma[-1] / 2.0 * (1 + 1e-12):
        raise ValueError(f"c0 = {c0} exceeds sigma_r / 2 = {frame.sigma[-1] / 2}")
    report = check_assumptions(data, truth, c0, n_probe=n_probe, seed=seed)
    c_h1 = report.c2_hat * data.n
    obj = Objective(data, 0.0)
    f_star = obj.value(truth)
    gC, gg = gradient(obj, truth)
    tC, tg = tangent_project(frame, gC, gg)
    nC, _ = tangent_project(frame, gC, gg, orthogonal=True)
    g_tan = float(np.hypot(np.linalg.norm(tC), np.linalg.norm(tg)))
    g_nor = float(np.linalg.norm(nC))
    c_t = float(frame.curvature)

    rng = np.random.default_rng(seed + 1)
    slack = np.inf
    for _ in range(int(trials)):
        pt = sample_rank_r_point(frame, truth, c0, rng)
        b = param_distance(pt, truth)
        rhs = 0.5 * b * b * c_h1 - b * g_tan - c_t * b * b * g_nor
        slack = min(slack, obj.value(pt) - f_star - rhs)
    tol = rtol * abs(f_star)
    return DescentReport(float(slack), tol, float(c_h1), int(trials), bool(slack >= -tol))


@dataclass
class RateFit:
    n_list: list
    mean_errors: list
    slope: float
    intercept: float
    degenerate: bool = False
    errors: list = field(default_factory=list)

    def as_dict(self):
        return {"n_list": list(self.n_list), "mean_errors": list(self.mean_errors),
                "slope": self.slope, "intercept": self.intercept,
                "degenerate": self.degenerate}


def _signal(spec, seed):
    if isinstance(spec, SyntheticSpec):
        return make_lowrank_sparse(spec, seed), np.asarray(spec.gamma_star, dtype=float)
    return make_shape(spec), None


def rate_experiment(spec, n_list, reps, config, seed=0, noise=None, model=None,
                    gamma_star=None, degenerate_tol=1e-8):
    """Mean estimation error over ``reps`` datasets for each n, and the
    least-squares slope of log(mean error) against log(n)."""
    n_list = [int(n) for n in n_list]
    if len(n_list) < 3 or any(b <= a for a, b in zip(n_list, n_list[1:])):
        raise ValueError("n_list needs at least 3 strictly increasing sizes")
    if reps < 3:
        raise ValueError("reps must be at least 3")
    Cstar, g = _signal(spec, seed)
    if gamma_star is None:
        gamma_star = g if g is not None else np.ones(5)
    gamma_star = np.asarray(gamma_star, dtype=float)
    truth = Coefficients(Cstar, gamma_star)
    noise = NoiseSpec.gaussian() if noise is None else noise
    model = LossModel.ordinary() if model is None else model

    means, raw = [], []
    for i, n in enumerate(n_list):
        errs = []
        for rep in range(int(reps)):
            data = sample_dataset(Cstar, gamma_star, n, noise, model,
                                  seed=derive_seed(seed, (i << 20) + rep + 1))
            errs.append(param_distance(fit(data, config).coefficients, truth))
        raw.append(errs)
        means.append(float(np.mean(errs)))

    if max(means) < degenerate_tol:
        return RateFit(n_list, means, float("nan"), float("nan"), True, raw)
    slope, intercept = np.polyfit(np.log(n_list), np.log(means), 1)
    return RateFit(n_list, means, float(slope), float(intercept), False, raw)
