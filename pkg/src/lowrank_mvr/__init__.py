"""Rank-constrained, l1-regularized matrix-variate regression.

Fits ``(C, gamma)`` with ``rank(C) = r`` for squared-error, Huber and
logistic losses by alternating projected gradient descent.
"""
from .datagen import NoiseSpec, ShapeKind, SyntheticSpec, make_lowrank_sparse, make_shape, sample_dataset
from .errors import CapacityError, DimensionError, NumericError, RankDeficiencyError
from .evaluate import CvPlan, Metrics, coefficient_rmse, nested_cv_experiment, prediction_error, tune_lambda
from .linalg import Coefficients, frob_inner, param_distance, project_rank, tangent_frame, tangent_project
from .models import Dataset, LossKind, LossModel, Objective, gradient, hessian, objective_value
from .solver import FitResult, SolverConfig, Termination, fit, line_search

__version__ = "0.1.0"
