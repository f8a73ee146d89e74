import numpy as np
import pytest

from lowrank_mvr.datagen import NoiseSpec, ShapeKind, sample_dataset
from lowrank_mvr.errors import CapacityError, RankDeficiencyError
from lowrank_mvr.linalg import Coefficients, tangent_frame
from lowrank_mvr.models import Dataset, LossModel
from lowrank_mvr.solver import SolverConfig
from lowrank_mvr.theory import (check_assumptions, check_curvature, check_descent_lemma,
                                power_iteration, rate_experiment, sample_rank_r_point)


def rank_r_truth(seed, m=8, q=6, r=2, p=2):
    rng = np.random.default_rng(seed)
    C = rng.standard_normal((m, r)) @ rng.standard_normal((r, q))
    return Coefficients(C, rng.standard_normal(p))


def test_power_iteration_matches_eigvalsh(rng):
    A = rng.standard_normal((30, 12))
    G = A.T @ A
    assert power_iteration(lambda v: G @ v, 12) == pytest.approx(np.linalg.eigvalsh(G)[-1], rel=1e-6)
    assert power_iteration(lambda v: 0 * v, 3) == 0.0


def test_assumptions_single_unit_sample():
    data = Dataset(np.ones((1, 1, 1)), np.zeros((1, 1)), [0.0])
    rep = check_assumptions(data, Coefficients.zeros(1, 1, 1), c0=0.5, n_probe=3)
    assert rep.c1_hat == pytest.approx(1.0)
    assert rep.c2_hat == 0.0 and rep.c3_hat == pytest.approx(2.0)


def test_assumptions_gaussian_design():
    truth = rank_r_truth(1, m=3, q=3, r=1)
    n = 20 * (9 + 2)
    data = sample_dataset(truth.C, truth.gamma, n, seed=1)
    rep = check_assumptions(data, truth, c0=0.5, n_probe=5)
    assert rep.c2_hat > 0 and rep.c2_hat <= rep.c3_hat
    assert all(rep.passes.values())
    ev = np.linalg.eigvalsh(np.hstack([data.Xflat, data.Z]).T @ np.hstack([data.Xflat, data.Z]) / n)
    assert rep.c1_hat == pytest.approx(ev[-1], rel=1e-6)


def test_assumptions_robust_outliers_at_truth():
    truth = rank_r_truth(2, m=3, q=3, r=1)
    data = sample_dataset(truth.C, truth.gamma, 60, NoiseSpec.gaussian(1e-12), seed=2)
    data = Dataset(data.X, data.Z, data.y + 100.0, LossModel.robust(1.0))
    rep = check_assumptions(data, truth, c0=0.1, n_probe=1)
    assert rep.c2_hat == 0.0


def test_assumptions_capacity_guard():
    data = Dataset(np.zeros((1, 65, 64)), np.zeros((1, 1)), [0.0])
    with pytest.raises(CapacityError):
        check_assumptions(data, Coefficients.zeros(65, 64, 1), 0.1)


def test_sampled_points_are_rank_r_and_inside_radius():
    truth = rank_r_truth(3)
    frame = tangent_frame(truth.C, 2)
    rng = np.random.default_rng(3)
    radius = frame.sigma[-1] / 2
    for _ in range(50):
        pt = sample_rank_r_point(frame, truth, radius, rng)
        assert np.linalg.matrix_rank(pt.C) == 2
        assert np.hypot(np.linalg.norm(pt.C - truth.C), np.linalg.norm(pt.gamma - truth.gamma)) <= radius + 1e-12


def test_curvature_aligned_family_has_zero_ratio():
    truth = rank_r_truth(4)
    rep = check_curvature(truth.C, truth.gamma, 2, trials=100, aligned=True)
    assert rep.max_ratio < 1e-10 and rep.passed


def test_curvature_bound_holds():
    truth = rank_r_truth(5, m=12, q=9, r=3)
    rep = check_curvature(truth.C, truth.gamma, 3, trials=300, seed=5)
    assert rep.passed and rep.max_ratio <= rep.bound + 1e-9
    assert rep.bound == pytest.approx(2 / rep.sigma_r)


def test_curvature_rank_deficient():
    with pytest.raises(RankDeficiencyError):
        check_curvature(np.outer([1.0, 2.0, 3.0], [1.0, 1.0, 0.0]), np.zeros(1), 2, trials=1)


@pytest.mark.parametrize("kind", ["ordinary", "robust", "logistic"])
def test_descent_lemma_slack_nonnegative(kind):
    truth = rank_r_truth(6, m=4, q=4, r=1)
    model = {"ordinary": LossModel.ordinary(), "robust": LossModel.robust(),
             "logistic": LossModel.logistic()}[kind]
    noise = None if kind == "logistic" else NoiseSpec.gaussian(0.5)
    data = sample_dataset(truth.C, truth.gamma, 400, noise, model, seed=6)
    c0 = 0.4 * tangent_frame(truth.C, 1).sigma[-1]
    rep = check_descent_lemma(data, truth, c0, trials=100, seed=6, n_probe=5)
    assert rep.passed and rep.min_slack >= -rep.tolerance


def test_descent_lemma_noiseless():
    truth = rank_r_truth(7, m=4, q=4, r=1)
    data = sample_dataset(truth.C, truth.gamma, 200, NoiseSpec.gaussian(1e-12), seed=7)
    c0 = 0.4 * tangent_frame(truth.C, 1).sigma[-1]
    rep = check_descent_lemma(data, truth, c0, trials=100, n_probe=5)
    assert rep.passed and rep.min_slack >= -1e-12


def test_descent_lemma_radius_guard():
    truth = rank_r_truth(8, m=4, q=4, r=1)
    data = sample_dataset(truth.C, truth.gamma, 40, seed=8)
    with pytest.raises(ValueError):
        check_descent_lemma(data, truth, tangent_frame(truth.C, 1).sigma[-1], trials=1)


def test_rate_argument_checks():
    cfg = SolverConfig(rank=1)
    with pytest.raises(ValueError):
        rate_experiment(ShapeKind("square", 8), [100, 200], 3, cfg)
    with pytest.raises(ValueError):
        rate_experiment(ShapeKind("square", 8), [100, 300, 200], 3, cfg)
    with pytest.raises(ValueError):
        rate_experiment(ShapeKind("square", 8), [100, 200, 300], 2, cfg)


def test_rate_noiseless_is_degenerate():
    cfg = SolverConfig(rank=1, eps_n=1e-20, n_max=3000)
    fitres = rate_experiment(ShapeKind("square", 8), [100, 200, 400], 3, cfg,
                             noise=NoiseSpec.gaussian(1e-12), gamma_star=np.ones(2))
    assert fitres.degenerate and np.isnan(fitres.slope)
    assert max(fitres.mean_errors) < 1e-8


def test_rate_error_linear_in_sigma():
    cfg = SolverConfig(rank=1)
    runs = [rate_experiment(ShapeKind("square", 12), [300, 600, 1200], 6, cfg, seed=3,
                            noise=NoiseSpec.gaussian(s), gamma_star=np.ones(2)) for s in (1.0, 2.0)]
    ratios = np.array(runs[1].mean_errors) / np.array(runs[0].mean_errors)
    assert np.all((ratios >= 1.6) & (ratios <= 2.4))
    assert -0.7 <= runs[0].slope <= -0.3
