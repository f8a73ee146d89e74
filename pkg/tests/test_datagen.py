import math
import warnings

import numpy as np
import pytest

from lowrank_mvr.datagen import (NoiseSpec, Shape, ShapeKind, SyntheticSpec, derive_seed,
                                 make_lowrank_sparse, make_shape, sample_dataset, sample_noise,
                                 split_seed)
from lowrank_mvr.models import LossModel


def svd_rank(A, tol=1e-10):
    s = np.linalg.svd(A, compute_uv=False)
    return int(np.sum(s > tol * s[0]))


def test_square_g30_block():
    C = make_shape(ShapeKind(Shape.SQUARE, 30))
    expect = np.zeros((30, 30))
    for i in range(30):
        for j in range(30):
            if 10 <= i <= 20 and 10 <= j <= 20:
                expect[i, j] = 1.0
    np.testing.assert_array_equal(C, expect)


@pytest.mark.parametrize("g", [8, 30, 32, 64, 65])
def test_shapes_binary_and_ranks(g):
    for shape in Shape:
        C = make_shape(ShapeKind(shape, g))
        assert C.shape == (g, g)
        assert set(np.unique(C)) <= {0.0, 1.0} and C.sum() > 0
    assert svd_rank(make_shape(ShapeKind("square", g))) == 1
    assert svd_rank(make_shape(ShapeKind("t", g))) <= 2
    assert svd_rank(make_shape(ShapeKind("cross", g))) <= 2


def test_shape_kind_validation():
    with pytest.raises(ValueError):
        ShapeKind(Shape.SQUARE, 7)
    assert ShapeKind("Circle").shape is Shape.CIRCLE
    assert ShapeKind(Shape.T).shape is Shape.T


def test_entry_probability():
    assert SyntheticSpec(r=1, s=0.01).entry_probability == pytest.approx(0.1)
    assert SyntheticSpec(r=4, s=0.2).entry_probability == pytest.approx(math.sqrt(1 - 0.8 ** 0.25))


def test_synthetic_validation():
    with pytest.raises(ValueError):
        SyntheticSpec(m=4, q=4, r=5)
    with pytest.raises(ValueError):
        SyntheticSpec(s=0.0)
    with pytest.raises(ValueError):
        SyntheticSpec(p_dim=2, gamma_star=(1.0,))
    assert SyntheticSpec(p_dim=3).gamma_star == (1.0, 1.0, 1.0)


def test_lowrank_sparse_rank_and_support():
    spec = SyntheticSpec(m=20, q=15, r=3, s=0.3)
    for seed in range(10):
        C = make_lowrank_sparse(spec, seed)
        assert C.shape == (20, 15)
        assert np.all(C >= 0) and np.all(C == np.round(C))
        if C.any():
            assert svd_rank(C) <= 3


def test_lowrank_sparse_nonzero_fraction():
    spec = SyntheticSpec(m=64, q=64, r=1, s=0.2)
    frac = np.mean([np.mean(make_lowrank_sparse(spec, s) != 0) for s in range(200)])
    assert abs(frac - 0.2) <= 0.03


def test_noise_parse_and_str():
    assert NoiseSpec.parse("gaussian:2") == NoiseSpec.gaussian(2.0)
    assert NoiseSpec.parse("gaussian") == NoiseSpec.gaussian()
    assert NoiseSpec.parse("contaminated:0.1") == NoiseSpec.contaminated(0.1)
    assert NoiseSpec.parse("CAUCHY") == NoiseSpec.cauchy()
    for spec in (NoiseSpec.gaussian(0.5), NoiseSpec.contaminated(0.2, 1.5, 30), NoiseSpec.cauchy()):
        assert NoiseSpec.parse(str(spec)) == spec
    for bad in ("uniform", "contaminated", "cauchy:1", "contaminated:0.7"):
        with pytest.raises(ValueError):
            NoiseSpec.parse(bad)
    with pytest.raises(ValueError):
        NoiseSpec.gaussian(0.0)


def test_seeds():
    assert derive_seed(7, 0) == 7 and derive_seed(7, 3) == 4
    s = split_seed(5, 4)
    assert len(set(s)) == 4 and s == split_seed(5, 4)


def test_gaussian_response_mean():
    d = sample_dataset(np.zeros((2, 2)), np.zeros(1), 100_000, NoiseSpec.gaussian(1.0), seed=1)
    assert abs(d.y.mean()) < 0.02


def test_logistic_balance_and_warning():
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        d = sample_dataset(np.zeros((2, 2)), np.zeros(1), 100_000, model=LossModel.logistic(), seed=2)
    assert abs(d.y.mean() - 0.5) < 0.02
    assert set(np.unique(d.y)) == {0.0, 1.0}
    with pytest.warns(UserWarning):
        sample_dataset(np.zeros((2, 2)), np.zeros(1), 10, NoiseSpec.gaussian(), LossModel.logistic(), 0)


def test_contamination_tail_fraction():
    def tail(sigma):
        return math.erfc(5.0 / (sigma * math.sqrt(2.0)))
    oracle = 0.9 * tail(1.0) + 0.1 * tail(100.0)
    assert oracle == pytest.approx(0.096, abs=5e-4)
    eps = sample_noise(NoiseSpec.contaminated(0.1), 100_000, np.random.default_rng(3))
    assert abs(np.mean(np.abs(eps) > 5) - oracle) < 0.01


def test_cauchy_quantiles():
    eps = sample_noise(NoiseSpec.cauchy(), 100_000, np.random.default_rng(4))
    # P(|C| <= 1) = 1/2 and P(|C| <= tan(3pi/8)) = 3/4 for the standard Cauchy
    assert abs(np.mean(np.abs(eps) <= 1.0) - 0.5) < 0.01
    assert abs(np.mean(np.abs(eps) <= math.tan(3 * math.pi / 8)) - 0.75) < 0.01


def test_noiseless_limit_residuals():
    rng = np.random.default_rng(5)
    C = rng.standard_normal((4, 3))
    g = rng.standard_normal(2)
    d = sample_dataset(C, g, 50, NoiseSpec.gaussian(1e-12), seed=6)
    resid = d.y - d.Xflat @ C.ravel() - d.Z @ g
    assert np.abs(resid).max() < 1e-9


def test_same_seed_same_dataset():
    C = make_shape(ShapeKind("cross", 16))
    a = sample_dataset(C, np.ones(3), 40, NoiseSpec.cauchy(), seed=9)
    b = sample_dataset(C, np.ones(3), 40, NoiseSpec.cauchy(), seed=9)
    c = sample_dataset(C, np.ones(3), 40, NoiseSpec.cauchy(), seed=10)
    assert a == b and a != c


def test_sample_dataset_requires_samples():
    with pytest.raises(ValueError):
        sample_dataset(np.zeros((2, 2)), np.zeros(1), 0)
