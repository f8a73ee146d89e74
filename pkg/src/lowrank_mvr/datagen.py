"""Synthetic signals and datasets for the simulation studies.

All randomness flows through ``numpy.random.default_rng`` (PCG64) seeded by
an integer, so a given seed reproduces a dataset bit for bit.
"""
from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .models import Dataset, LossKind, LossModel

__all__ = [
    "Shape",
    "ShapeKind",
    "NoiseKind",
    "NoiseSpec",
    "SyntheticSpec",
    "make_shape",
    "make_square_block",
    "make_lowrank_sparse",
    "sample_noise",
    "sample_dataset",
    "derive_seed",
    "split_seed",
]


class Shape(str, enum.Enum):
    SQUARE = "square"
    T = "t"
    CROSS = "cross"
    TRIANGLE = "triangle"
    CIRCLE = "circle"
    BUTTERFLY = "butterfly"


@dataclass(frozen=True)
class ShapeKind:
    shape: Shape = Shape.SQUARE
    g: int = 64

    def __post_init__(self):
        shape = self.shape if isinstance(self.shape, Shape) else Shape(str(self.shape).lower())
        object.__setattr__(self, "shape", shape)
        if int(self.g) < 8:
            raise ValueError(f"grid size must be at least 8, got {self.g}")


class NoiseKind(str, enum.Enum):
    GAUSSIAN = "gaussian"
    CONTAMINATED = "contaminated"
    CAUCHY = "cauchy"


@dataclass(frozen=True)
class NoiseSpec:
    """Additive response noise.

    ``gaussian``: N(0, sigma^2). ``contaminated``: each draw is N(0, sigma_out^2)
    with probability ``p`` and N(0, sigma^2) otherwise. ``cauchy``: standard Cauchy.
    """

    kind: NoiseKind = NoiseKind.GAUSSIAN
    sigma: float = 1.0
    p: float = 0.0
    sigma_out: float = 100.0

    def __post_init__(self):
        object.__setattr__(self, "kind", NoiseKind(self.kind))
        if not self.sigma > 0 or not self.sigma_out > 0:
            raise ValueError("noise scales must be positive")
        if not 0 <= self.p <= 0.5:
            raise ValueError(f"contamination probability must lie in [0, 0.5], got {self.p}")

    @classmethod
    def gaussian(cls, sigma=1.0):
        return cls(NoiseKind.GAUSSIAN, sigma=float(sigma))

    @classmethod
    def contaminated(cls, p, sigma=1.0, sigma_out=100.0):
        return cls(NoiseKind.CONTAMINATED, sigma=float(sigma), p=float(p), sigma_out=float(sigma_out))

    @classmethod
    def cauchy(cls):
        return cls(NoiseKind.CAUCHY)

    @classmethod
    def parse(cls, text):
        """Parse ``gaussian[:sigma]``, ``contaminated:p[:sigma[:sigma_out]]`` or ``cauchy``."""
        kind, *args = str(text).strip().lower().split(":")
        vals = [float(a) for a in args]
        if kind == "gaussian":
            return cls.gaussian(*vals)
        if kind == "contaminated":
            if not vals:
                raise ValueError("contaminated noise needs a probability, e.g. contaminated:0.1")
            return cls.contaminated(*vals)
        if kind == "cauchy":
            if vals:
                raise ValueError("cauchy noise takes no parameters")
            return cls.cauchy()
        raise ValueError(f"unknown noise kind {kind!r}")

    def __str__(self):
        if self.kind is NoiseKind.GAUSSIAN:
            return f"gaussian:{self.sigma:g}"
        if self.kind is NoiseKind.CONTAMINATED:
            return f"contaminated:{self.p:g}:{self.sigma:g}:{self.sigma_out:g}"
        return "cauchy"


@dataclass(frozen=True)
class SyntheticSpec:
    m: int = 64
    q: int = 64
    p_dim: int = 5
    r: int = 1
    s: float = 0.01
    gamma_star: tuple = None

    def __post_init__(self):
        if not 1 <= self.r <= min(self.m, self.q):
            raise ValueError(f"rank control r={self.r} out of range")
        if not 0 < self.s < 1:
            raise ValueError(f"sparsity control s={self.s} must lie in (0, 1)")
        if self.gamma_star is None:
            object.__setattr__(self, "gamma_star", (1.0,) * self.p_dim)
        elif len(self.gamma_star) != self.p_dim:
            raise ValueError("gamma_star length must equal p_dim")

    @property
    def entry_probability(self):
        return math.sqrt(1.0 - (1.0 - self.s) ** (1.0 / self.r))


def derive_seed(seed, index):
    """Seed of replicate ``index`` derived from a base seed."""
    return int(seed) ^ int(index)


def split_seed(seed, k):
    """``k`` independent integer seeds spawned from one seed."""
    children = np.random.SeedSequence(int(seed)).spawn(int(k))
    return [int(c.generate_state(1, dtype=np.uint64)[0]) for c in children]


def make_square_block(g, lo, hi):
    """g x g matrix of ones on the index block ``[lo, hi]^2`` (inclusive, 0-based)."""
    C = np.zeros((g, g))
    C[lo:hi + 1, lo:hi + 1] = 1.0
    return C


def make_shape(spec):
    """Binary g x g image of a 2D shape.

    Square covers ``[ceil(g/3), floor(2g/3)]^2``, which for g = 30 is the
    block 10..20. The others are drawn on the frame ``[g/8, 7g/8]``:
    T (top bar across the grid plus a central stem), Cross (central row and
    column bands of width g/6), Triangle (apex at top centre, base at row
    7g/8), Circle (radius g/4 about the centre) and Butterfly (two
    horizontally opposed triangles meeting at the centre).
    """
    if not isinstance(spec, ShapeKind):
        spec = ShapeKind(spec)
    g = int(spec.g)
    i, j = np.mgrid[0:g, 0:g].astype(float)
    c = g / 2.0
    top, bottom = g / 8.0, 7.0 * g / 8.0
    band = g / 6.0
    in_col_band = np.abs(j + 0.5 - c) < band / 2
    in_row_band = np.abs(i + 0.5 - c) < band / 2
    shape = spec.shape
    if shape is Shape.SQUARE:
        return make_square_block(g, math.ceil(g / 3), (2 * g) // 3)
    if shape is Shape.T:
        bar = (i >= top) & (i < top + band)
        stem = in_col_band & (i >= top) & (i < bottom)
        mask = bar | stem
    elif shape is Shape.CROSS:
        mask = in_row_band | in_col_band
    elif shape is Shape.TRIANGLE:
        height = bottom - top
        half = (i - top) / height * (3.0 * g / 8.0)
        mask = (i >= top) & (i <= bottom) & (np.abs(j - c) <= half)
    elif shape is Shape.CIRCLE:
        mask = (i - c) ** 2 + (j - c) ** 2 <= (g / 4.0) ** 2
    else:
        box = (i >= top) & (i <= bottom) & (j >= top) & (j <= bottom)
        mask = box & (np.abs(i - c) <= np.abs(j - c))
    return mask.astype(float)


def make_lowrank_sparse(spec, seed):
    """``C1 @ C2.T`` with i.i.d. Bernoulli factor entries.

    The entry probability ``sqrt(1 - (1 - s)^(1/r))`` makes each entry of
    the product nonzero with probability ``s``.
    """
    rng = np.random.default_rng(seed)
    prob = spec.entry_probability
    C1 = (rng.random((spec.m, spec.r)) < prob).astype(float)
    C2 = (rng.random((spec.q, spec.r)) < prob).astype(float)
    return C1 @ C2.T


def sample_noise(noise, n, rng):
    if noise.kind is NoiseKind.GAUSSIAN:
        return noise.sigma * rng.standard_normal(n)
    if noise.kind is NoiseKind.CONTAMINATED:
        outlier = rng.random(n) < noise.p
        base = rng.standard_normal(n)
        return np.where(outlier, noise.sigma_out * base, noise.sigma * base)
    u = rng.random(n)
    return np.tan(np.pi * (u - 0.5))


def sample_dataset(Cstar, gamma_star, n, noise=None, model=None, seed=0):
    """Draw n samples with standard normal predictors.

    Regression responses are ``<X_i, C*> + gamma*^T z_i + noise``; logistic
    responses are Bernoulli with success probability ``sigmoid(<X_i, C*> +
    gamma*^T z_i)`` and ignore ``noise``.
    """
    Cstar = np.asarray(Cstar, dtype=float)
    gamma_star = np.asarray(gamma_star, dtype=float).reshape(-1)
    model = LossModel.ordinary() if model is None else model
    n = int(n)
    if n < 1:
        raise ValueError("n must be at least 1")
    m, q = Cstar.shape
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, m, q))
    Z = rng.standard_normal((n, gamma_star.size))
    theta = X.reshape(n, -1) @ Cstar.ravel() + Z @ gamma_star
    if model.kind is LossKind.LOGISTIC:
        if noise is not None:
            warnings.warn("noise specification is ignored for logistic responses", stacklevel=2)
        prob = 0.5 * (1.0 + np.tanh(0.5 * theta))
        y = (rng.random(n) < prob).astype(float)
    else:
        noise = NoiseSpec.gaussian() if noise is None else noise
        y = theta + sample_noise(noise, n, rng)
    return Dataset(X, Z, y, model)
