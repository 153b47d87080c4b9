"""Gaussian source/side-information models and deterministic integration grids.

Everything downstream (quantizers, decoder tables, distortion integrals)
conditions on a jointly Gaussian (source, side information) pair, so the
conditional-density and interval-moment helpers here are the numerical
foundation of the whole package.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.special import ndtr, ndtri

SQRT_2PI = np.sqrt(2.0 * np.pi)


def _phi(z):
    """Standard normal pdf."""
    return np.exp(-0.5 * np.square(z)) / SQRT_2PI


@dataclass(frozen=True)
class GaussianSource:
    """Scalar Gaussian source N(mean, variance)."""

    mean: float = 0.0
    variance: float = 1.0

    def __post_init__(self):
        if not np.isfinite(self.mean) or not np.isfinite(self.variance):
            raise ValueError("source parameters must be finite")
        if self.variance <= 0:
            raise ValueError("variance must be positive")

    @property
    def std(self) -> float:
        return float(np.sqrt(self.variance))

    def pdf(self, x):
        return _phi((np.asarray(x, dtype=float) - self.mean) / self.std) / self.std

    def cdf(self, x):
        return ndtr((np.asarray(x, dtype=float) - self.mean) / self.std)

    def ppf(self, q):
        return self.mean + self.std * ndtri(np.asarray(q, dtype=float))


@dataclass(frozen=True)
class JointGaussianPair:
    """Zero-mean jointly Gaussian (source X, side information Y) pair.

    The correlation coefficient fully determines the conditional laws:
    X | Y=y is Gaussian with mean rho*y*sd_x/sd_y and variance var_x*(1-rho^2).
    """

    var_x: float = 1.0
    var_y: float = 1.0
    rho: float = 0.0

    def __post_init__(self):
        if self.var_x <= 0 or self.var_y <= 0:
            raise ValueError("variances must be positive")
        if not np.isfinite(self.rho) or abs(self.rho) > 1:
            raise ValueError("correlation must lie in [-1, 1]")

    @property
    def sd_x(self) -> float:
        return float(np.sqrt(self.var_x))

    @property
    def sd_y(self) -> float:
        return float(np.sqrt(self.var_y))

    @property
    def cov_xy(self) -> float:
        return self.rho * self.sd_x * self.sd_y

    def x_marginal(self) -> GaussianSource:
        return GaussianSource(0.0, self.var_x)

    def y_marginal(self) -> GaussianSource:
        return GaussianSource(0.0, self.var_y)

    def x_given_y(self, y: float) -> GaussianSource:
        mean = self.rho * (self.sd_x / self.sd_y) * y
        var = self.var_x * (1.0 - self.rho ** 2)
        if var <= 0:  # |rho| == 1 degenerates; keep a tiny floor
            var = 1e-300
        return GaussianSource(float(mean), var)

    def y_given_x(self, x: float) -> GaussianSource:
        mean = self.rho * (self.sd_y / self.sd_x) * x
        var = self.var_y * (1.0 - self.rho ** 2)
        if var <= 0:
            var = 1e-300
        return GaussianSource(float(mean), var)


@dataclass(frozen=True)
class SampleGrid:
    """Deterministic quadrature grid: strictly increasing points plus weights."""

    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        wts = np.asarray(self.weights, dtype=float)
        if pts.ndim != 1 or wts.shape != pts.shape:
            raise ValueError("points and weights must be matching 1-D vectors")
        if np.any(np.diff(pts) <= 0):
            raise ValueError("grid points must be strictly increasing")
        if np.any(wts < 0):
            raise ValueError("quadrature weights must be nonnegative")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", wts)

    @property
    def lo(self) -> float:
        return float(self.points[0])

    @property
    def hi(self) -> float:
        return float(self.points[-1])

    @classmethod
    def uniform(cls, lo: float = -6.0, hi: float = 6.0, n: int = 1201) -> "SampleGrid":
        """Uniform grid with composite-trapezoid weights."""
        if n < 2:
            raise ValueError("need at least two grid points")
        pts = np.linspace(lo, hi, n)
        h = (hi - lo) / (n - 1)
        wts = np.full(n, h)
        wts[0] = wts[-1] = h / 2.0
        return cls(pts, wts)


@lru_cache(maxsize=8)
def _cached_uniform(lo: float, hi: float, n: int) -> SampleGrid:
    return SampleGrid.uniform(lo, hi, n)


def default_grid() -> SampleGrid:
    """The package default: [-6, 6] in source std units, 1201 trapezoid points."""
    return _cached_uniform(-6.0, 6.0, 1201)


def integrate(grid: SampleGrid, values) -> float:
    """Weighted sum of sampled values over the grid."""
    values = np.asarray(values, dtype=float)
    if values.shape != grid.points.shape:
        raise ValueError("value vector length does not match grid")
    return float(np.dot(grid.weights, values))


def conditional_density(pair: JointGaussianPair, y: float, grid: SampleGrid) -> np.ndarray:
    """Density of X given Y=y evaluated at the grid points."""
    if not np.isfinite(y):
        raise ValueError("invalid SI value")
    if pair.rho == 0.0:
        return pair.x_marginal().pdf(grid.points)
    return pair.x_given_y(float(y)).pdf(grid.points)


def gauss_interval_moments(edges, mean: float = 0.0, sd: float = 1.0):
    """Zeroth/first/second moments of N(mean, sd^2) over consecutive intervals.

    ``edges`` has length K+1 (may include +-inf) and partitions the line into
    K cells.  Returns (p, m1, m2), each length K, where
    p[k] = P(cell k), m1[k] = E[X 1{cell k}], m2[k] = E[X^2 1{cell k}].
    Closed form via the standard normal cdf/pdf, exact to machine precision.
    """
    edges = np.asarray(edges, dtype=float)
    z = (edges - mean) / sd
    cdf = ndtr(z)
    pdf = _phi(z)
    zpdf = np.where(np.isfinite(z), z, 0.0) * pdf  # pdf is exactly 0 at +-inf
    dp = np.diff(cdf)
    dpdf = np.diff(pdf)
    dzpdf = np.diff(zpdf)
    m1 = mean * dp - sd * dpdf
    m2 = (mean ** 2 + sd ** 2) * dp - sd * (2.0 * mean * dpdf + sd * dzpdf)
    return dp, m1, m2


def gauss_interval_moments_batch(edges, means, sd: float):
    """Vectorized ``gauss_interval_moments`` for many conditional means.

    ``means`` has shape (n,); returns arrays of shape (n, K).
    """
    edges = np.asarray(edges, dtype=float)
    means = np.asarray(means, dtype=float)[:, None]
    z = (edges[None, :] - means) / sd
    cdf = ndtr(z)
    pdf = _phi(z)
    zpdf = np.where(np.isfinite(z), z, 0.0) * pdf
    dp = np.diff(cdf, axis=1)
    dpdf = np.diff(pdf, axis=1)
    dzpdf = np.diff(zpdf, axis=1)
    m1 = means * dp - sd * dpdf
    m2 = (means ** 2 + sd ** 2) * dp - sd * (2.0 * means * dpdf + sd * dzpdf)
    return dp, m1, m2


def _default_levels() -> np.ndarray:
    return np.array([0.0, 0.2, 0.4, 0.6, 0.8, 0.9, 0.95, 0.99])


@dataclass(frozen=True)
class CorrelationLadder:
    """Quantized correlation levels shared by all stored decoder tables."""

    levels: np.ndarray = field(default_factory=_default_levels)

    def __post_init__(self):
        lv = np.asarray(self.levels, dtype=float)
        if lv.ndim != 1 or lv.size == 0:
            raise ValueError("ladder needs at least one level")
        if np.any(np.diff(lv) <= 0):
            raise ValueError("ladder levels must be strictly increasing")
        if lv[0] < 0 or lv[-1] >= 1:
            raise ValueError("ladder levels must lie in [0, 1)")
        object.__setattr__(self, "levels", lv)

    @property
    def count(self) -> int:
        return int(self.levels.size)


def quantize_rho(rho: float, ladder: CorrelationLadder) -> int:
    """Index of the nearest ladder level; ties break toward the lower level.

    Negative correlations are rejected: all supported operating points use
    rho >= 0.
    """
    if not np.isfinite(rho) or rho < 0 or rho > 1:
        raise ValueError("correlation must lie in [0, 1]")
    dist = np.abs(ladder.levels - rho)
    return int(np.argmin(dist))
