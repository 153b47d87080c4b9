"""Lloyd scalar quantizer design and cell-probability computations.

Cells are half-open intervals between consecutive thresholds; values sitting
exactly on a threshold belong to the lower cell so that encoding is
deterministic.  All cell-bounded Gaussian integrals use the exact
interval-moment formulas from :mod:`mdquant.gaussian` rather than grid sums,
which keeps K=256 designs accurate even when cells are narrower than any
reasonable grid step.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .gaussian import (
    GaussianSource,
    JointGaussianPair,
    SampleGrid,
    gauss_interval_moments,
)

LLOYD_MAX_ITERATIONS = 500
LLOYD_REL_TOL = 1e-9


@dataclass(frozen=True)
class ScalarQuantizer:
    """Codewords, Voronoi thresholds, and cell probabilities of a scalar quantizer."""

    codewords: np.ndarray
    thresholds: np.ndarray
    cell_probs: np.ndarray

    def __post_init__(self):
        cw = np.asarray(self.codewords, dtype=float)
        th = np.asarray(self.thresholds, dtype=float)
        cp = np.asarray(self.cell_probs, dtype=float)
        if cw.ndim != 1 or cw.size < 1:
            raise ValueError("need at least one codeword")
        if th.shape != (cw.size - 1,):
            raise ValueError("thresholds must have length K-1")
        if cw.size > 1 and (np.any(np.diff(cw) <= 0) or np.any(np.diff(th) <= 0)):
            raise ValueError("codewords and thresholds must be strictly increasing")
        if cp.shape != cw.shape or abs(cp.sum() - 1.0) > 1e-9 or np.any(cp < 0):
            raise ValueError("cell probabilities must be a distribution over cells")
        object.__setattr__(self, "codewords", cw)
        object.__setattr__(self, "thresholds", th)
        object.__setattr__(self, "cell_probs", cp)

    @property
    def size(self) -> int:
        return int(self.codewords.size)

    def edges(self) -> np.ndarray:
        """Cell boundaries including the infinite outer edges (length K+1)."""
        return np.concatenate(([-np.inf], self.thresholds, [np.inf]))


def cell_of(q: ScalarQuantizer, x: float) -> int:
    """Cell index containing x; threshold points assign to the lower cell."""
    if not np.isfinite(x):
        raise ValueError("input value must be finite")
    return int(np.searchsorted(q.thresholds, x, side="left"))


def cells_of(q: ScalarQuantizer, x) -> np.ndarray:
    """Vectorized ``cell_of``."""
    return np.searchsorted(q.thresholds, np.asarray(x, dtype=float), side="left")


def quantizer_mse(q: ScalarQuantizer, source: GaussianSource) -> float:
    """Exact mean squared quantization error of q against the source density."""
    p, m1, m2 = gauss_interval_moments(q.edges(), source.mean, source.std)
    return float(np.sum(m2 - 2.0 * q.codewords * m1 + q.codewords ** 2 * p))


def lloyd_design(source: GaussianSource, K: int, grid: SampleGrid | None = None) -> ScalarQuantizer:
    """Design a K-level Lloyd quantizer for the Gaussian source.

    Initialization is deterministic (codewords at uniform quantiles), the
    centroid/nearest-neighbor iteration runs to a fixed point, and the MSE is
    checked to be non-increasing at every step.
    """
    if K < 1:
        raise ValueError("need at least one quantizer level")
    if grid is not None and K > grid.points.size // 2:
        raise ValueError("quantizer too large for the supplied grid")
    if K == 1:
        return ScalarQuantizer(
            np.array([source.mean]), np.array([]), np.array([1.0])
        )

    codewords = source.ppf((np.arange(K) + 0.5) / K)
    prev_mse = np.inf
    for _ in range(LLOYD_MAX_ITERATIONS):
        thresholds = 0.5 * (codewords[:-1] + codewords[1:])
        edges = np.concatenate(([-np.inf], thresholds, [np.inf]))
        p, m1, _ = gauss_interval_moments(edges, source.mean, source.std)
        # Empty cells cannot occur for a Gaussian with distinct codewords,
        # but guard the division anyway.
        codewords = np.where(p > 0, m1 / np.maximum(p, 1e-300), codewords)
        q = ScalarQuantizer(codewords, thresholds, p / p.sum())
        mse = quantizer_mse(q, source)
        if mse > prev_mse + 1e-15:
            raise RuntimeError("Lloyd iteration increased the MSE")
        if prev_mse - mse < LLOYD_REL_TOL * max(mse, 1e-300):
            return q
        prev_mse = mse
    return q


def cell_probs_given_si(
    q: ScalarQuantizer, pair: JointGaussianPair, y: float
) -> np.ndarray:
    """P(cell k | Y=y) for every cell: conditional Gaussian mass per cell."""
    if not np.isfinite(y):
        raise ValueError("invalid SI value")
    if pair.rho == 0.0:
        return q.cell_probs.copy()
    cond = pair.x_given_y(y)
    p, _, _ = gauss_interval_moments(q.edges(), cond.mean, cond.std)
    return p


def si_cell_mass_given_x(
    q_si: ScalarQuantizer, pair: JointGaussianPair, x
) -> np.ndarray:
    """P(Y lands in each SI cell | X=x) for an array of x values, shape (n, N_si)."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    edges = q_si.edges()
    if pair.rho == 0.0:
        return np.broadcast_to(q_si.cell_probs, (x.size, q_si.size)).copy()
    sd = np.sqrt(pair.var_y * (1.0 - pair.rho ** 2))
    means = pair.rho * (pair.sd_y / pair.sd_x) * x
    from .gaussian import gauss_interval_moments_batch

    p, _, _ = gauss_interval_moments_batch(edges, means, max(sd, 1e-300))
    return p


def si_conditional_density(
    q_si: ScalarQuantizer,
    pair: JointGaussianPair,
    si_level: int,
    grid: SampleGrid,
) -> np.ndarray:
    """Density of X given that Y fell in SI cell ``si_level``, on the grid.

    f(x | cell) = f(x) * P(Y in cell | X=x) / P(cell).
    """
    if not 0 <= si_level < q_si.size:
        raise ValueError("SI level out of range")
    p_cell = float(q_si.cell_probs[si_level])
    if p_cell < 1e-300:
        raise ValueError("degenerate SI cell")
    fx = pair.x_marginal().pdf(grid.points)
    if pair.rho == 0.0 or q_si.size == 1:
        return fx
    mass = si_cell_mass_given_x(q_si, pair, grid.points)[:, si_level]
    return fx * mass / p_cell
