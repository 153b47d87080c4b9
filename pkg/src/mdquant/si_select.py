"""Side-information source selection for the joint decoder.

Three criteria are provided, in increasing order of cost and quality:
nearest node by physical distance, largest mutual information between the
received words given the current loss patterns, and smallest expected
end-to-end distortion of the partial-SI decoder.  All ties resolve to the
lowest candidate index so selections are deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import ChannelOutcome, pattern_index, pattern_table, tuple_space
from .codec import CodecBundle
from .decode_asym import tuple_log_likelihood
from .decode_sym import CrossSourceTables, CrossTableCache


@dataclass(frozen=True)
class SiAssignment:
    """Chosen SI source per source plus the evaluated criterion scores."""

    map: np.ndarray
    method: str
    scores: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.map, dtype=int)
        if np.any(m == np.arange(m.size)):
            raise ValueError("a source cannot be its own SI")
        object.__setattr__(self, "map", m)


def select_min_distance(positions) -> SiAssignment:
    """Nearest neighbor by Euclidean distance; ties pick the lower index."""
    pos = np.asarray(positions, dtype=float)
    if pos.ndim != 2 or pos.shape[0] < 2 or not np.all(np.isfinite(pos)):
        raise ValueError("need at least two sources with finite coordinates")
    diff = pos[:, None, :] - pos[None, :, :]
    dist = np.sqrt(np.sum(diff**2, axis=2))
    np.fill_diagonal(dist, np.inf)
    return SiAssignment(np.argmin(dist, axis=1), "distance", dist)


def _entropy_bits(p: np.ndarray) -> float:
    p = p[p > 0]
    return float(-np.sum(p * np.log2(p)))


def pairwise_mi(
    bundle_u: CodecBundle,
    bundle_t: CodecBundle,
    cross: CrossSourceTables,
    q_u,
    q_t,
) -> float:
    """Mutual information (bits) between the two sources' received words.

    Computed from the exact discrete joint of the received words given the
    loss patterns: quantizer cell joint -> index tuples -> channel outputs.
    Lost descriptions are excluded from the enumeration (their contribution
    is an index-independent constant).
    """
    space_u = tuple_space(bundle_u.channels)
    space_t = tuple_space(bundle_t.channels)
    t_u = pattern_table(bundle_u.channels, q_u, space_u).table  # (Lu, nJu)
    t_t = pattern_table(bundle_t.channels, q_t, space_t).table
    g_u = bundle_u.ia.table @ t_u  # (Ku, nJu): P(Ju | own cell)
    g_t = bundle_t.ia.table @ t_t
    p_cells_t = bundle_t.quantizer.cell_probs
    cell_joint = cross.cell_cross * p_cells_t[None, :]  # (Ku, Kt)

    pj_u = g_u.T @ (cell_joint.sum(axis=1))
    pj_t = g_t.T @ p_cells_t
    joint = g_u.T @ cell_joint @ g_t
    mi = _entropy_bits(pj_u) + _entropy_bits(pj_t) - _entropy_bits(joint.ravel())
    return max(float(mi), 0.0)


def select_max_mi(
    q_patterns,
    bundle: CodecBundle,
    rho_matrix,
    cache: CrossTableCache,
) -> SiAssignment:
    """Per-source argmax of pairwise MI given the realized loss patterns.

    Scores use the exact pairwise correlations (the criterion is not tied to
    the stored decoder-table grid).
    """
    q_patterns = np.asarray(q_patterns, dtype=bool)
    rho_matrix = np.asarray(rho_matrix, dtype=float)
    n = q_patterns.shape[0]
    scores = np.full((n, n), -np.inf)
    memo: dict = {}
    for u in range(n):
        for t in range(n):
            if t == u:
                continue
            rho_key = round(float(rho_matrix[u, t]), 12)
            key = (rho_key, pattern_index(q_patterns[u]), pattern_index(q_patterns[t]))
            if key not in memo:
                memo[key] = pairwise_mi(
                    bundle, bundle, cache.get_rho(rho_key), q_patterns[u], q_patterns[t]
                )
            scores[u, t] = memo[key]
    return SiAssignment(np.argmax(scores, axis=1), "mutual_info", scores)


def _neighbor_cell_posterior(outcome_t: ChannelOutcome, bundle_t: CodecBundle) -> np.ndarray:
    """P(neighbor cell | its received words): prior cell mass times channel evidence."""
    lik = np.exp(tuple_log_likelihood(outcome_t, bundle_t.channels))
    w = bundle_t.quantizer.cell_probs * (bundle_t.ia.table @ lik)
    total = w.sum()
    if total <= 0:
        raise ValueError("inconsistent tables")
    return w / total


def partial_si_reconstruct(
    outcome_u: ChannelOutcome,
    outcome_t: ChannelOutcome,
    bundle_u: CodecBundle,
    bundle_t: CodecBundle,
    cross: CrossSourceTables,
) -> float:
    """MMSE estimate of source u using the neighbor's raw received words as SI."""
    w = _neighbor_cell_posterior(outcome_t, bundle_t)
    prior = cross.idx_given_cell @ w
    first = (cross.idx_given_cell * cross.cent_given_cell) @ w
    lik = np.exp(tuple_log_likelihood(outcome_u, bundle_u.channels))
    post = lik * prior
    total = post.sum()
    if total <= 0:
        raise ValueError("inconsistent tables")
    post /= total
    cent = np.where(prior > 0, first / np.where(prior > 0, prior, 1.0), 0.0)
    return float(np.dot(post, cent))


def expected_partial_si_distortion(
    bundle: CodecBundle,
    cross: CrossSourceTables,
    q_u,
    q_t,
    var_x: float = 1.0,
) -> float:
    """E[(X - Xhat)^2] of the partial-SI decoder given both loss patterns.

    Exact enumeration over both sources' received words (BSC channels).
    """
    space = tuple_space(bundle.channels)
    t_u = pattern_table(bundle.channels, q_u, space).table  # (L, nJu)
    t_t = pattern_table(bundle.channels, q_t, space).table  # (L, nJt)
    a = bundle.ia.table
    p_cells = bundle.quantizer.cell_probs
    g_u = a @ t_u  # (K, nJu)
    g_t = a @ t_t  # (K, nJt)

    cell_joint = cross.cell_cross * p_cells[None, :]
    cell_joint_m1 = cross.cell_cross_m1 * p_cells[None, :]
    pjj = g_u.T @ cell_joint @ g_t  # (nJu, nJt)
    njj = g_u.T @ cell_joint_m1 @ g_t

    w_cells = p_cells[:, None] * g_t  # (K, nJt), unnormalized neighbor cell posterior
    prior_jt = cross.idx_given_cell @ w_cells  # (L, nJt)
    first_jt = (cross.idx_given_cell * cross.cent_given_cell) @ w_cells
    den = t_u.T @ prior_jt  # (nJu, nJt)
    num = t_u.T @ first_jt
    xhat = np.where(den > 0, num / np.where(den > 0, den, 1.0), 0.0)
    d = var_x - 2.0 * np.sum(njj * xhat) + np.sum(pjj * xhat**2)
    return float(max(d, 0.0))


def select_min_distortion(
    q_patterns,
    bundle: CodecBundle,
    rho_matrix,
    cache: CrossTableCache,
    var_x: float = 1.0,
) -> SiAssignment:
    """Per-source argmin of the expected partial-SI decoder distortion.

    Scores use the exact pairwise correlations, like :func:`select_max_mi`.
    """
    q_patterns = np.asarray(q_patterns, dtype=bool)
    rho_matrix = np.asarray(rho_matrix, dtype=float)
    n = q_patterns.shape[0]
    scores = np.full((n, n), np.inf)
    memo: dict = {}
    for u in range(n):
        for t in range(n):
            if t == u:
                continue
            rho_key = round(float(rho_matrix[u, t]), 12)
            key = (rho_key, pattern_index(q_patterns[u]), pattern_index(q_patterns[t]))
            if key not in memo:
                memo[key] = expected_partial_si_distortion(
                    bundle, cache.get_rho(rho_key), q_patterns[u], q_patterns[t], var_x
                )
            scores[u, t] = memo[key]
    return SiAssignment(np.argmin(scores, axis=1), "min_distortion", scores)
