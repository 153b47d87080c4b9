"""Index-assignment tables, analytic distortion, and annealed codec design.

The encoder is a scalar quantizer followed by a (possibly soft) mapping from
quantizer cells to description-index tuples.  Design runs a deterministic
annealing loop: at each temperature the mapping is re-estimated from a
Gibbs/softmax rule driven by the derivative of the end-to-end distortion,
then the temperature is cooled until the mapping freezes to a hard table.

All analytic machinery reduces to three moment matrices S0, S1, S2 of shape
(K cells x N_si levels):

    Sn[k, y] = integral over cell k of x^n * f(x) * P(SI level y | x) dx

from which priors P(I | y), codebooks C(I | y), reconstruction lookups and
the annealing weights are all small matrix contractions.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial.legendre import leggauss

from .channel import (
    derive_rng,
    loss_pattern_prob,
    pattern_likelihood_tables,
    tuple_space,
)
from .gaussian import (
    CorrelationLadder,
    JointGaussianPair,
    gauss_interval_moments,
    gauss_interval_moments_batch,
    quantize_rho,
)
from .quantizer import ScalarQuantizer

log = logging.getLogger(__name__)

TAIL_CLIP = 8.0  # SI integration range in std units; mass beyond is < 1e-15
# Probabilities below this are treated as zero: ratios of genuinely tiny
# cell/level joints otherwise amplify float underflow into huge codebook
# values whose squares overflow.
PROB_FLOOR = 1e-250


@dataclass(frozen=True)
class IndexAssignment:
    """Row-stochastic K x L table P(index tuple | quantizer cell)."""

    table: np.ndarray
    hard: bool = False

    def __post_init__(self):
        t = np.asarray(self.table, dtype=float)
        if t.ndim != 2:
            raise ValueError("index assignment must be a 2-D table")
        if np.any(t < -1e-15) or np.any(t > 1 + 1e-12):
            raise ValueError("table entries must lie in [0, 1]")
        if np.any(np.abs(t.sum(axis=1) - 1.0) > 1e-9):
            raise ValueError("each row must sum to 1")
        if self.hard:
            if not np.all((t < 1e-12) | (np.abs(t - 1.0) < 1e-12)):
                raise ValueError("hard table rows must be unit vectors")
            t = np.round(t)
        object.__setattr__(self, "table", t)

    @property
    def n_cells(self) -> int:
        return int(self.table.shape[0])

    @property
    def n_tuples(self) -> int:
        return int(self.table.shape[1])

    def hard_map(self) -> np.ndarray:
        """Cell -> tuple id map (argmax per row)."""
        return np.argmax(self.table, axis=1)


def ia_entropy(ia: IndexAssignment, cell_probs) -> float:
    """Conditional entropy of the tuple given the cell, in bits (0 log 0 = 0)."""
    p = np.asarray(cell_probs, dtype=float)
    t = ia.table
    with np.errstate(divide="ignore", invalid="ignore"):
        logs = np.where(t > 0, np.log2(np.maximum(t, 1e-300)), 0.0)
    return float(-np.sum(p[:, None] * t * logs))


def harden(ia: IndexAssignment) -> IndexAssignment:
    """Row-wise argmax; ties resolve to the lowest tuple index."""
    hard = np.zeros_like(ia.table)
    hard[np.arange(ia.n_cells), ia.hard_map()] = 1.0
    return IndexAssignment(hard, hard=True)


def gibbs_update(weights: np.ndarray, T: float, cell_probs) -> IndexAssignment:
    """Softmax re-estimation of the assignment at temperature T.

    Row k becomes exp(-W[k,I] / (T * P(k))) normalized over I, computed with
    per-row max subtraction so extreme exponents cannot overflow.
    """
    if T <= 0:
        raise ValueError("temperature must be positive")
    p = np.maximum(np.asarray(cell_probs, dtype=float), 1e-300)
    expo = -np.asarray(weights, dtype=float) / (T * p[:, None])
    expo -= expo.max(axis=1, keepdims=True)
    rows = np.exp(expo)
    rows /= rows.sum(axis=1, keepdims=True)
    return IndexAssignment(rows, hard=False)


# ---------------------------------------------------------------------------
# Moment matrices
# ---------------------------------------------------------------------------


def _si_panels(q_si: ScalarQuantizer | None, sd_y: float, n_gauss: int):
    """Gauss-Legendre nodes/weights per SI cell, tails clipped at TAIL_CLIP."""
    lo, hi = -TAIL_CLIP * sd_y, TAIL_CLIP * sd_y
    if q_si is None:
        edges = np.array([lo, hi])
        n_levels = 1
    else:
        edges = np.clip(q_si.edges(), lo, hi)
        n_levels = q_si.size
    base_x, base_w = leggauss(n_gauss)
    nodes, weights, owner = [], [], []
    for lvl in range(n_levels):
        a, b = edges[lvl], edges[lvl + 1]
        if b <= a:
            continue
        n_panels = max(1, int(np.ceil((b - a) / (0.75 * sd_y))))
        bounds = np.linspace(a, b, n_panels + 1)
        for pa, pb in zip(bounds[:-1], bounds[1:]):
            half = 0.5 * (pb - pa)
            nodes.append(0.5 * (pa + pb) + half * base_x)
            weights.append(half * base_w)
            owner.append(np.full(n_gauss, lvl, dtype=int))
    return (
        np.concatenate(nodes),
        np.concatenate(weights),
        np.concatenate(owner),
        n_levels,
    )


def si_moment_matrices(
    quantizer: ScalarQuantizer,
    si_quantizer: ScalarQuantizer | None,
    pair: JointGaussianPair,
    n_gauss: int = 16,
):
    """S0, S1, S2 moment matrices of shape (K, N_si).

    The y-integral uses panelled Gauss-Legendre per SI cell; the inner
    x-moments over quantizer cells are exact Gaussian interval moments of the
    conditional law X | Y=y.  With ``si_quantizer`` None a single
    unconditional column is returned.
    """
    edges = quantizer.edges()
    K = quantizer.size
    if pair.rho == 0.0 or (si_quantizer is not None and si_quantizer.size == 1) or si_quantizer is None:
        p, m1, m2 = gauss_interval_moments(edges, 0.0, pair.sd_x)
        if si_quantizer is None or pair.rho == 0.0:
            n_levels = 1 if si_quantizer is None else si_quantizer.size
            if n_levels == 1:
                return p[:, None], m1[:, None], m2[:, None]
            # Independent SI: every level sees the marginal, weighted by P(level).
            w = si_quantizer.cell_probs[None, :]
            return p[:, None] * w, m1[:, None] * w, m2[:, None] * w
        return p[:, None], m1[:, None], m2[:, None]

    nodes, wts, owner, n_levels = _si_panels(si_quantizer, pair.sd_y, n_gauss)
    fy = np.exp(-0.5 * (nodes / pair.sd_y) ** 2) / (pair.sd_y * np.sqrt(2 * np.pi))
    wts = wts * fy
    cond_sd = max(pair.sd_x * np.sqrt(1.0 - pair.rho ** 2), 1e-300)
    cond_means = pair.rho * (pair.sd_x / pair.sd_y) * nodes

    s0 = np.zeros((K, n_levels))
    s1 = np.zeros((K, n_levels))
    s2 = np.zeros((K, n_levels))
    chunk = max(1, 2_000_000 // max(K, 1))
    for start in range(0, nodes.size, chunk):
        sl = slice(start, start + chunk)
        p, m1, m2 = gauss_interval_moments_batch(edges, cond_means[sl], cond_sd)
        w = wts[sl][:, None]
        own = owner[sl]
        np.add.at(s0.T, own, p * w)
        np.add.at(s1.T, own, m1 * w)
        np.add.at(s2.T, own, m2 * w)
    return _clean_moments(s0, s1, s2)


def _clean_moments(s0, s1, s2):
    """Zero entries below the double-precision noise floor.

    Far-tail interval probabilities cancel to exactly 0 in the normal cdf
    while the pdf-difference terms of the first/second moments leave ~1e-19
    residue; ratios of that residue explode.  Mass below 1e-14 of the peak is
    numerically indistinguishable from zero and is dropped consistently from
    all three moments.
    """
    noise = 1e-14 * s0.max()
    bad = s0 <= noise
    s0 = np.where(bad, 0.0, s0)
    s1 = np.where(bad, 0.0, s1)
    s2 = np.where(bad, 0.0, np.maximum(s2, 0.0))
    return s0, s1, s2


# ---------------------------------------------------------------------------
# Decoder tables
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DecoderTables:
    """Stored priors P(I | SI level) and codebooks C(I | SI level).

    Arrays are indexed (correlation level, SI level, tuple).  ``prior_nosi``
    and ``codebook_nosi`` are the no-side-information fallbacks used when the
    decoder has no SI (first iteration of the joint decoder, or an SI-blind
    system).  Tuples with zero prior keep codebook value 0 and are flagged in
    ``zero_mask``.
    """

    rho_values: np.ndarray
    si_probs: np.ndarray
    prior: np.ndarray
    codebook: np.ndarray
    prior_nosi: np.ndarray
    codebook_nosi: np.ndarray
    zero_mask: np.ndarray

    def __post_init__(self):
        sums = self.prior.sum(axis=2)
        if np.any(np.abs(sums - 1.0) > 1e-9):
            raise ValueError("priors must be normalized per (rho, SI) level")
        if abs(self.prior_nosi.sum() - 1.0) > 1e-9:
            raise ValueError("no-SI prior must be normalized")

    @property
    def n_rho(self) -> int:
        return int(self.prior.shape[0])

    @property
    def n_si(self) -> int:
        return int(self.prior.shape[1])

    @property
    def n_tuples(self) -> int:
        return int(self.prior.shape[2])


def _nosi_tables(quantizer, table, sd_x):
    p, m1, _ = gauss_interval_moments(quantizer.edges(), 0.0, sd_x)
    prior = table.T @ p
    first = table.T @ m1
    zero = prior <= PROB_FLOOR
    prior = np.where(zero, 0.0, prior)
    codebook = np.where(zero, 0.0, first / np.where(zero, 1.0, prior))
    return prior, codebook, zero


def _tables_for_pair(quantizer, si_quantizer, table, pair, n_gauss):
    n_si = 1 if si_quantizer is None else si_quantizer.size
    if pair.rho == 0.0:
        # Independent SI: every level must reproduce the no-SI tables
        # bit-exactly so that iterating on uncorrelated neighbors is a no-op.
        prior, codebook, zero = _nosi_tables(quantizer, table, pair.sd_x)
        psi = (
            np.array([1.0])
            if si_quantizer is None
            else si_quantizer.cell_probs.copy()
        )
        return (
            np.tile(prior, (n_si, 1)),
            np.tile(codebook, (n_si, 1)),
            np.tile(zero, (n_si, 1)),
            psi,
        )
    s0, s1, _ = si_moment_matrices(quantizer, si_quantizer, pair, n_gauss)
    joint = table.T @ s0  # (L, S): P(I, SI level)
    first = table.T @ s1
    psi = joint.sum(axis=0)
    zero = joint <= PROB_FLOOR
    prior = np.where(zero, 0.0, joint / np.maximum(psi[None, :], 1e-300))
    codebook = np.where(zero, 0.0, first / np.where(zero, 1.0, joint))
    return prior.T, codebook.T, zero.T, psi  # (S, L) each


def build_decoder_tables(
    quantizer: ScalarQuantizer,
    si_quantizer: ScalarQuantizer | None,
    ia: IndexAssignment,
    pairs,
    n_gauss: int = 16,
) -> DecoderTables:
    """Build stored decoder tables for one pair or a whole correlation ladder."""
    if isinstance(pairs, JointGaussianPair):
        pairs = [pairs]
    priors, codebooks, zeros = [], [], []
    for pair in pairs:
        prior, codebook, zero, _ = _tables_for_pair(
            quantizer, si_quantizer, ia.table, pair, n_gauss
        )
        priors.append(prior)
        codebooks.append(codebook)
        zeros.append(zero)
    si_probs = (
        np.array([1.0]) if si_quantizer is None else si_quantizer.cell_probs.copy()
    )
    prior_nosi, codebook_nosi, _ = _nosi_tables(quantizer, ia.table, pairs[0].sd_x)
    return DecoderTables(
        rho_values=np.array([pr.rho for pr in pairs]),
        si_probs=np.asarray(si_probs),
        prior=np.stack(priors),
        codebook=np.stack(codebooks),
        prior_nosi=prior_nosi,
        codebook_nosi=codebook_nosi,
        zero_mask=np.stack(zeros),
    )


# ---------------------------------------------------------------------------
# Analytic distortion and annealing weights
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DistortionBreakdown:
    """Source-encoder and channel contributions to the mean squared error."""

    d_se: float
    d_ch: float

    @property
    def d_av(self) -> float:
        return self.d_se + self.d_ch

    def d_av_db(self, reference_var: float = 1.0) -> float:
        return 10.0 * np.log10(self.d_av / reference_var)


class DesignContext:
    """Precomputed quantities for analytic distortion/weight evaluation.

    Valid for one (quantizer, SI quantizer, source/SI pair, channel vector)
    combination; the index assignment varies across calls.
    """

    def __init__(self, quantizer, si_quantizer, pair, channels, n_gauss: int = 16):
        for ch in channels:
            if ch.kind != "bsc":
                raise ValueError("analytic evaluation requires discrete channel")
        self.quantizer = quantizer
        self.si_quantizer = si_quantizer
        self.pair = pair
        self.channels = tuple(channels)
        self.space = tuple_space(channels)
        self.s0, self.s1, self.s2 = si_moment_matrices(
            quantizer, si_quantizer, pair, n_gauss
        )
        self.pattern_tables = pattern_likelihood_tables(channels, self.space)
        self.pattern_probs = np.array(
            [loss_pattern_prob(pt.pattern, channels) for pt in self.pattern_tables]
        )
        self.cell_probs = quantizer.cell_probs

    def decoder_state(self, table: np.ndarray):
        """Joint tables and reconstruction lookups implied by an assignment."""
        joint = table.T @ self.s0  # (L, S) joint P(I, SI level)
        first = table.T @ self.s1
        xhats = []
        for pt in self.pattern_tables:
            den = pt.table.T @ joint  # (n_j, S)
            num = pt.table.T @ first
            ok = den > PROB_FLOOR
            xhat = np.where(ok, num / np.where(ok, den, 1.0), 0.0)
            xhats.append(xhat)
        return joint, first, xhats

    def distortion(self, table: np.ndarray, state=None) -> DistortionBreakdown:
        """Matched-decoder average distortion split into encoder/channel parts."""
        joint, first, xhats = state if state is not None else self.decoder_state(table)
        second = table.T @ self.s2
        pos = joint > PROB_FLOOR
        d_se = float(second.sum() - np.sum(first[pos] ** 2 / joint[pos]))
        d_ch = 0.0
        for pq, pt, xhat in zip(self.pattern_probs, self.pattern_tables, xhats):
            e2 = pt.table.T @ (np.where(pos, first**2 / np.where(pos, joint, 1.0), 0.0))
            num = pt.table.T @ first
            den = pt.table.T @ joint
            d_ch += pq * float(np.sum(e2 - 2.0 * num * xhat + den * xhat**2))
        return DistortionBreakdown(d_se, max(d_ch, 0.0))

    def distortion_direct(self, table: np.ndarray, state=None) -> float:
        """Single-pass expectation E[(X - Xhat)^2] without the SE/Ch split."""
        if state is None:
            state = self.decoder_state(table)
        return float(np.sum(table * self.weights(state)))

    def weights(self, state) -> np.ndarray:
        """Distortion derivative d D / d P(I | cell k), shape (K, L).

        Uses the reconstruction lookups of ``state`` (i.e., the decoder built
        from the assignment of the previous step).
        """
        _, _, xhats = state
        L = self.space.size
        K = self.quantizer.size
        a1 = np.zeros((L, K))
        a0 = np.zeros((L, K))
        for pq, pt, xhat in zip(self.pattern_probs, self.pattern_tables, xhats):
            e1 = xhat @ self.s1.T  # (n_j, K)
            e0 = (xhat**2) @ self.s0.T
            a1 += pq * (pt.table @ e1)
            a0 += pq * (pt.table @ e0)
        s2_tot = self.s2.sum(axis=1)  # (K,)
        return (s2_tot[None, :] - 2.0 * a1 + a0).T


def evaluate_distortion(
    quantizer: ScalarQuantizer,
    si_quantizer: ScalarQuantizer | None,
    ia: IndexAssignment,
    pair: JointGaussianPair,
    channels,
    n_gauss: int = 16,
) -> DistortionBreakdown:
    """Analytic D_se / D_ch / D_av for a codec over BSC channels."""
    ctx = DesignContext(quantizer, si_quantizer, pair, channels, n_gauss)
    return ctx.distortion(ia.table)


def da_weights(
    quantizer: ScalarQuantizer,
    si_quantizer: ScalarQuantizer | None,
    ia: IndexAssignment,
    pair: JointGaussianPair,
    channels,
    n_gauss: int = 16,
) -> np.ndarray:
    """Annealing weight matrix with reconstructions built from ``ia``."""
    ctx = DesignContext(quantizer, si_quantizer, pair, channels, n_gauss)
    return ctx.weights(ctx.decoder_state(ia.table))


# ---------------------------------------------------------------------------
# Deterministic annealing design
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AnnealingSchedule:
    """Knobs of the annealing loop; defaults favor reproducible desk runs."""

    t_init: float | None = None
    cooling: float = 0.9
    t_min_ratio: float = 1e-6
    inner_tol: float = 1e-5
    inner_cap: int = 50
    restarts: int = 3
    entropy_target: float = 0.95

    def __post_init__(self):
        if not 0 < self.cooling < 1:
            raise ValueError("cooling factor must lie in (0, 1)")
        if self.inner_cap < 1 or self.restarts < 1:
            raise ValueError("inner cap and restarts must be positive")


@dataclass(frozen=True)
class CodecBundle:
    """A designed codec: quantizers, hard assignment, channels, stored tables."""

    quantizer: ScalarQuantizer
    si_quantizer: ScalarQuantizer | None
    ia: IndexAssignment
    channels: tuple
    design_rho: float
    ladder: CorrelationLadder
    tables: DecoderTables
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.ia.hard:
            raise ValueError("bundle requires a hardened index assignment")

    def rho_level(self, rho: float) -> int:
        return quantize_rho(rho, self.ladder)

    def with_si_quantizer(self, si_quantizer, n_gauss: int = 16) -> "CodecBundle":
        """Same codec with decoder tables rebuilt for another SI quantizer."""
        pairs = [JointGaussianPair(1.0, 1.0, float(r)) for r in self.ladder.levels]
        tables = build_decoder_tables(self.quantizer, si_quantizer, self.ia, pairs, n_gauss)
        return CodecBundle(
            quantizer=self.quantizer,
            si_quantizer=si_quantizer,
            ia=self.ia,
            channels=self.channels,
            design_rho=self.design_rho,
            ladder=self.ladder,
            tables=tables,
            metadata={**self.metadata, "si_quantizer_rebuilt": si_quantizer.size},
        )


def _auto_t_init(weights, cell_probs, entropy_target: float) -> float:
    L = weights.shape[1]
    target = entropy_target * np.log2(L)
    if target <= 0:
        return 1.0

    def entropy_at(T):
        return ia_entropy(gibbs_update(weights, T, cell_probs), cell_probs)

    T = 1e-6
    if entropy_at(T) >= target:
        return T
    while entropy_at(T) < target:
        T *= 4.0
        if T > 1e18:
            return T
    lo, hi = T / 4.0, T
    for _ in range(40):
        mid = np.sqrt(lo * hi)
        if entropy_at(mid) >= target:
            hi = mid
        else:
            lo = mid
    return 2.0 * hi


def _anneal_once(ctx: DesignContext, schedule: AnnealingSchedule, rng):
    L = ctx.space.size
    K = ctx.quantizer.size
    table = rng.dirichlet(np.ones(L), size=K)
    state = ctx.decoder_state(table)
    weights = ctx.weights(state)
    t_init = schedule.t_init or _auto_t_init(weights, ctx.cell_probs, schedule.entropy_target)
    t_min = schedule.t_min_ratio * t_init

    T = t_init
    d_av = ctx.distortion(table, state).d_av
    violations = 0
    cap_hits = 0
    prev_entropy = None
    entropy_increases = 0
    while T > t_min:
        d_prev = np.inf
        for _ in range(schedule.inner_cap):
            ia = gibbs_update(weights, T, ctx.cell_probs)
            table = ia.table
            state = ctx.decoder_state(table)
            d_av = ctx.distortion(table, state).d_av
            weights = ctx.weights(state)
            if d_av > d_prev * (1.0 + 1e-12):
                violations += 1
            if abs(d_prev - d_av) < schedule.inner_tol * max(d_av, 1e-300):
                break
            d_prev = d_av
        else:
            cap_hits += 1
        ent = ia_entropy(IndexAssignment(table), ctx.cell_probs)
        if prev_entropy is not None and ent > prev_entropy + 1e-9:
            entropy_increases += 1
        prev_entropy = ent
        T *= schedule.cooling

    soft_d = d_av
    hard_ia = harden(IndexAssignment(table))
    hard_d = ctx.distortion(hard_ia.table).d_av
    info = {
        "t_init": float(t_init),
        "soft_d_av": float(soft_d),
        "hardening_gap": float(hard_d - soft_d),
        "monotonicity_violations": int(violations),
        "inner_cap_hits": int(cap_hits),
        "entropy_increases": int(entropy_increases),
    }
    if cap_hits:
        log.warning("annealing inner loop hit the iteration cap %d time(s)", cap_hits)
    if violations:
        log.info("annealing saw %d non-monotone inner step(s)", violations)
    return hard_ia, float(hard_d), info


def design_annealed(
    quantizer: ScalarQuantizer,
    si_quantizer: ScalarQuantizer | None,
    pair: JointGaussianPair,
    channels,
    schedule: AnnealingSchedule | None = None,
    seed: int = 0,
    ladder: CorrelationLadder | None = None,
    n_gauss: int = 16,
) -> CodecBundle:
    """Design a codec by deterministic annealing and package it with tables.

    Runs ``schedule.restarts`` independent seeded starts and keeps the best
    hardened table.  The returned bundle carries decoder tables for every
    ladder level plus the no-SI variant.
    """
    schedule = schedule or AnnealingSchedule()
    ladder = ladder or CorrelationLadder()
    ctx = DesignContext(quantizer, si_quantizer, pair, channels, n_gauss)

    best = None
    for restart in range(schedule.restarts):
        rng = derive_rng(seed, restart)
        hard_ia, hard_d, info = _anneal_once(ctx, schedule, rng)
        if best is None or hard_d < best[1]:
            best = (hard_ia, hard_d, info, restart)
    hard_ia, hard_d, info, best_restart = best

    breakdown = ctx.distortion(hard_ia.table)
    pairs = [
        JointGaussianPair(pair.var_x, pair.var_y, float(r)) for r in ladder.levels
    ]
    tables = build_decoder_tables(quantizer, si_quantizer, hard_ia, pairs, n_gauss)
    metadata = {
        "format_version": 1,
        "seed": int(seed),
        "restarts": int(schedule.restarts),
        "best_restart": int(best_restart),
        "design_rho": float(pair.rho),
        "d_se": float(breakdown.d_se),
        "d_ch": float(breakdown.d_ch),
        "d_av": float(breakdown.d_av),
        "schedule": {
            "t_init": info["t_init"],
            "cooling": schedule.cooling,
            "t_min_ratio": schedule.t_min_ratio,
            "inner_tol": schedule.inner_tol,
            "inner_cap": schedule.inner_cap,
            "entropy_target": schedule.entropy_target,
        },
        "warning_non_converged": bool(info["inner_cap_hits"]),
        **{k: info[k] for k in (
            "soft_d_av", "hardening_gap", "monotonicity_violations",
            "inner_cap_hits", "entropy_increases",
        )},
    }
    return CodecBundle(
        quantizer=quantizer,
        si_quantizer=si_quantizer,
        ia=hard_ia,
        channels=tuple(channels),
        design_rho=float(pair.rho),
        ladder=ladder,
        tables=tables,
        metadata=metadata,
    )
