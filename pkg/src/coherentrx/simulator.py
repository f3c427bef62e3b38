"""Exact and Monte Carlo evaluation of adaptive displacement receivers.

For an (N, M) tree the conditional distribution of the full outcome path
given each codeword is an exact product of binned-Poisson terms, enumerable
over all M^N paths (at most 729 for the shapes of interest).  Each of the N
rounds receives the equal time slice ``beta / sqrt(N)`` of the codeword
amplitude, so the slice energies sum to the symbol energy.

Exact enumeration is the workhorse; :func:`mc_sample` simulates individual
receiver runs as an independent statistical cross-check.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .constellation import Constellation
from .photonics import (
    IDEAL_DRAW,
    NoiseDraw,
    NoiseModel,
    detected_mean_array,
    detected_mean_jitter,
    outcome_probs,
    sample_draws,
)
from .tree import DecisionTable, DecisionTree

__all__ = [
    "PathDistribution",
    "exact_distribution",
    "averaged_distribution",
    "map_table",
    "error_rate",
    "MCResult",
    "mc_sample",
    "per_draw_table_error",
]

_ROW_SUM_TOL = 1e-10


@dataclass(frozen=True)
class PathDistribution:
    """Conditional outcome-path probabilities, one row per codeword.

    ``probs[y, p]`` is the probability of observing the complete outcome path
    with leaf index ``p`` when codeword ``y`` was sent.  Rows sum to one.
    """

    probs: np.ndarray
    rounds: int
    arity: int
    constellation: Constellation

    def __post_init__(self) -> None:
        probs = np.asarray(self.probs, dtype=np.float64)
        expected = (self.constellation.n_codewords, self.arity**self.rounds)
        if probs.shape != expected:
            raise ValueError(f"expected probs of shape {expected}, got {probs.shape}")
        if np.any(probs < -1e-15) or np.any(probs > 1 + 1e-12):
            raise ValueError("path probabilities must lie in [0, 1]")
        row_sums = probs.sum(axis=1)
        if np.any(np.abs(row_sums - 1.0) > _ROW_SUM_TOL):
            raise ValueError(f"rows must sum to 1, got {row_sums}")
        object.__setattr__(self, "probs", probs)


def _per_round_draws(draw, rounds: int) -> list[NoiseDraw]:
    if isinstance(draw, NoiseDraw):
        return [draw] * rounds
    draws = list(draw)
    if len(draws) != rounds:
        raise ValueError("need one NoiseDraw per round")
    return draws


def exact_distribution(
    tree: DecisionTree,
    c: Constellation,
    nm: NoiseModel,
    draw: NoiseDraw | Sequence[NoiseDraw] = IDEAL_DRAW,
) -> PathDistribution:
    """Exact conditional path distribution for one jitter realization.

    ``draw`` is a single per-run :class:`NoiseDraw` (held fixed across all
    rounds, the default physical regime) or a sequence of N per-round draws.
    """
    slices = c.amplitudes / np.sqrt(tree.rounds)
    draws = _per_round_draws(draw, tree.rounds)
    probs = np.ones((c.n_codewords, 1))
    for level in range(tree.rounds):
        disp = tree.level_nodes(level)
        means = detected_mean_array(slices[:, None], disp[None, :], nm, draws[level])
        q = outcome_probs(means, tree.arity)
        probs = (probs[:, :, None] * q).reshape(c.n_codewords, -1)
    return PathDistribution(probs, tree.rounds, tree.arity, c)


def averaged_distribution(
    tree: DecisionTree,
    c: Constellation,
    nm: NoiseModel,
    batch_size: int,
    seed,
    per_round: bool = False,
) -> PathDistribution:
    """Noise-averaged path distribution over a seeded batch of jitter draws.

    With zero jitter every draw is the ideal one, so the batch collapses to a
    single exact evaluation (bit-identical for any ``batch_size``).  With
    ``per_round=True`` the jitter is redrawn every round instead of once per
    run.
    """
    if batch_size < 1:
        raise ValueError("batch_size must be at least 1")
    if nm.is_deterministic:
        return exact_distribution(tree, c, nm, IDEAL_DRAW)
    n_draws = batch_size * tree.rounds if per_round else batch_size
    flat = sample_draws(nm, n_draws, seed)
    acc = np.zeros((c.n_codewords, tree.arity**tree.rounds))
    for b in range(batch_size):
        if per_round:
            draw = flat[b * tree.rounds : (b + 1) * tree.rounds]
        else:
            draw = flat[b]
        acc += exact_distribution(tree, c, nm, draw).probs
    return PathDistribution(acc / batch_size, tree.rounds, tree.arity, c)


def map_table(d: PathDistribution, priors: np.ndarray | None = None) -> DecisionTable:
    """Maximum-a-posteriori decision table: argmax_y prior_y * P(path | y).

    Ties break toward the lowest label (np.argmax returns the first maximum),
    fixed for determinism across platforms.
    """
    if priors is None:
        priors = d.constellation.priors
    priors = np.asarray(priors, dtype=np.float64)
    if priors.shape != (d.constellation.n_codewords,):
        raise ValueError("priors must match the constellation")
    weighted = priors[:, None] * d.probs
    return DecisionTable(d.rounds, d.arity, np.argmax(weighted, axis=0))


def error_rate(
    d: PathDistribution,
    table: DecisionTable,
    priors: np.ndarray | None = None,
) -> float:
    """Average error probability of a fixed decision table on a distribution.

    Equals ``1 - sum_path prior_guess(path) * P(path | guess(path))``; with
    the MAP table this is the Bayes-optimal error for the distribution.
    """
    if priors is None:
        priors = d.constellation.priors
    priors = np.asarray(priors, dtype=np.float64)
    if (table.rounds, table.arity) != (d.rounds, d.arity):
        raise ValueError("table shape does not match the distribution")
    guesses = table.guesses
    p_correct = priors[guesses] * d.probs[guesses, np.arange(guesses.size)]
    return float(1.0 - p_correct.sum())


@dataclass(frozen=True)
class MCResult:
    """Empirical outcome of simulated receiver runs."""

    num_runs: int
    num_errors: int
    path_counts: np.ndarray

    @property
    def error_rate(self) -> float:
        return self.num_errors / self.num_runs

    @property
    def stderr(self) -> float:
        """Binomial standard error of the empirical error rate."""
        p = self.error_rate
        return float(np.sqrt(p * (1.0 - p) / self.num_runs))


def mc_sample(
    tree: DecisionTree,
    table: DecisionTable,
    c: Constellation,
    nm: NoiseModel,
    num_runs: int,
    seed,
    per_round: bool = False,
) -> MCResult:
    """Simulate individual receiver runs; deterministic for a fixed seed.

    Each run samples a codeword from the priors, one jitter draw (or one per
    round when ``per_round``), and a Poisson photon count per round, then
    scores the table's guess.  Returns the empirical error count and the
    histogram of observed outcome paths.
    """
    if num_runs < 1:
        raise ValueError("num_runs must be at least 1")
    rng = np.random.default_rng(seed)
    y = rng.choice(c.n_codewords, size=num_runs, p=c.priors)
    slices = c.amplitudes[y] / np.sqrt(tree.rounds)

    def draw_jitter() -> tuple[np.ndarray, np.ndarray]:
        phase = (
            rng.normal(0.0, nm.phase_jitter, num_runs)
            if nm.phase_jitter > 0
            else np.zeros(num_runs)
        )
        scale = np.ones(num_runs)
        if nm.amplitude_jitter > 0:
            scale = rng.normal(1.0, nm.amplitude_jitter, num_runs)
            bad = scale <= 0
            while np.any(bad):
                scale[bad] = rng.normal(1.0, nm.amplitude_jitter, int(bad.sum()))
                bad = scale <= 0
        return phase, scale

    if not per_round:
        phase, scale = draw_jitter()
    leaf = np.zeros(num_runs, dtype=np.int64)
    for level in range(tree.rounds):
        if per_round:
            phase, scale = draw_jitter()
        disp = tree.level_nodes(level)[leaf]
        means = detected_mean_jitter(slices, disp, nm, phase, scale)
        k = np.minimum(rng.poisson(means), tree.arity - 1)
        leaf = leaf * tree.arity + k
    guesses = table.guesses[leaf]
    errors = int(np.count_nonzero(guesses != y))
    counts = np.bincount(leaf, minlength=tree.arity**tree.rounds)
    return MCResult(num_runs, errors, counts)


def per_draw_table_error(
    tree: DecisionTree,
    c: Constellation,
    nm: NoiseModel,
    batch_size: int,
    seed,
) -> float:
    """Diagnostic: mean Bayes error when a fresh MAP table is fit per draw.

    The deployable receiver uses a single table derived from the averaged
    distribution; this quantity instead averages the per-draw optimum, a
    lower bound that would require knowing each run's jitter.
    """
    if nm.is_deterministic:
        d = exact_distribution(tree, c, nm, IDEAL_DRAW)
        return error_rate(d, map_table(d))
    draws = sample_draws(nm, batch_size, seed)
    errs = []
    for draw in draws:
        d = exact_distribution(tree, c, nm, draw)
        errs.append(error_rate(d, map_table(d)))
    return float(np.mean(errs))
