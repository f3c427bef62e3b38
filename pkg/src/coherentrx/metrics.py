"""Receiver diagnostics: posterior evolution, prefix KL divergence, bits/photon.

The posterior trajectory shows how the codeword belief sharpens round by
round along a measurement record; the pairwise prefix KL divergence
quantifies how separable two codewords' measurement statistics have become
after ``n`` rounds (non-decreasing in ``n`` by the chain rule); bits per
received photon is the binary-channel information rate normalized by the
symbol energy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .constellation import Constellation
from .photonics import IDEAL_DRAW, NoiseDraw, NoiseModel, detected_mean_array, outcome_probs
from .simulator import PathDistribution, exact_distribution
from .tree import DecisionTree, decode_leaf_index

__all__ = [
    "PosteriorTrajectory",
    "posterior_trajectory",
    "most_probable_path",
    "expected_posterior_trajectory",
    "prefix_marginal",
    "prefix_kl",
    "bits_per_photon",
]


@dataclass(frozen=True)
class PosteriorTrajectory:
    """Posterior over codewords after each round along one outcome path.

    ``posteriors[j]`` is the belief after round ``j``; row 0 is the prior.
    """

    posteriors: np.ndarray
    path: tuple[int, ...]

    def __post_init__(self) -> None:
        sums = self.posteriors.sum(axis=1)
        if np.any(np.abs(sums - 1.0) > 1e-10):
            raise ValueError("posterior rows must sum to 1")


def posterior_trajectory(
    tree: DecisionTree,
    c: Constellation,
    nm: NoiseModel,
    path: Sequence[int],
    draw: NoiseDraw = IDEAL_DRAW,
) -> PosteriorTrajectory:
    """Bayesian belief after each round of a complete measurement record.

    Raises ValueError when the record has zero probability under every
    hypothesis (the conditional is undefined there).
    """
    path = tuple(int(k) for k in path)
    if len(path) != tree.rounds:
        raise ValueError("path must cover all rounds")
    slices = c.amplitudes / math.sqrt(tree.rounds)
    likelihood = np.ones(c.n_codewords)
    out = [c.priors.copy()]
    for j, k in enumerate(path):
        u = tree.node(path[:j])
        means = detected_mean_array(slices, u, nm, draw)
        likelihood = likelihood * outcome_probs(means, tree.arity)[:, k]
        joint = c.priors * likelihood
        total = joint.sum()
        if total <= 0.0:
            raise ValueError(f"path {path} has zero probability under every hypothesis")
        out.append(joint / total)
    return PosteriorTrajectory(np.array(out), path)


def most_probable_path(
    tree: DecisionTree,
    c: Constellation,
    nm: NoiseModel,
    label: int,
    draw: NoiseDraw = IDEAL_DRAW,
) -> tuple[int, ...]:
    """Most likely complete outcome path for a given true codeword.

    Ties break toward the lowest leaf index.
    """
    d = exact_distribution(tree, c, nm, draw)
    leaf = int(np.argmax(d.probs[label]))
    return decode_leaf_index(tree.arity, tree.rounds, leaf)


def expected_posterior_trajectory(
    tree: DecisionTree,
    c: Constellation,
    nm: NoiseModel,
    label: int,
    draw: NoiseDraw = IDEAL_DRAW,
) -> np.ndarray:
    """Probability-weighted posterior per round for a given true codeword.

    Row ``j`` averages the round-``j`` posterior over all outcome prefixes,
    weighted by the prefix probability under the true codeword.  Row 0 is
    the prior.
    """
    d = exact_distribution(tree, c, nm, draw)
    k_codes, m, n = c.n_codewords, tree.arity, tree.rounds
    rows = [c.priors.copy()]
    for j in range(1, n + 1):
        marg = d.probs.reshape(k_codes, m**j, m ** (n - j)).sum(axis=2)
        joint = c.priors[:, None] * marg
        total = joint.sum(axis=0)
        post = np.where(total > 0, joint / np.where(total > 0, total, 1.0), 0.0)
        rows.append(post @ marg[label])
    return np.array(rows)


def prefix_marginal(d: PathDistribution, label: int, round_n: int) -> np.ndarray:
    """Distribution of the first ``round_n`` outcomes given a codeword."""
    if not 0 <= round_n <= d.rounds:
        raise ValueError("round_n must lie in [0, rounds]")
    if not 0 <= label < d.constellation.n_codewords:
        raise ValueError("invalid codeword label")
    if round_n == 0:
        # the empty prefix is a point mass regardless of row rounding
        return np.ones(1)
    row = d.probs[label]
    return row.reshape(d.arity**round_n, -1).sum(axis=1)


def prefix_kl(d: PathDistribution, p: int, q: int, round_n: int) -> float:
    """KL divergence (nats) between two codewords' length-n prefix statistics.

    Conventions: terms with ``p_i = 0`` contribute nothing; a prefix with
    ``p_i > 0`` but ``q_i = 0`` makes the divergence infinite.
    """
    mp = prefix_marginal(d, p, round_n)
    mq = prefix_marginal(d, q, round_n)
    support = mp > 0
    if np.any(mq[support] == 0):
        return math.inf
    return float(np.sum(mp[support] * np.log(mp[support] / mq[support])))


def bits_per_photon(ber: float, mean_photons: float) -> float:
    """Binary-channel information per received photon: (1 - H2(ber)) / nbar."""
    if not 0.0 <= ber <= 0.5:
        raise ValueError("ber must lie in [0, 1/2]")
    if mean_photons <= 0:
        raise ValueError("mean_photons must be positive")
    h2 = 0.0
    for x in (ber, 1.0 - ber):
        if x > 0:
            h2 -= x * math.log2(x)
    return (1.0 - h2) / mean_photons
