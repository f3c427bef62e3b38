"""The adaptive learning loop that designs a receiver for a noise model.

Each iteration alternates two provably non-increasing moves on a freshly
sampled noise batch:

1. decision-table inference: the table is refit by maximum a posteriori on
   the batch-averaged path distribution (Bayes-optimal, never worse);
2. one gradient-descent step on the per-node displacements with backtracking
   line search, accepted only if the loss (same batch, same table) does not
   increase.

The loss is the averaged-distribution error rate with the table held fixed,
which is smooth in the node parameters: every path probability is a product
of binned-Poisson terms whose means are quadratic in the displacements.  The
gradient is therefore computed exactly by a forward/backward sweep over the
tree rather than by finite differences.

Initialization starts from the conditional-nulling design plus a small
relative Gaussian perturbation, which lands the search near a known-good
receiver.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .baselines import cn_tree, dolinar_tree
from .constellation import Constellation, mean_energy
from .photonics import (
    IDEAL_DRAW,
    NoiseDraw,
    NoiseModel,
    detected_mean_jitter,
    outcome_prob_derivs,
    sample_draws,
)
from .simulator import (
    PathDistribution,
    averaged_distribution,
    error_rate,
    exact_distribution,
    map_table,
)
from .tree import DecisionTable, DecisionTree, level_offset, num_nodes

__all__ = [
    "FormulatorConfig",
    "LearningTrace",
    "FormulateResult",
    "init_tree",
    "loss",
    "gradient",
    "formulate",
    "optimize_receiver",
    "optimize_sweep",
]


@dataclass(frozen=True)
class FormulatorConfig:
    """Hyperparameters of one learning run."""

    max_iterations: int = 300
    batch_size: int = 16
    learning_rate: float = 2.0
    convergence_window: int = 20
    convergence_delta: float = 1e-6
    init_perturbation: float = 0.01
    seed: int = 0
    max_backtracks: int = 40
    holdout_factor: int = 10

    def __post_init__(self) -> None:
        if self.max_iterations < 1 or self.batch_size < 1:
            raise ValueError("max_iterations and batch_size must be positive")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.convergence_window < 2:
            raise ValueError("convergence_window must be at least 2")
        if self.convergence_delta <= 0:
            raise ValueError("convergence_delta must be positive")
        if self.init_perturbation < 0:
            raise ValueError("init_perturbation must be non-negative")
        if self.max_backtracks < 1 or self.holdout_factor < 1:
            raise ValueError("max_backtracks and holdout_factor must be positive")


@dataclass(frozen=True)
class LearningTrace:
    """Per-iteration history of one learning run.

    ``loss_start`` is the batch loss before this iteration's updates (with
    the previous table), ``loss_post_table`` after the table refit, ``loss``
    after the accepted descent step; all three refer to the same frozen
    batch, so ``loss <= loss_post_table <= loss_start`` up to rounding.
    """

    iteration: np.ndarray
    loss: np.ndarray
    gradient_norm: np.ndarray
    loss_start: np.ndarray
    loss_post_table: np.ndarray
    converged: bool
    best_iteration: int

    def __post_init__(self) -> None:
        for arr in (self.loss, self.loss_start, self.loss_post_table):
            if np.any(arr < 0) or np.any(arr > 1):
                raise ValueError("losses are error probabilities in [0, 1]")

    def __len__(self) -> int:
        return self.iteration.size


@dataclass
class FormulateResult:
    """Outcome of a learning run: the receiver logic plus diagnostics.

    ``final_loss`` re-evaluates the returned tree/table on a held-out noise
    batch ``holdout_factor`` times the training batch size.
    """

    tree: DecisionTree
    table: DecisionTable
    trace: LearningTrace
    final_loss: float


def init_tree(
    c: Constellation,
    rounds: int,
    arity: int,
    nm: NoiseModel,
    perturbation: float,
    seed,
) -> DecisionTree:
    """Conditional-nulling displacements plus relative Gaussian perturbation.

    The per-component perturbation scale is ``perturbation`` times the node's
    nulling amplitude (falling back to the constellation's RMS slice
    amplitude for zero-amplitude nodes).  The CN design itself is noise-free;
    ``nm`` is part of the design context and recorded by callers.
    """
    del nm
    base = cn_tree(c, rounds, arity)
    if perturbation == 0:
        return base
    rng = np.random.default_rng(seed)
    scale = np.abs(base.nodes)
    fallback = math.sqrt(max(mean_energy(c), 1e-30) / rounds)
    scale = np.where(scale > 0, scale, fallback)
    jitter = rng.standard_normal(base.nodes.size) + 1j * rng.standard_normal(
        base.nodes.size
    )
    return DecisionTree(rounds, arity, base.nodes + perturbation * scale * jitter)


def _draw_batch(nm: NoiseModel, batch_size: int, seed) -> list[NoiseDraw]:
    # Zero jitter makes every draw ideal; collapse so the loss is exactly
    # batch-size invariant.
    if nm.is_deterministic:
        return [IDEAL_DRAW]
    return sample_draws(nm, batch_size, seed)


def _mean_distribution(
    tree: DecisionTree, c: Constellation, nm: NoiseModel, draws: list[NoiseDraw]
) -> PathDistribution:
    acc = np.zeros((c.n_codewords, tree.arity**tree.rounds))
    for draw in draws:
        acc += exact_distribution(tree, c, nm, draw).probs
    return PathDistribution(acc / len(draws), tree.rounds, tree.arity, c)


def loss(
    tree: DecisionTree,
    table: DecisionTable,
    c: Constellation,
    nm: NoiseModel,
    batch_size: int,
    seed,
) -> float:
    """Noise-averaged error of the tree under a fixed decision table."""
    return error_rate(averaged_distribution(tree, c, nm, batch_size, seed), table)


def _gradient_on_draws(
    tree: DecisionTree,
    table: DecisionTable,
    c: Constellation,
    nm: NoiseModel,
    draws: list[NoiseDraw],
) -> np.ndarray:
    """Exact loss gradient, packed as d/d(re) + 1j * d/d(im) per node.

    For each draw the sweep computes forward prefix probabilities F and
    backward suffix sums B of the per-path success weights; a node's
    sensitivity combines them with the binned-Poisson derivative of its
    round and the chain rule through the detected mean, which is quadratic
    in the displacement components.
    """
    n, m = tree.rounds, tree.arity
    k_codes = c.n_codewords
    slices = c.amplitudes / math.sqrt(n)
    labels = np.arange(k_codes)
    # success weight of each (codeword, leaf): prior if the table guesses it
    weights = c.priors[:, None] * (table.guesses[None, :] == labels[:, None])
    gx = np.zeros(num_nodes(n, m))
    gy = np.zeros(num_nodes(n, m))
    for draw in draws:
        a = draw.amplitude_scale
        w = slices * np.exp(-1j * draw.phase_offset)
        q_levels = []
        dq_levels = []
        forward = [np.ones((k_codes, 1))]
        for level in range(n):
            u = tree.level_nodes(level)
            means = detected_mean_jitter(
                slices[:, None], u[None, :], nm, draw.phase_offset, a
            )
            q, dq = outcome_prob_derivs(means, m)
            q_levels.append(q)
            dq_levels.append(dq)
            forward.append((forward[-1][:, :, None] * q).reshape(k_codes, -1))
        backward = weights
        for level in range(n - 1, -1, -1):
            b_next = backward.reshape(k_codes, m**level, m)
            coeff = forward[level] * (dq_levels[level] * b_next).sum(axis=2)
            u = tree.level_nodes(level)
            dn_dx = nm.efficiency * (
                2.0 * a * a * u.real[None, :]
                - 2.0 * nm.visibility * a * w.real[:, None]
            )
            dn_dy = nm.efficiency * (
                2.0 * a * a * u.imag[None, :]
                - 2.0 * nm.visibility * a * w.imag[:, None]
            )
            start = level_offset(m, level)
            stop = start + m**level
            gx[start:stop] += (coeff * dn_dx).sum(axis=0)
            gy[start:stop] += (coeff * dn_dy).sum(axis=0)
            backward = (q_levels[level] * b_next).sum(axis=2)
    return -(gx + 1j * gy) / len(draws)


def gradient(
    tree: DecisionTree,
    table: DecisionTable,
    c: Constellation,
    nm: NoiseModel,
    batch_size: int,
    seed,
) -> np.ndarray:
    """Exact gradient of :func:`loss` in the node displacement components."""
    return _gradient_on_draws(tree, table, c, nm, _draw_batch(nm, batch_size, seed))


def formulate(
    c: Constellation,
    rounds: int,
    arity: int,
    nm: NoiseModel,
    cfg: FormulatorConfig,
    initial_tree: DecisionTree | None = None,
) -> FormulateResult:
    """Run the learning loop and return the best iterate.

    Per iteration: sample a noise batch, refit the table by MAP on the
    batch-averaged distribution, take one backtracked descent step.  Stops
    when the loss improvement over ``convergence_window`` iterations falls
    below ``convergence_delta`` or at ``max_iterations`` (then the trace is
    flagged unconverged rather than raising).  The returned table is refit
    on the held-out batch used for ``final_loss``, matching how the receiver
    would be deployed.  Fully deterministic for a fixed config.
    """
    root = np.random.SeedSequence(cfg.seed)
    init_seq, holdout_seq, iter_root = root.spawn(3)
    if initial_tree is None:
        tree = init_tree(c, rounds, arity, nm, cfg.init_perturbation, init_seq)
    else:
        if (initial_tree.rounds, initial_tree.arity) != (rounds, arity):
            raise ValueError("initial tree shape mismatch")
        tree = initial_tree.copy()
    iter_seqs = iter_root.spawn(cfg.max_iterations)

    table: DecisionTable | None = None
    rows: list[tuple[int, float, float, float, float]] = []
    best_loss = math.inf
    best_tree = tree.copy()
    best_iteration = -1
    converged = False
    for it in range(cfg.max_iterations):
        draws = _draw_batch(nm, cfg.batch_size, iter_seqs[it])
        dist = _mean_distribution(tree, c, nm, draws)
        new_table = map_table(dist)
        loss_start = error_rate(dist, table if table is not None else new_table)
        table = new_table
        loss_post_table = error_rate(dist, table)

        grad = _gradient_on_draws(tree, table, c, nm, draws)
        gnorm = float(np.linalg.norm(grad.view(np.float64)))
        loss_end = loss_post_table
        if gnorm > 0:
            step = cfg.learning_rate
            for _ in range(cfg.max_backtracks):
                cand = DecisionTree(rounds, arity, tree.nodes - step * grad)
                cand_loss = error_rate(_mean_distribution(cand, c, nm, draws), table)
                if cand_loss <= loss_post_table:
                    tree = cand
                    loss_end = cand_loss
                    break
                step *= 0.5
        rows.append((it, loss_end, gnorm, loss_start, loss_post_table))
        if loss_end < best_loss:
            best_loss = loss_end
            best_tree = tree.copy()
            best_iteration = it
        if it >= cfg.convergence_window:
            improvement = rows[it - cfg.convergence_window][1] - loss_end
            if improvement < cfg.convergence_delta:
                converged = True
                break

    arr = np.array(rows)
    trace = LearningTrace(
        iteration=arr[:, 0].astype(np.int64),
        loss=arr[:, 1],
        gradient_norm=arr[:, 2],
        loss_start=arr[:, 3],
        loss_post_table=arr[:, 4],
        converged=converged,
        best_iteration=best_iteration,
    )
    holdout_draws = _draw_batch(nm, cfg.holdout_factor * cfg.batch_size, holdout_seq)
    final_dist = _mean_distribution(best_tree, c, nm, holdout_draws)
    final_table = map_table(final_dist)
    final_loss = error_rate(final_dist, final_table)
    return FormulateResult(best_tree, final_table, trace, final_loss)


def optimize_receiver(
    c: Constellation,
    rounds: int,
    arity: int,
    nm: NoiseModel,
    cfg: FormulatorConfig,
    extra_initial_trees: tuple[DecisionTree, ...] = (),
) -> FormulateResult:
    """Multi-start wrapper: CN-initialized run plus optional extra starts.

    All candidates share the same held-out evaluation batch (same config
    seed), so picking the lowest ``final_loss`` is a fair comparison.
    """
    results = [formulate(c, rounds, arity, nm, cfg)]
    for t in extra_initial_trees:
        results.append(formulate(c, rounds, arity, nm, cfg, initial_tree=t))
    return min(results, key=lambda r: r.final_loss)


def optimize_sweep(
    builder,
    mean_photon_grid,
    rounds: int,
    arity: int,
    nm: NoiseModel,
    cfg: FormulatorConfig,
    dolinar_start: bool = True,
) -> list[tuple[float, FormulateResult]]:
    """Optimize one receiver per sweep point with warm starting.

    ``builder`` maps a mean photon number to a constellation.  Receiver
    strategies can switch discontinuously along the sweep, so each point
    runs the CN-initialized search, optionally a Dolinar-initialized one
    (binary trees only), and a warm start from the neighboring point's
    winner with displacements rescaled by the amplitude ratio; the lowest
    held-out loss wins.
    """
    results: list[tuple[float, FormulateResult]] = []
    prev: tuple[float, DecisionTree] | None = None
    for i, nbar in enumerate(mean_photon_grid):
        c = builder(nbar)
        point_cfg = replace(cfg, seed=cfg.seed + i)
        extras: list[DecisionTree] = []
        if dolinar_start and arity == 2 and c.n_codewords == 2:
            extras.append(dolinar_tree(nbar, rounds))
        if prev is not None:
            prev_nbar, prev_tree = prev
            ratio = math.sqrt(nbar / prev_nbar) if prev_nbar > 0 else 1.0
            extras.append(DecisionTree(rounds, arity, prev_tree.nodes * ratio))
        res = optimize_receiver(c, rounds, arity, nm, point_cfg, tuple(extras))
        results.append((float(nbar), res))
        prev = (float(nbar), res.tree)
    return results
