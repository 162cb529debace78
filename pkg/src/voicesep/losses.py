"""Training losses: subsampled binary cross-entropy, the degree-matching
regularizer, the ramp schedule for its weight, and the total loss.

The regularizer drives the predicted adjacency's row sums toward the
indicator of link sources and its column sums toward the indicator of
link destinations, in both an L1-of-rows and an L2-of-rows sense, so a
perfect prediction is a partial permutation matrix.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import ConfigError, ContractError
from .graph import ScoreGraph

__all__ = [
    "TrainingBatch",
    "subsample_negatives",
    "bce_loss",
    "indicator_vectors",
    "reg_loss",
    "alpha_schedule",
    "total_loss",
]

_PROB_CLAMP = 1e-7


@dataclass(frozen=True)
class TrainingBatch:
    """Candidate indices and 0/1 labels for one optimization step.

    ``candidate_idx`` indexes into the graph's candidate order; positives
    come first, then the equally-sized negative subsample.
    """

    candidate_idx: np.ndarray
    labels: np.ndarray

    @property
    def n_positives(self) -> int:
        return int(self.labels.sum())

    def __len__(self) -> int:
        return len(self.candidate_idx)


def subsample_negatives(graph: ScoreGraph, seed: int, epoch: int) -> TrainingBatch:
    """All covered true links plus an equal-size uniform sample of false
    candidates, resampled per (seed, epoch) without replacement."""
    target_pairs = set(map(tuple, graph.target_index_pairs().T.tolist()))
    is_positive = np.array(
        [tuple(pair) in target_pairs for pair in graph.candidates.T.tolist()], dtype=bool
    )
    positives = np.nonzero(is_positive)[0]
    pool = np.nonzero(~is_positive)[0]
    n_neg = min(len(positives), len(pool))
    rng = np.random.default_rng([seed, epoch])
    negatives = np.sort(rng.choice(pool, size=n_neg, replace=False)) if n_neg else pool[:0]
    idx = np.concatenate([positives, negatives])
    labels = np.concatenate([np.ones(len(positives)), np.zeros(len(negatives))])
    return TrainingBatch(candidate_idx=idx.astype(np.int64), labels=labels)


def bce_loss(batch: TrainingBatch, probabilities: Tensor) -> Tensor:
    """Summed binary cross-entropy over the batch pairs.

    Probabilities are clamped to [1e-7, 1 - 1e-7] before the logs, so the
    loss stays finite for saturated predictions.
    """
    if len(batch) == 0:
        return Tensor(0.0)
    p = ad.clip(ad.gather_rows(probabilities, batch.candidate_idx), _PROB_CLAMP, 1.0 - _PROB_CLAMP)
    y = batch.labels
    terms = y * ad.log(p) + (1.0 - y) * ad.log(1.0 - p)
    return -ad.reduce_sum(terms)


def indicator_vectors(graph: ScoreGraph) -> tuple[np.ndarray, np.ndarray]:
    """0/1 vectors over nodes: sources and destinations of covered links."""
    n = graph.n_nodes
    zeta = np.zeros(n)
    xi = np.zeros(n)
    candidate_set = set(map(tuple, graph.candidates.T.tolist()))
    for s, d in graph.target_index_pairs().T.tolist():
        if (s, d) in candidate_set:
            zeta[s] = 1.0
            xi[d] = 1.0
    return zeta, xi


def reg_loss(
    probabilities: Tensor,
    src: np.ndarray,
    dst: np.ndarray,
    zeta: np.ndarray,
    xi: np.ndarray,
    n_nodes: int,
) -> Tensor:
    """Degree-matching regularizer over the full candidate set.

    With A the implicit weighted adjacency holding ``probabilities`` at
    (src, dst) and zeros elsewhere:

        L1 = ||zeta - rowsums(A)|| + ||xi - colsums(A)||
        L2 = ||zeta - sqrt(rowsums(A^2))|| + ||xi - sqrt(colsums(A^2))||

    and the result is (L1 + L2) / n_nodes.  Zero exactly when the rows and
    columns match the indicators with 0/1 entries.
    """
    if n_nodes == 0:
        raise ContractError("reg_loss needs a nonempty graph")
    row_sums = ad.scatter_sum(probabilities, src, n_nodes)
    col_sums = ad.scatter_sum(probabilities, dst, n_nodes)
    l1 = ad.l2norm(zeta - row_sums) + ad.l2norm(xi - col_sums)
    squared = ad.square(probabilities)
    row_l2 = ad.sqrt(ad.scatter_sum(squared, src, n_nodes))
    col_l2 = ad.sqrt(ad.scatter_sum(squared, dst, n_nodes))
    l2 = ad.l2norm(zeta - row_l2) + ad.l2norm(xi - col_l2)
    return (l1 + l2) * (1.0 / n_nodes)


def reg_loss_dense(adjacency: np.ndarray, zeta: np.ndarray, xi: np.ndarray) -> float:
    """Reference evaluation of the regularizer on a dense matrix (tests,
    reports); same formula as :func:`reg_loss`."""
    n = adjacency.shape[0]
    if n == 0:
        raise ContractError("reg_loss needs a nonempty matrix")
    l1 = np.linalg.norm(zeta - adjacency.sum(axis=1)) + np.linalg.norm(xi - adjacency.sum(axis=0))
    sq = adjacency**2
    l2 = np.linalg.norm(zeta - np.sqrt(sq.sum(axis=1))) + np.linalg.norm(xi - np.sqrt(sq.sum(axis=0)))
    return float((l1 + l2) / n)


def alpha_schedule(epoch: int, ramp_per_epoch: float = 0.02, alpha_max: float = 1.0) -> float:
    """Regularizer weight: 0 at epoch 0, growing linearly to ``alpha_max``."""
    if ramp_per_epoch < 0:
        raise ConfigError(f"ramp_per_epoch must be >= 0, got {ramp_per_epoch}")
    if epoch < 0:
        raise ConfigError(f"epoch must be >= 0, got {epoch}")
    return min(alpha_max, epoch * ramp_per_epoch)


def total_loss(classification: Tensor, regularization: Tensor, alpha: float) -> Tensor:
    return classification + alpha * regularization
