import math

import numpy as np
import pytest

from voicesep import (
    alpha_schedule,
    bce_loss,
    build_graph,
    generate_synthetic_score,
    reg_loss,
    subsample_negatives,
    total_loss,
)
from voicesep.autodiff import Tensor, grad_check
from voicesep.errors import ConfigError, ContractError
from voicesep.losses import TrainingBatch, indicator_vectors, reg_loss_dense


def dense_reg(adjacency, zeta, xi):
    """Evaluate reg_loss through the differentiable path from a dense matrix."""
    adjacency = np.asarray(adjacency, dtype=float)
    src, dst = np.nonzero(adjacency >= 0)  # all entries, zeros included
    probs = Tensor(adjacency[src, dst])
    return float(reg_loss(probs, src, dst, np.asarray(zeta, float), np.asarray(xi, float), adjacency.shape[0]).data)


# -- subsampling -------------------------------------------------------------


def test_four_note_batch_uses_everything(four_note_score):
    graph = build_graph(four_note_score)
    batch = subsample_negatives(graph, seed=0, epoch=0)
    assert batch.n_positives == 2
    assert len(batch) == 4  # 2 positives + both negatives


def test_no_positives_gives_empty_batch():
    import json

    from voicesep import parse_score

    doc = {
        "divisions": 4,
        "measures": [{"index": 0, "onset": 0, "duration": 16}],
        "notes": [
            {"id": "a", "onset": 0, "duration": 4, "pitch": 60, "voice": 0},
            {"id": "b", "onset": 8, "duration": 4, "pitch": 72, "voice": 1},
        ],
    }
    graph = build_graph(parse_score(json.dumps(doc)))
    batch = subsample_negatives(graph, seed=0, epoch=0)
    assert batch.n_positives == 0
    assert len(batch) == 0


def test_subsample_deterministic_and_epoch_varying():
    graph = build_graph(generate_synthetic_score(0, 3, 40))
    a = subsample_negatives(graph, seed=5, epoch=3)
    b = subsample_negatives(graph, seed=5, epoch=3)
    assert np.array_equal(a.candidate_idx, b.candidate_idx)
    c = subsample_negatives(graph, seed=5, epoch=4)
    assert not np.array_equal(a.candidate_idx, c.candidate_idx)


def test_negatives_match_positive_count_and_disjoint():
    graph = build_graph(generate_synthetic_score(1, 3, 40))
    batch = subsample_negatives(graph, seed=0, epoch=0)
    labels = batch.labels
    assert labels.sum() * 2 == len(labels)  # pool is large enough here
    assert len(set(batch.candidate_idx.tolist())) == len(batch)


# -- binary cross-entropy ----------------------------------------------------


def test_bce_half_probabilities():
    batch = TrainingBatch(candidate_idx=np.array([0, 1]), labels=np.array([1.0, 0.0]))
    loss = bce_loss(batch, Tensor([0.5, 0.5]))
    assert float(loss.data) == pytest.approx(2 * math.log(2), abs=1e-9)
    assert float(loss.data) == pytest.approx(1.386294, abs=1e-6)


def test_bce_perfect_predictions_near_zero():
    batch = TrainingBatch(candidate_idx=np.array([0, 1]), labels=np.array([1.0, 0.0]))
    loss = bce_loss(batch, Tensor([1.0 - 1e-7, 1e-7]))
    assert 0 <= float(loss.data) <= 1e-6 * 2


def test_bce_clamps_saturated_positive():
    batch = TrainingBatch(candidate_idx=np.array([0]), labels=np.array([1.0]))
    loss = bce_loss(batch, Tensor([0.0]))
    assert float(loss.data) == pytest.approx(-math.log(1e-7), rel=1e-6)  # ~16.12
    assert np.isfinite(loss.data)


def test_bce_nonnegative_random():
    rng = np.random.default_rng(0)
    for _ in range(20):
        n = int(rng.integers(1, 10))
        batch = TrainingBatch(
            candidate_idx=np.arange(n), labels=rng.integers(0, 2, size=n).astype(float)
        )
        loss = bce_loss(batch, Tensor(rng.uniform(0, 1, size=n)))
        assert float(loss.data) >= 0.0


# -- regularization ----------------------------------------------------------


def test_reg_zero_on_perfect_assignment():
    assert dense_reg([[0, 1], [0, 0]], [1, 0], [0, 1]) == 0.0


def test_reg_hand_computed_example():
    assert dense_reg([[0, 0.5], [0, 0]], [1, 0], [0, 1]) == pytest.approx(1.0, abs=1e-12)


def test_reg_zero_on_empty():
    assert dense_reg(np.zeros((3, 3)), np.zeros(3), np.zeros(3)) == 0.0


def test_reg_requires_nodes():
    with pytest.raises(ContractError):
        reg_loss(Tensor(np.zeros(0)), np.zeros(0, int), np.zeros(0, int), np.zeros(0), np.zeros(0), 0)


def test_reg_dense_reference_agrees_with_sparse_path():
    rng = np.random.default_rng(1)
    for _ in range(10):
        n = int(rng.integers(2, 7))
        a = np.triu(rng.uniform(0, 1, size=(n, n)), k=1)
        zeta = rng.integers(0, 2, size=n).astype(float)
        xi = rng.integers(0, 2, size=n).astype(float)
        assert dense_reg(a, zeta, xi) == pytest.approx(reg_loss_dense(a, zeta, xi), abs=1e-12)


def test_reg_zero_iff_indicator_match_on_binary_matrices():
    rng = np.random.default_rng(2)
    for _ in range(50):
        n = int(rng.integers(2, 8))
        a = (rng.uniform(size=(n, n)) < 0.3).astype(float)
        zeta = rng.integers(0, 2, size=n).astype(float)
        xi = rng.integers(0, 2, size=n).astype(float)
        value = reg_loss_dense(a, zeta, xi)
        matches = np.array_equal(a.sum(axis=1), zeta) and np.array_equal(a.sum(axis=0), xi)
        assert (value == 0.0) == matches


def test_reg_invariant_under_simultaneous_permutation():
    rng = np.random.default_rng(3)
    n = 6
    a = rng.uniform(0, 1, size=(n, n))
    zeta = rng.integers(0, 2, size=n).astype(float)
    xi = rng.integers(0, 2, size=n).astype(float)
    perm = rng.permutation(n)
    assert reg_loss_dense(a, zeta, xi) == pytest.approx(
        reg_loss_dense(a[np.ix_(perm, perm)], zeta[perm], xi[perm]), abs=1e-12
    )


def test_reg_gradient_matches_fd():
    rng = np.random.default_rng(4)
    n = 5
    src, dst = np.nonzero(np.triu(np.ones((n, n)), k=1))
    probs = Tensor(rng.uniform(0.05, 0.95, size=len(src)), requires_grad=True)
    zeta = rng.integers(0, 2, size=n).astype(float)
    xi = rng.integers(0, 2, size=n).astype(float)
    report = grad_check(lambda: reg_loss(probs, src, dst, zeta, xi, n), {"probs": probs})
    assert report.max_rel_error < 1e-4


def test_indicator_vectors_four_note(four_note_score):
    graph = build_graph(four_note_score)
    zeta, xi = indicator_vectors(graph)
    ids = list(graph.node_ids)
    assert zeta.tolist() == [1.0 if i in ("u", "v") else 0.0 for i in ids]
    assert xi.tolist() == [1.0 if i in ("w", "x") else 0.0 for i in ids]
    assert zeta.sum() == xi.sum() == 2


# -- schedule and total ------------------------------------------------------


def test_alpha_schedule_values():
    assert alpha_schedule(0) == 0.0
    assert alpha_schedule(25) == pytest.approx(0.5)
    assert alpha_schedule(50) == 1.0
    assert alpha_schedule(90) == 1.0


def test_alpha_schedule_rejects_negative_ramp():
    with pytest.raises(ConfigError):
        alpha_schedule(1, ramp_per_epoch=-0.1)
    with pytest.raises(ConfigError):
        alpha_schedule(-1)


def test_total_loss_composition():
    clf = Tensor(1.0)
    reg = Tensor(0.5)
    assert float(total_loss(clf, reg, 0.0).data) == 1.0
    assert float(total_loss(clf, reg, 0.5).data) == pytest.approx(1.25)
    assert float(total_loss(clf, reg, 1.0).data) == pytest.approx(1.5)
