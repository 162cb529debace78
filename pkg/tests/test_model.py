import numpy as np
import pytest

from voicesep import (
    ModelConfig,
    VoiceLinkModel,
    assemble_features,
    build_graph,
    generate_synthetic_score,
    threshold_links,
)
from voicesep.autodiff import grad_check
from voicesep.checkpoint import load_checkpoint, save_checkpoint
from voicesep.errors import CheckpointError, ConsistencyError
from voicesep.model import LinkScores

RNG = np.random.default_rng(0)


def sigmoid(z):
    return 1.0 / (1.0 + np.exp(-z))


def reference_forward(model, n_nodes, edge_groups, x):
    """Plain-numpy re-implementation of the whole forward pass (oracle)."""
    p = {k: t.data for k, t in model.parameters().items()}
    c = model.config
    h = np.asarray(x, dtype=np.float64)
    x_in = h
    layers = []
    for layer in range(c.n_layers):
        acc = np.zeros((n_nodes, c.hidden))
        for rel in c.relation_keys:
            w1, w2, w3, w4 = (p[f"enc.l{layer}.{rel}.{w}"] for w in ("w1", "w2", "w3", "w4"))
            term = h @ w1
            edges = edge_groups[rel]
            if edges.shape[1]:
                src, dst = edges
                gate = sigmoid((h @ w3)[dst] + (h @ w4)[src])
                np.add.at(term, dst, gate * (h @ w2)[src])
            acc += term
        mixed = np.maximum(acc / len(c.relation_keys), 0.0)
        h = mixed + (x_in @ p["enc.res_proj"] if layer == 0 else h)
        layers.append(h)

    def lstm(sequence, direction):
        hid = c.jk_hidden
        h_t = np.zeros((n_nodes, hid))
        cell = np.zeros((n_nodes, hid))
        outs = []
        for x_t in sequence:
            z = x_t @ p[f"jk.{direction}.w_x"] + h_t @ p[f"jk.{direction}.w_h"] + p[f"jk.{direction}.b"]
            i, f = sigmoid(z[:, :hid]), sigmoid(z[:, hid : 2 * hid])
            g, o = np.tanh(z[:, 2 * hid : 3 * hid]), sigmoid(z[:, 3 * hid :])
            cell = f * cell + i * g
            h_t = o * np.tanh(cell)
            outs.append(h_t)
        return outs

    fw = lstm(layers, "fw")
    bw = lstm(layers[::-1], "bw")[::-1]
    scores = np.concatenate(
        [np.concatenate([f, b], axis=1) @ p["jk.att.w"] + p["jk.att.b"] for f, b in zip(fw, bw)],
        axis=1,
    )
    e = np.exp(scores - scores.max(axis=1, keepdims=True))
    alpha = e / e.sum(axis=1, keepdims=True)
    out = sum(alpha[:, t : t + 1] * layers[t] for t in range(len(layers)))
    return out, alpha, layers


def reference_predict(model, embeddings, src, dst):
    p = {k: t.data for k, t in model.parameters().items()}
    z = np.concatenate([embeddings[src], embeddings[dst]], axis=1)
    for i in range(model.config.predictor_layers):
        z = z @ p[f"pred.l{i}.w"] + p[f"pred.l{i}.b"]
        if i < model.config.predictor_layers - 1:
            z = np.maximum(z, 0.0)
    return sigmoid(z).reshape(-1)


def piece(seed=0, voices=3, notes=8):
    score = generate_synthetic_score(seed, voices, notes)
    graph = build_graph(score)
    return score, graph, assemble_features(score, graph)


def small_config(heterogeneous=True):
    return ModelConfig(hidden=16, jk_hidden=8, heterogeneous=heterogeneous)


def test_encode_matches_numpy_reference():
    score, graph, x = piece(1)
    model = VoiceLinkModel(small_config(), seed=3)
    got = model.encode(graph, x)
    want, _, _ = reference_forward(model, graph.n_nodes, model._edge_groups(graph), x)
    assert np.allclose(got.data, want, atol=1e-12)


def test_homogeneous_encode_matches_numpy_reference():
    score, graph, x = piece(2)
    model = VoiceLinkModel(small_config(heterogeneous=False), seed=4)
    got = model.encode(graph, x)
    want, _, _ = reference_forward(model, graph.n_nodes, model._edge_groups(graph), x)
    assert np.allclose(got.data, want, atol=1e-12)


def test_predict_matches_numpy_reference():
    score, graph, x = piece(3)
    model = VoiceLinkModel(small_config(), seed=5)
    scores = model.predict_links(graph, x)
    h, _, _ = reference_forward(model, graph.n_nodes, model._edge_groups(graph), x)
    want = reference_predict(model, h, graph.candidates[0], graph.candidates[1])
    assert np.allclose(scores.probabilities, want, atol=1e-12)


def test_edgeless_graph_reduces_to_self_terms():
    # Single-note graphs have no edges anywhere: every relation contributes
    # only its W1 self term and the neighbor sums vanish.
    score, graph, x = piece(0, voices=1, notes=1)
    assert all(arr.shape[1] == 0 for arr in graph.edges.values())
    model = VoiceLinkModel(small_config(), seed=6)
    p = {k: t.data for k, t in model.parameters().items()}
    acc = sum(x @ p[f"enc.l0.{rel}.w1"] for rel in model.config.relation_keys)
    layer1 = np.maximum(acc / 7, 0.0) + x @ p["enc.res_proj"]
    _, _, layers = reference_forward(model, 1, model._edge_groups(graph), x)
    assert np.allclose(layers[0], layer1, atol=1e-12)
    assert np.all(np.isfinite(model.encode(graph, x).data))


def test_equal_attention_scores_give_uniform_mixture():
    score, graph, x = piece(4)
    model = VoiceLinkModel(small_config(), seed=7)
    model.params["jk.att.w"].data[:] = 0.0
    model.params["jk.att.b"].data[:] = 0.0
    got = model.encode(graph, x)
    _, alpha, layers = reference_forward(model, graph.n_nodes, model._edge_groups(graph), x)
    assert np.allclose(alpha, 1.0 / 3.0)
    assert np.allclose(got.data, sum(layers) / 3.0, atol=1e-12)


def test_attention_weights_sum_to_one():
    score, graph, x = piece(5)
    model = VoiceLinkModel(small_config(), seed=8)
    _, alpha, _ = reference_forward(model, graph.n_nodes, model._edge_groups(graph), x)
    assert np.allclose(alpha.sum(axis=1), 1.0)


def test_relation_permutation_invariance():
    score, graph, x = piece(6)
    model = VoiceLinkModel(small_config(), seed=9)
    groups = model._edge_groups(graph)
    keys = list(groups)
    permuted_keys = keys[1:] + keys[:1]

    permuted_model = VoiceLinkModel(small_config(), seed=9)
    for layer in range(model.config.n_layers):
        for old, new in zip(keys, permuted_keys):
            for w in ("w1", "w2", "w3", "w4"):
                permuted_model.params[f"enc.l{layer}.{new}.{w}"].data = model.params[
                    f"enc.l{layer}.{old}.{w}"
                ].data.copy()
    permuted_groups = {new: groups[old] for old, new in zip(keys, permuted_keys)}

    a = model.encode_arrays(graph.n_nodes, groups, x)
    b = permuted_model.encode_arrays(graph.n_nodes, permuted_groups, x)
    assert np.allclose(a.data, b.data, atol=1e-12)


def test_node_order_equivariance():
    score, graph, x = piece(7)
    model = VoiceLinkModel(small_config(), seed=10)
    n = graph.n_nodes
    perm = np.random.default_rng(2).permutation(n)
    inverse = np.argsort(perm)
    groups = model._edge_groups(graph)
    permuted_groups = {rel: inverse[arr] for rel, arr in groups.items()}
    base = model.encode_arrays(n, groups, x)
    permuted = model.encode_arrays(n, permuted_groups, x[perm])
    assert np.allclose(permuted.data, base.data[perm], atol=1e-10)


def test_empty_candidate_set():
    score, graph, x = piece(0, voices=2, notes=1)
    assert graph.n_candidates == 0
    model = VoiceLinkModel(small_config(), seed=11)
    scores = model.predict_links(graph, x)
    assert len(scores) == 0
    assert threshold_links(scores, 0.5) == set()


def test_prediction_is_directional():
    model = VoiceLinkModel(small_config(), seed=12)
    h = np.random.default_rng(3).normal(size=(2, 16))
    from voicesep.autodiff import Tensor

    forward = model.predict_pairs(Tensor(h), np.array([0]), np.array([1]))
    backward = model.predict_pairs(Tensor(h), np.array([1]), np.array([0]))
    assert abs(forward.data[0] - backward.data[0]) > 1e-9
    same = model.predict_pairs(Tensor(h), np.array([0]), np.array([0]))
    again = model.predict_pairs(Tensor(h), np.array([0]), np.array([0]))
    assert same.data[0] == again.data[0]


def test_four_note_probabilities(four_note_score):
    graph = build_graph(four_note_score)
    x = assemble_features(four_note_score, graph)
    model = VoiceLinkModel(ModelConfig(), seed=0)
    scores = model.predict_links(graph, x)
    assert len(scores) == 4
    assert set(scores.pairs) == set(graph.candidate_pairs())
    assert all(0.0 < p < 1.0 for p in scores.probabilities)


def test_scores_respect_candidate_restriction():
    score, graph, x = piece(8)
    note = {n.id: n for n in score.notes}
    model = VoiceLinkModel(small_config(), seed=13)
    for u, v in model.predict_links(graph, x).pairs:
        assert note[u].offset <= note[v].onset


def test_unknown_node_in_pairs_rejected():
    model = VoiceLinkModel(small_config(), seed=14)
    from voicesep.autodiff import Tensor

    h = Tensor(np.zeros((3, 16)))
    with pytest.raises(ConsistencyError):
        model.predict_pairs(h, np.array([0]), np.array([7]))


def test_threshold_examples():
    scores = LinkScores(pairs=(("a", "b"), ("b", "c"), ("c", "d")), probabilities=np.array([0.9, 0.4, 0.6]))
    assert threshold_links(scores, 0.5) == {("a", "b"), ("c", "d")}
    low = LinkScores(pairs=(("a", "b"),), probabilities=np.array([0.2]))
    assert threshold_links(low, 0.5) == set()
    assert threshold_links(scores, 0.0) == set(scores.pairs)


def test_homogeneous_has_fewer_parameters():
    hetero = VoiceLinkModel(ModelConfig(), seed=0)
    homo = VoiceLinkModel(ModelConfig(heterogeneous=False), seed=0)
    assert homo.n_parameters() < hetero.n_parameters()
    # exactly 6 fewer weight groups per layer
    per_group = 4
    diff = sum(
        per_group * (41 if layer == 0 else 128) * 128 * 6 for layer in range(3)
    )
    assert hetero.n_parameters() - homo.n_parameters() == diff


def test_model_gradcheck_end_to_end():
    score, graph, x = piece(9, voices=2, notes=5)
    model = VoiceLinkModel(small_config(), seed=15)

    def loss():
        from voicesep import autodiff as ad

        probs = model.candidate_probabilities(graph, x)
        return ad.reduce_sum(ad.square(probs - 0.3))

    report = grad_check(loss, model.parameters(), max_entries_per_param=2,
                        rng=np.random.default_rng(0))
    assert report.max_rel_error < 1e-4


def test_checkpoint_round_trip_preserves_scores(tmp_path):
    score, graph, x = piece(10)
    model = VoiceLinkModel(small_config(), seed=16)
    before = model.predict_links(graph, x).probabilities
    save_checkpoint(tmp_path / "m.ckpt", model.parameters(), model.config.to_dict())
    restored = VoiceLinkModel.from_checkpoint(load_checkpoint(tmp_path / "m.ckpt"))
    after = restored.predict_links(graph, x).probabilities
    assert np.array_equal(before, after)


def test_checkpoint_shape_mismatch_rejected(tmp_path):
    model = VoiceLinkModel(small_config(), seed=17)
    save_checkpoint(tmp_path / "m.ckpt", model.parameters(), ModelConfig().to_dict())
    with pytest.raises(CheckpointError):
        VoiceLinkModel.from_checkpoint(load_checkpoint(tmp_path / "m.ckpt"))
