"""The voice-link network: a heterogeneous residual gated graph encoder
with bi-LSTM layer aggregation, and an MLP link predictor.

Per layer and relation type the encoder computes

    h_[v,r] = W1 h_v + sum_{u -> v} sigmoid(W3 h_v + W4 h_u) * W2 h_u

then averages over relation types, applies ReLU and a residual connection
(the 41-d input is linearly projected at layer 1).  A bi-directional LSTM
reads each node's per-layer embeddings, scores them, and the softmax
weights combine the layers into the final embedding.  Link probabilities
come from an MLP over the concatenated source/destination embeddings, so
scores are directional.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import CheckpointError, ConsistencyError
from .graph import RelationType, ScoreGraph

__all__ = ["ModelConfig", "VoiceLinkModel", "LinkScores", "threshold_links"]

HETEROGENEOUS_RELATIONS = tuple(rel.value for rel in RelationType)
HOMOGENEOUS_RELATIONS = ("all",)


@dataclass(frozen=True)
class ModelConfig:
    n_layers: int = 3
    hidden: int = 128
    jk_hidden: int = 64
    in_features: int = 41
    predictor_layers: int = 3
    heterogeneous: bool = True

    @property
    def relation_keys(self) -> tuple[str, ...]:
        return HETEROGENEOUS_RELATIONS if self.heterogeneous else HOMOGENEOUS_RELATIONS

    def to_dict(self) -> dict:
        return {
            "n_layers": self.n_layers,
            "hidden": self.hidden,
            "jk_hidden": self.jk_hidden,
            "in_features": self.in_features,
            "predictor_layers": self.predictor_layers,
            "heterogeneous": self.heterogeneous,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        return cls(**d)


@dataclass(frozen=True)
class LinkScores:
    """Predicted probability for every candidate pair, in candidate order.

    Pairs outside the candidate set implicitly score 0.
    """

    pairs: tuple[tuple[str, str], ...]
    probabilities: np.ndarray = field(repr=False)

    def __len__(self) -> int:
        return len(self.pairs)

    def as_dict(self) -> dict[tuple[str, str], float]:
        return {pair: float(p) for pair, p in zip(self.pairs, self.probabilities)}


def threshold_links(scores: LinkScores, tau: float = 0.5) -> set[tuple[str, str]]:
    """Hard predictions: candidate pairs whose probability reaches ``tau``."""
    if not 0.0 <= tau <= 1.0:
        raise ValueError(f"tau must lie in [0, 1], got {tau}")
    return {pair for pair, p in zip(scores.pairs, scores.probabilities) if p >= tau}


class VoiceLinkModel:
    """Encoder plus link predictor with a flat, named parameter store."""

    def __init__(self, config: ModelConfig = ModelConfig(), seed: int = 0):
        self.config = config
        self.params: dict[str, Tensor] = {}
        rng = np.random.default_rng(seed)
        c = config

        for layer in range(c.n_layers):
            d_in = c.in_features if layer == 0 else c.hidden
            for rel in c.relation_keys:
                for w in ("w1", "w2", "w3", "w4"):
                    self._add(f"enc.l{layer}.{rel}.{w}", ad.glorot((d_in, c.hidden), rng))
        self._add("enc.res_proj", ad.glorot((c.in_features, c.hidden), rng))

        for direction in ("fw", "bw"):
            self._add(f"jk.{direction}.w_x", ad.glorot((c.hidden, 4 * c.jk_hidden), rng))
            self._add(f"jk.{direction}.w_h", ad.glorot((c.jk_hidden, 4 * c.jk_hidden), rng))
            self._add(f"jk.{direction}.b", Tensor(np.zeros(4 * c.jk_hidden), requires_grad=True))
        self._add("jk.att.w", ad.glorot((2 * c.jk_hidden, 1), rng))
        self._add("jk.att.b", Tensor(np.zeros(1), requires_grad=True))

        dims = [2 * c.hidden] + [c.hidden] * (c.predictor_layers - 1) + [1]
        for i, (a, b) in enumerate(zip(dims, dims[1:])):
            self._add(f"pred.l{i}.w", ad.glorot((a, b), rng))
            self._add(f"pred.l{i}.b", Tensor(np.zeros(b), requires_grad=True))

    def _add(self, name: str, tensor: Tensor) -> None:
        self.params[name] = tensor

    def parameters(self) -> dict[str, Tensor]:
        return self.params

    def n_parameters(self) -> int:
        return sum(p.data.size for p in self.params.values())

    # -- encoder -----------------------------------------------------------

    def _edge_groups(self, graph: ScoreGraph) -> dict[str, np.ndarray]:
        if self.config.heterogeneous:
            return {rel.value: graph.edges[rel] for rel in RelationType}
        stacked = np.concatenate([graph.edges[rel] for rel in RelationType], axis=1)
        if stacked.shape[1]:
            stacked = np.unique(stacked, axis=1)
        return {"all": stacked}

    def encode(self, graph: ScoreGraph, x: np.ndarray | Tensor) -> Tensor:
        """Node embeddings, shape |V| x hidden."""
        return self.encode_arrays(graph.n_nodes, self._edge_groups(graph), x)

    def encode_arrays(
        self, n_nodes: int, edge_groups: dict[str, np.ndarray], x: np.ndarray | Tensor
    ) -> Tensor:
        c = self.config
        if set(edge_groups) != set(c.relation_keys):
            raise ConsistencyError(
                f"edge groups {sorted(edge_groups)} do not match model relations {sorted(c.relation_keys)}"
            )
        h = x if isinstance(x, Tensor) else Tensor(x)
        if h.data.ndim != 2 or h.data.shape != (n_nodes, c.in_features):
            raise ConsistencyError(
                f"feature matrix shape {h.data.shape} does not match ({n_nodes}, {c.in_features})"
            )
        x_in = h
        layer_embeddings: list[Tensor] = []
        for layer in range(c.n_layers):
            acc = None
            for rel in c.relation_keys:
                p = lambda w: self.params[f"enc.l{layer}.{rel}.{w}"]  # noqa: E731
                term = h @ p("w1")
                edges = edge_groups[rel]
                if edges.shape[1]:
                    src, dst = edges[0], edges[1]
                    gate = ad.sigmoid(ad.gather_rows(h @ p("w3"), dst) + ad.gather_rows(h @ p("w4"), src))
                    messages = gate * ad.gather_rows(h @ p("w2"), src)
                    term = term + ad.scatter_sum(messages, dst, n_nodes)
                acc = term if acc is None else acc + term
            mixed = ad.relu(acc * (1.0 / len(c.relation_keys)))
            residual = x_in @ self.params["enc.res_proj"] if layer == 0 else h
            h = mixed + residual
            layer_embeddings.append(h)
        return self._jumping_knowledge(layer_embeddings)

    def _lstm_pass(self, sequence: list[Tensor], direction: str) -> list[Tensor]:
        c = self.config
        n = sequence[0].data.shape[0]
        w_x = self.params[f"jk.{direction}.w_x"]
        w_h = self.params[f"jk.{direction}.w_h"]
        b = self.params[f"jk.{direction}.b"]
        hidden = c.jk_hidden
        h = Tensor(np.zeros((n, hidden)))
        cell = Tensor(np.zeros((n, hidden)))
        outputs = []
        for x_t in sequence:
            z = x_t @ w_x + h @ w_h + b
            gate_i = ad.sigmoid(ad.slice_cols(z, 0, hidden))
            gate_f = ad.sigmoid(ad.slice_cols(z, hidden, 2 * hidden))
            gate_g = ad.tanh(ad.slice_cols(z, 2 * hidden, 3 * hidden))
            gate_o = ad.sigmoid(ad.slice_cols(z, 3 * hidden, 4 * hidden))
            cell = gate_f * cell + gate_i * gate_g
            h = gate_o * ad.tanh(cell)
            outputs.append(h)
        return outputs

    def _jumping_knowledge(self, layer_embeddings: list[Tensor]) -> Tensor:
        forward = self._lstm_pass(layer_embeddings, "fw")
        backward = self._lstm_pass(layer_embeddings[::-1], "bw")[::-1]
        scores = [
            ad.concat([f, bw], axis=1) @ self.params["jk.att.w"] + self.params["jk.att.b"]
            for f, bw in zip(forward, backward)
        ]
        alpha = ad.softmax(ad.concat(scores, axis=1), axis=1)
        combined = None
        for t, h_t in enumerate(layer_embeddings):
            weighted = ad.slice_cols(alpha, t, t + 1) * h_t
            combined = weighted if combined is None else combined + weighted
        return combined

    # -- predictor ---------------------------------------------------------

    def predict_pairs(self, embeddings: Tensor, src: np.ndarray, dst: np.ndarray) -> Tensor:
        """Probability for each (src, dst) index pair, shape (n_pairs,)."""
        c = self.config
        n = embeddings.data.shape[0]
        for idx in (src, dst):
            if len(idx) and (idx.min() < 0 or idx.max() >= n):
                raise ConsistencyError("candidate pair references an unknown node")
        z = ad.concat([ad.gather_rows(embeddings, src), ad.gather_rows(embeddings, dst)], axis=1)
        for i in range(c.predictor_layers):
            z = z @ self.params[f"pred.l{i}.w"] + self.params[f"pred.l{i}.b"]
            if i < c.predictor_layers - 1:
                z = ad.relu(z)
        return ad.reshape(ad.sigmoid(z), (len(src),))

    def candidate_probabilities(self, graph: ScoreGraph, x: np.ndarray) -> Tensor:
        """Differentiable probabilities over the graph's candidate set."""
        embeddings = self.encode(graph, x)
        return self.predict_pairs(embeddings, graph.candidates[0], graph.candidates[1])

    def predict_links(self, graph: ScoreGraph, x: np.ndarray) -> LinkScores:
        """Inference entry point; no gradient graph is recorded."""
        with ad.no_grad():
            probs = self.candidate_probabilities(graph, x)
        return LinkScores(pairs=tuple(graph.candidate_pairs()), probabilities=probs.data)

    # -- persistence -------------------------------------------------------

    def load_state(self, arrays: dict[str, np.ndarray]) -> None:
        missing = set(self.params) - set(arrays)
        extra = set(arrays) - set(self.params)
        if missing or extra:
            raise CheckpointError(f"parameter mismatch: missing {sorted(missing)}, extra {sorted(extra)}")
        for name, arr in arrays.items():
            if self.params[name].data.shape != arr.shape:
                raise CheckpointError(
                    f"parameter {name}: checkpoint shape {arr.shape} != model shape {self.params[name].data.shape}"
                )
            self.params[name].data = arr.astype(np.float64).copy()

    @classmethod
    def from_checkpoint(cls, checkpoint) -> "VoiceLinkModel":
        config = ModelConfig.from_dict(checkpoint.model_config)
        model = cls(config, seed=0)
        model.load_state(checkpoint.params)
        return model
