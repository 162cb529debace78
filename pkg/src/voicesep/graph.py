"""Typed note-graph construction and the candidate link set.

Four base relations connect note pairs by their exact tick arithmetic:
simultaneous starts, one note starting while another sounds, one starting
exactly at another's offset, and the first onset after a sounding gap.
Base edges always point forward in time; each gets a reverse edge of the
matching inverse type so message passing also sees future context.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import ConfigError, StateError
from .score import GroundTruthLinks, Score

__all__ = [
    "RelationType",
    "ScoreGraph",
    "CoverageReport",
    "build_typed_edges",
    "build_candidate_links",
    "build_graph",
    "coverage_report",
]


class RelationType(Enum):
    ONSET = "onset"
    DURING = "during"
    FOLLOW = "follow"
    SILENCE = "silence"
    DURING_REV = "during_rev"
    FOLLOW_REV = "follow_rev"
    SILENCE_REV = "silence_rev"

    @property
    def inverse(self) -> "RelationType":
        return _INVERSE[self]


_INVERSE = {
    RelationType.ONSET: RelationType.ONSET,
    RelationType.DURING: RelationType.DURING_REV,
    RelationType.FOLLOW: RelationType.FOLLOW_REV,
    RelationType.SILENCE: RelationType.SILENCE_REV,
    RelationType.DURING_REV: RelationType.DURING,
    RelationType.FOLLOW_REV: RelationType.FOLLOW,
    RelationType.SILENCE_REV: RelationType.SILENCE,
}

BASE_RELATIONS = (RelationType.DURING, RelationType.FOLLOW, RelationType.SILENCE)


@dataclass(frozen=True)
class ScoreGraph:
    """Immutable typed graph over a score's notes.

    ``edges`` maps each relation type to a (2, E_r) int array of node
    indices (row 0 = source).  ``candidates`` is the (2, |lambda|) index
    array of prediction-eligible pairs, in canonical order.  Node order
    equals the score's canonical note order.
    """

    node_ids: tuple[str, ...]
    edges: dict[RelationType, np.ndarray]
    candidates: np.ndarray
    targets: GroundTruthLinks | None = None

    @property
    def n_nodes(self) -> int:
        return len(self.node_ids)

    @property
    def n_candidates(self) -> int:
        return self.candidates.shape[1]

    def index_of(self) -> dict[str, int]:
        return {nid: i for i, nid in enumerate(self.node_ids)}

    def typed_edge_triples(self) -> set[tuple[str, RelationType, str]]:
        """Edge set as (src_id, relation, dst_id) triples (for tests/export)."""
        out = set()
        for rel, arr in self.edges.items():
            for s, d in arr.T:
                out.add((self.node_ids[s], rel, self.node_ids[d]))
        return out

    def candidate_pairs(self) -> list[tuple[str, str]]:
        return [(self.node_ids[s], self.node_ids[d]) for s, d in self.candidates.T]

    def target_index_pairs(self) -> np.ndarray:
        """(2, T) index array of ground-truth links; requires targets."""
        if self.targets is None:
            raise StateError("graph has no ground-truth targets")
        idx = self.index_of()
        pairs = sorted(self.targets.links)
        if not pairs:
            return np.zeros((2, 0), dtype=np.int64)
        return np.array([[idx[u] for u, v in pairs], [idx[v] for u, v in pairs]], dtype=np.int64)


@dataclass(frozen=True)
class CoverageReport:
    n_targets: int
    n_covered: int

    @property
    def fraction(self) -> float:
        return 1.0 if self.n_targets == 0 else self.n_covered / self.n_targets


def _note_arrays(score: Score) -> tuple[np.ndarray, np.ndarray]:
    onsets = np.array([n.onset for n in score.notes], dtype=np.int64)
    offsets = np.array([n.offset for n in score.notes], dtype=np.int64)
    return onsets, offsets


def build_typed_edges(
    score: Score,
    during_inclusive: bool = False,
    silence_last_offset: bool = False,
) -> dict[RelationType, np.ndarray]:
    """Compute the typed edge set as per-relation (2, E_r) index arrays.

    ``during_inclusive`` widens the sounding-overlap rule to include the
    offset-equality case (which then also satisfies the follow rule);
    ``silence_last_offset`` keeps only gap edges whose source has the
    latest offset before the gap.
    """
    n = len(score.notes)
    onsets, offsets = _note_arrays(score)
    edges: dict[RelationType, np.ndarray] = {}

    if n == 0:
        for rel in RelationType:
            edges[rel] = np.zeros((2, 0), dtype=np.int64)
        return edges

    on_u = onsets[:, None]
    on_v = onsets[None, :]
    off_u = offsets[:, None]

    same_onset = on_u == on_v
    np.fill_diagonal(same_onset, False)
    onset_src, onset_dst = np.nonzero(same_onset)
    edges[RelationType.ONSET] = np.stack([onset_src, onset_dst]).astype(np.int64)

    if during_inclusive:
        during = (on_u < on_v) & (on_v <= off_u)
    else:
        during = (on_u < on_v) & (on_v < off_u)
    follow = off_u == on_v

    # Gap rule: source ends before dst starts and no onset falls strictly
    # in between.  Equivalent test: dst onset is the first onset after the
    # source's offset.
    sorted_onsets = np.unique(onsets)
    nxt = np.searchsorted(sorted_onsets, offsets, side="right")
    next_onset_after_offset = np.full(n, np.iinfo(np.int64).max, dtype=np.int64)
    has_next = nxt < len(sorted_onsets)
    next_onset_after_offset[has_next] = sorted_onsets[nxt[has_next]]
    silence = (off_u < on_v) & (on_v == next_onset_after_offset[:, None])

    if silence_last_offset:
        masked = np.where(silence, off_u, np.iinfo(np.int64).min)
        latest = masked.max(axis=0)
        silence &= off_u == latest[None, :]

    for rel, mask in ((RelationType.DURING, during), (RelationType.FOLLOW, follow), (RelationType.SILENCE, silence)):
        src, dst = np.nonzero(mask)
        edges[rel] = np.stack([src, dst]).astype(np.int64)
        edges[rel.inverse] = np.stack([dst, src]).astype(np.int64)

    return edges


def build_candidate_links(score: Score, window_measures: int = 2) -> np.ndarray:
    """Prediction-eligible pairs: non-overlapping in time and at most
    ``window_measures`` measures apart, as a (2, |lambda|) index array
    ordered by (src onset, src id, dst onset, dst id)."""
    if window_measures < 0:
        raise ConfigError(f"window_measures must be >= 0, got {window_measures}")
    n = len(score.notes)
    if n == 0:
        return np.zeros((2, 0), dtype=np.int64)
    onsets, offsets = _note_arrays(score)
    measure_onsets = np.array([m.onset for m in score.measures], dtype=np.int64)
    measure_idx = np.searchsorted(measure_onsets, onsets, side="right") - 1

    eligible = (offsets[:, None] <= onsets[None, :]) & (
        measure_idx[None, :] <= measure_idx[:, None] + window_measures
    )
    src, dst = np.nonzero(eligible)
    if src.size == 0:
        return np.zeros((2, 0), dtype=np.int64)
    ids = np.array([n_.id for n_ in score.notes])
    order = np.lexsort((ids[dst], onsets[dst], ids[src], onsets[src]))
    return np.stack([src[order], dst[order]]).astype(np.int64)


def build_graph(
    score: Score,
    window_measures: int = 2,
    during_inclusive: bool = False,
    silence_last_offset: bool = False,
    with_targets: bool = True,
) -> ScoreGraph:
    """Build the full graph: typed edges, candidate set, optional targets."""
    from .score import derive_ground_truth_links

    edges = build_typed_edges(score, during_inclusive, silence_last_offset)
    candidates = build_candidate_links(score, window_measures)
    targets = None
    if with_targets and score.notes and score.has_voices():
        targets = derive_ground_truth_links(score)
    return ScoreGraph(
        node_ids=tuple(score.note_ids()),
        edges=edges,
        candidates=candidates,
        targets=targets,
    )


def coverage_report(graph: ScoreGraph) -> CoverageReport:
    """How many ground-truth links survive the candidate windowing."""
    if graph.targets is None:
        raise StateError("coverage_report requires ground-truth targets")
    candidate_set = set(map(tuple, graph.candidates.T.tolist()))
    covered = 0
    idx = graph.index_of()
    for u, v in graph.targets.links:
        if (idx[u], idx[v]) in candidate_set:
            covered += 1
    return CoverageReport(n_targets=len(graph.targets), n_covered=covered)


def edge_statistics(graph: ScoreGraph) -> dict:
    """Edge counts per relation plus candidate-set size (CLI report)."""
    stats = {
        "n_nodes": graph.n_nodes,
        "edges": {rel.value: int(graph.edges[rel].shape[1]) for rel in RelationType},
        "n_candidates": graph.n_candidates,
    }
    if graph.targets is not None:
        rep = coverage_report(graph)
        stats["coverage"] = {
            "n_targets": rep.n_targets,
            "n_covered": rep.n_covered,
            "fraction": rep.fraction,
        }
    return stats
