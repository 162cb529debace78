"""Postprocessing: maximum-weight partial matching over predicted links,
greedy conflict resolution, and voice extraction.

A valid voice structure allows each note at most one outgoing and one
incoming link.  The matching step enforces that globally (leaving a note
unmatched is always feasible via zero-weight dummy assignments); the
greedy resolver is a cheaper local alternative.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import DegreeError
from .model import LinkScores
from .score import Score

__all__ = [
    "AssignmentMask",
    "VoiceAssignment",
    "linear_assignment",
    "apply_mask_and_threshold",
    "resolve_greedy",
    "extract_voices",
]

_FORBIDDEN = -1e9


@dataclass(frozen=True)
class AssignmentMask:
    """Selected candidate pairs; at most one per source and per destination."""

    selected: frozenset[tuple[str, str]]

    def __len__(self) -> int:
        return len(self.selected)


@dataclass(frozen=True)
class VoiceAssignment:
    """Ordered monophonic trajectories partitioning the notes."""

    voices: tuple[tuple[str, ...], ...]

    def voice_of(self) -> dict[str, int]:
        return {nid: v for v, voice in enumerate(self.voices) for nid in voice}

    @property
    def n_voices(self) -> int:
        return len(self.voices)


def linear_assignment(scores: LinkScores) -> AssignmentMask:
    """Maximum-weight selection with <=1 outgoing and <=1 incoming per note.

    Solved exactly as a square assignment problem: each source row and
    destination column gets a private zero-weight dummy partner, so any
    note may stay unmatched; pairs outside the candidate set are forbidden.
    """
    if len(scores) == 0:
        return AssignmentMask(frozenset())
    sources = sorted({u for u, _ in scores.pairs})
    dests = sorted({v for _, v in scores.pairs})
    src_of = {u: i for i, u in enumerate(sources)}
    dst_of = {v: j for j, v in enumerate(dests)}
    n_r, n_c = len(sources), len(dests)

    size = n_r + n_c
    weights = np.full((size, size), _FORBIDDEN)
    for (u, v), p in zip(scores.pairs, scores.probabilities):
        weights[src_of[u], dst_of[v]] = p
    weights[n_r:, n_c:] = 0.0
    for i in range(n_r):
        weights[i, n_c + i] = 0.0  # source i left unmatched
    for j in range(n_c):
        weights[n_r + j, j] = 0.0  # destination j left unmatched

    rows, cols = linear_sum_assignment(weights, maximize=True)
    selected = {
        (sources[i], dests[j])
        for i, j in zip(rows, cols)
        if i < n_r and j < n_c and weights[i, j] > _FORBIDDEN / 2
    }
    return AssignmentMask(frozenset(selected))


def apply_mask_and_threshold(
    scores: LinkScores, mask: AssignmentMask, tau: float = 0.5
) -> set[tuple[str, str]]:
    """Hard predictions: masked pairs whose probability reaches ``tau``."""
    return {
        pair
        for pair, p in zip(scores.pairs, scores.probabilities)
        if pair in mask.selected and p >= tau
    }


def resolve_greedy(scores: LinkScores, tau: float = 0.5) -> set[tuple[str, str]]:
    """Threshold, then resolve conflicts best-score-first.

    Candidates are visited by descending probability (ties: smallest
    source id, then destination id); a pair is kept iff both its source's
    outgoing slot and its destination's incoming slot are still free.
    """
    order = sorted(
        zip(scores.pairs, scores.probabilities), key=lambda item: (-item[1], item[0][0], item[0][1])
    )
    out_taken: set[str] = set()
    in_taken: set[str] = set()
    kept: set[tuple[str, str]] = set()
    for (u, v), p in order:
        if p < tau or u in out_taken or v in in_taken:
            continue
        kept.add((u, v))
        out_taken.add(u)
        in_taken.add(v)
    return kept


def extract_voices(score: Score, links: set[tuple[str, str]]) -> VoiceAssignment:
    """Connect linked notes into voices; isolated notes become singletons.

    Requires every note to have at most one incoming and one outgoing
    link (raises :class:`DegreeError` otherwise); the resulting paths are
    ordered by onset and numbered by first onset.
    """
    note_ids = {n.id for n in score.notes}
    successor: dict[str, str] = {}
    has_incoming: set[str] = set()
    for u, v in links:
        if u not in note_ids or v not in note_ids:
            raise DegreeError(f"link ({u}, {v}) references an unknown note")
        if u in successor:
            raise DegreeError(f"note {u} has more than one outgoing link")
        if v in has_incoming:
            raise DegreeError(f"note {v} has more than one incoming link")
        successor[u] = v
        has_incoming.add(v)

    note_by_id = {n.id: n for n in score.notes}
    paths: list[list[str]] = []
    for note in score.notes:  # canonical order: (onset, pitch, id)
        if note.id in has_incoming:
            continue
        path = [note.id]
        seen = {note.id}
        while path[-1] in successor:
            nxt = successor[path[-1]]
            if nxt in seen:
                raise DegreeError(f"links contain a cycle through note {nxt}")
            path.append(nxt)
            seen.add(nxt)
        paths.append(path)

    if sum(len(p) for p in paths) != len(note_ids):
        raise DegreeError("links contain a cycle (some notes unreachable from any start)")

    paths.sort(key=lambda p: note_by_id[p[0]].sort_key())
    return VoiceAssignment(voices=tuple(tuple(p) for p in paths))
