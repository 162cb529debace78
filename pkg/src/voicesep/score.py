"""Canonical score model: loading, validation, preprocessing, ground-truth links.

A score is a list of quantized notes plus a measure map, all in integer
ticks relative to a ``divisions`` (ticks per quarter note) value.  Integer
ticks keep onset/offset comparisons exact, which the graph-building rules
rely on.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field, replace

from .errors import (
    MissingVoiceError,
    NotMonophonicError,
    ParseError,
    ValidationError,
)

__all__ = [
    "Note",
    "Measure",
    "Score",
    "GroundTruthLinks",
    "parse_score",
    "parse_score_csv",
    "load_score",
    "serialize_score",
    "preprocess_monophonic",
    "derive_ground_truth_links",
]


@dataclass(frozen=True, order=True)
class Measure:
    """One measure: ``index`` within the piece, onset and duration in ticks."""

    index: int
    onset: int
    duration: int


@dataclass(frozen=True)
class Note:
    """A quantized note.  ``voice`` is optional (absent at inference time)."""

    id: str
    onset: int
    duration: int
    pitch: int
    voice: int | None = None

    @property
    def offset(self) -> int:
        return self.onset + self.duration

    def sort_key(self) -> tuple[int, int, str]:
        return (self.onset, self.pitch, self.id)


@dataclass(frozen=True)
class Score:
    """A validated score.  Notes are kept sorted by (onset, pitch, id)."""

    divisions: int
    measures: tuple[Measure, ...]
    notes: tuple[Note, ...]

    def note_ids(self) -> list[str]:
        return [n.id for n in self.notes]

    def has_voices(self) -> bool:
        return all(n.voice is not None for n in self.notes)

    def measure_index_of(self, onset: int) -> int:
        """Index of the measure containing ``onset``."""
        for m in self.measures:
            if m.onset <= onset < m.onset + m.duration:
                return m.index
        raise ValidationError(f"onset {onset} lies outside the measure map")

    def with_voices(self, voice_of: dict[str, int]) -> "Score":
        """Copy of this score with voice labels replaced by ``voice_of``."""
        notes = tuple(replace(n, voice=voice_of.get(n.id)) for n in self.notes)
        return Score(self.divisions, self.measures, notes)


@dataclass(frozen=True)
class GroundTruthLinks:
    """Ordered pairs (u, v) of note ids that are consecutive in one voice."""

    links: frozenset[tuple[str, str]] = field(default_factory=frozenset)

    def __len__(self) -> int:
        return len(self.links)

    def __contains__(self, pair: tuple[str, str]) -> bool:
        return pair in self.links


def _require(cond: bool, message: str) -> None:
    if not cond:
        raise ValidationError(message)


def _validate_and_build(divisions, measures_raw, notes_raw) -> Score:
    if not isinstance(divisions, int) or isinstance(divisions, bool) or divisions <= 0:
        raise ValidationError(f"divisions must be a positive integer, got {divisions!r}")

    measures = []
    for i, m in enumerate(measures_raw):
        try:
            measure = Measure(index=int(m["index"]), onset=int(m["onset"]), duration=int(m["duration"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise ValidationError(f"measure #{i} is malformed: {exc}") from exc
        _require(measure.index == i, f"measure index {measure.index} at position {i} (must be consecutive from 0)")
        _require(measure.onset >= 0, f"measure {i} onset is negative")
        _require(measure.duration > 0, f"measure {i} duration must be positive")
        measures.append(measure)

    if measures:
        _require(measures[0].onset == 0, "measure 0 onset must be 0")
        for a, b in zip(measures, measures[1:]):
            if a.onset + a.duration != b.onset:
                raise ValidationError(
                    f"measures must tile the timeline: measure {a.index} ends at "
                    f"{a.onset + a.duration} but measure {b.index} starts at {b.onset}"
                )

    notes = []
    seen_ids: set[str] = set()
    for i, n in enumerate(notes_raw):
        try:
            voice_raw = n.get("voice") if isinstance(n, dict) else None
            note = Note(
                id=str(n["id"]),
                onset=int(n["onset"]),
                duration=int(n["duration"]),
                pitch=int(n["pitch"]),
                voice=None if voice_raw is None else int(voice_raw),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ValidationError(f"note #{i} is malformed: {exc}") from exc
        _require(note.id not in seen_ids, f"duplicate note id {note.id!r}")
        seen_ids.add(note.id)
        _require(note.onset >= 0, f"note {note.id}: onset is negative")
        _require(note.duration >= 1, f"note {note.id}: duration must be >= 1 tick")
        _require(0 <= note.pitch <= 127, f"note {note.id}: pitch {note.pitch} outside [0, 127]")
        _require(note.voice is None or note.voice >= 0, f"note {note.id}: voice must be nonnegative")
        notes.append(note)

    end = measures[-1].onset + measures[-1].duration if measures else 0
    for note in notes:
        _require(
            note.onset < end,
            f"note {note.id}: onset {note.onset} lies outside the measure map (piece ends at {end})",
        )

    notes.sort(key=Note.sort_key)
    return Score(divisions=divisions, measures=tuple(measures), notes=tuple(notes))


def parse_score(raw: bytes | str) -> Score:
    """Parse a canonical score file (UTF-8 JSON) and validate all invariants.

    Raises
    ------
    ParseError
        If the input is not well-formed JSON.
    ValidationError
        If a score invariant is violated; the message names the field.
    """
    if isinstance(raw, bytes):
        raw = raw.decode("utf-8")
    try:
        doc = json.loads(raw)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ParseError(f"not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ParseError("top-level JSON value must be an object")
    for key in ("divisions", "measures", "notes"):
        if key not in doc:
            raise ValidationError(f"missing required key {key!r}")
    return _validate_and_build(doc["divisions"], doc["measures"], doc["notes"])


def parse_score_csv(notes_csv: bytes | str, measures_csv: bytes | str, divisions: int) -> Score:
    """Parse the CSV form: a note table plus a sidecar measure table.

    The note table has header ``id,onset,duration,pitch,voice`` (empty voice
    cell means unlabeled); the sidecar has ``index,onset,duration``.
    """
    def rows(raw: bytes | str) -> list[dict]:
        if isinstance(raw, bytes):
            raw = raw.decode("utf-8")
        try:
            return list(csv.DictReader(io.StringIO(raw)))
        except csv.Error as exc:
            raise ParseError(f"not valid CSV: {exc}") from exc

    notes_raw = []
    for r in rows(notes_csv):
        if r.get("id") is None:
            raise ParseError("note CSV must have header id,onset,duration,pitch,voice")
        voice = r.get("voice")
        notes_raw.append(
            {
                "id": r["id"],
                "onset": r["onset"],
                "duration": r["duration"],
                "pitch": r["pitch"],
                "voice": None if voice in (None, "") else voice,
            }
        )
    measures_raw = rows(measures_csv)
    return _validate_and_build(int(divisions), measures_raw, notes_raw)


def load_score(path) -> Score:
    """Load a score from a ``.json`` file or a ``.csv`` + ``.measures.csv`` pair.

    For CSV input, ``divisions`` is read from the first line of the sidecar
    if it carries a ``# divisions=N`` comment, else defaults to 4.
    """
    from pathlib import Path

    path = Path(path)
    if path.suffix == ".json":
        return parse_score(path.read_bytes())
    if path.suffix == ".csv":
        sidecar = path.with_suffix(".measures.csv")
        if not sidecar.exists():
            raise ParseError(f"CSV score {path} needs a sidecar measure file {sidecar}")
        text = sidecar.read_text(encoding="utf-8")
        divisions = 4
        if text.startswith("#"):
            first, _, rest = text.partition("\n")
            if "divisions=" in first:
                divisions = int(first.split("divisions=")[1].strip())
            text = rest
        return parse_score_csv(path.read_bytes(), text, divisions)
    raise ParseError(f"unsupported score file type: {path.suffix!r}")


def serialize_score(score: Score) -> bytes:
    """Serialize to canonical JSON bytes (stable key order, sorted notes).

    ``parse_score(serialize_score(s)) == s`` for every valid score, and the
    bytes are reproducible, so normalized files round-trip byte-identically.
    """
    doc = {
        "divisions": score.divisions,
        "measures": [{"index": m.index, "onset": m.onset, "duration": m.duration} for m in score.measures],
        "notes": [
            {"id": n.id, "onset": n.onset, "duration": n.duration, "pitch": n.pitch, "voice": n.voice}
            for n in score.notes
        ],
    }
    return (json.dumps(doc, indent=1, sort_keys=False) + "\n").encode("utf-8")


def preprocess_monophonic(score: Score, truncate_overlaps: bool = True) -> tuple[Score, list[str]]:
    """Enforce monophonic voices.

    Within each voice, among notes sharing an onset only the highest pitch
    survives (ties: longest duration, then smallest id).  With
    ``truncate_overlaps`` (the default), a note that overlaps the next note
    of its own voice is shortened to end at that note's onset, so that
    consecutive same-voice pairs remain predictable candidates.

    Returns the preprocessed score and the ids of removed notes.
    """
    for n in score.notes:
        if n.voice is None:
            raise MissingVoiceError(f"note {n.id} has no voice label")

    by_voice: dict[int, list[Note]] = {}
    for n in score.notes:
        by_voice.setdefault(n.voice, []).append(n)

    removed: list[str] = []
    kept: list[Note] = []
    for voice in sorted(by_voice):
        groups: dict[int, list[Note]] = {}
        for n in by_voice[voice]:
            groups.setdefault(n.onset, []).append(n)
        survivors = []
        for onset in sorted(groups):
            group = sorted(groups[onset], key=lambda n: (-n.pitch, -n.duration, n.id))
            survivors.append(group[0])
            removed.extend(n.id for n in group[1:])
        if truncate_overlaps:
            for i in range(len(survivors) - 1):
                a, b = survivors[i], survivors[i + 1]
                if a.offset > b.onset:
                    survivors[i] = replace(a, duration=b.onset - a.onset)
        kept.extend(survivors)

    kept.sort(key=Note.sort_key)
    removed.sort()
    return Score(score.divisions, score.measures, tuple(kept)), removed


def derive_ground_truth_links(score: Score) -> GroundTruthLinks:
    """Pairs of consecutive notes in the same voice, for every voice.

    Requires a preprocessed score: two same-voice notes with equal onsets
    raise :class:`NotMonophonicError`.
    """
    by_voice: dict[int, list[Note]] = {}
    for n in score.notes:
        if n.voice is None:
            raise MissingVoiceError(f"note {n.id} has no voice label")
        by_voice.setdefault(n.voice, []).append(n)

    links: set[tuple[str, str]] = set()
    for voice, notes in by_voice.items():
        notes = sorted(notes, key=lambda n: n.onset)
        for a, b in zip(notes, notes[1:]):
            if a.onset == b.onset:
                raise NotMonophonicError(
                    f"voice {voice}: notes {a.id} and {b.id} share onset {a.onset}"
                )
            links.add((a.id, b.id))
    return GroundTruthLinks(frozenset(links))
