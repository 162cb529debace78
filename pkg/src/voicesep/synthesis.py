"""Deterministic synthetic scores: bounded random-walk voices with rests.

Desk-scale stand-in for a real corpus.  Each voice walks in pitch with
steps drawn from a configurable range, durations drawn from a choice set,
and occasional rests; voices may cross.  Output is monophonic per voice
and satisfies every :class:`~voicesep.score.Score` invariant.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .score import Measure, Note, Score

__all__ = ["SyntheticConfig", "generate_synthetic_score"]


@dataclass(frozen=True)
class SyntheticConfig:
    divisions: int = 4
    beats_per_measure: int = 4
    pitch_range: tuple[int, int] = (36, 84)
    max_step: int = 5                      # random-walk step drawn from [-max_step, max_step]
    durations: tuple[int, ...] = (2, 4, 8)  # ticks
    rest_prob: float = 0.15
    rest_durations: tuple[int, ...] = (2, 4)

    def validate(self) -> None:
        lo, hi = self.pitch_range
        if not (0 <= lo < hi <= 127):
            raise ConfigError(f"pitch_range {self.pitch_range} must satisfy 0 <= lo < hi <= 127")
        if self.max_step < 1:
            raise ConfigError("max_step must be >= 1")
        if hi - lo < 2 * self.max_step:
            raise ConfigError(
                f"pitch range span {hi - lo} is too narrow for step size {self.max_step}"
            )
        if not self.durations or any(d < 1 for d in self.durations):
            raise ConfigError("durations must be a nonempty tuple of positive ticks")
        if not self.rest_durations or any(d < 1 for d in self.rest_durations):
            raise ConfigError("rest_durations must be a nonempty tuple of positive ticks")
        if not 0.0 <= self.rest_prob <= 1.0:
            raise ConfigError(f"rest_prob {self.rest_prob} outside [0, 1]")
        if self.divisions < 1 or self.beats_per_measure < 1:
            raise ConfigError("divisions and beats_per_measure must be positive")


def generate_synthetic_score(
    seed: int,
    n_voices: int,
    n_notes_per_voice: int,
    config: SyntheticConfig = SyntheticConfig(),
) -> Score:
    """Generate a labeled synthetic score; identical inputs give identical output."""
    if n_voices < 1:
        raise ConfigError("n_voices must be >= 1")
    if n_notes_per_voice < 1:
        raise ConfigError("n_notes_per_voice must be >= 1")
    config.validate()

    rng = np.random.default_rng(seed)
    lo, hi = config.pitch_range
    # Spread voice registers top-down so crossings happen but are not constant.
    if n_voices == 1:
        centers = [int((lo + hi) / 2)]
    else:
        centers = [int(round(hi - i * (hi - lo) / (n_voices - 1) * 0.8 - (hi - lo) * 0.1)) for i in range(n_voices)]

    notes: list[Note] = []
    max_offset = 0
    for voice in range(n_voices):
        pitch = int(np.clip(centers[voice] + rng.integers(-2, 3), lo, hi))
        onset = 0
        for k in range(n_notes_per_voice):
            duration = int(rng.choice(config.durations))
            notes.append(Note(id=f"v{voice}n{k}", onset=onset, duration=duration, pitch=pitch, voice=voice))
            max_offset = max(max_offset, onset + duration)
            onset += duration
            if rng.random() < config.rest_prob:
                onset += int(rng.choice(config.rest_durations))
            step = int(rng.integers(-config.max_step, config.max_step + 1))
            pitch = pitch + step
            if pitch > hi:
                pitch = 2 * hi - pitch
            elif pitch < lo:
                pitch = 2 * lo - pitch

    measure_ticks = config.divisions * config.beats_per_measure
    n_measures = max(1, -(-max_offset // measure_ticks))
    measures = tuple(
        Measure(index=i, onset=i * measure_ticks, duration=measure_ticks) for i in range(n_measures)
    )
    notes.sort(key=Note.sort_key)
    return Score(divisions=config.divisions, measures=measures, notes=tuple(notes))
