import pytest

from voicesep import (
    SyntheticConfig,
    derive_ground_truth_links,
    generate_synthetic_score,
    parse_score,
    serialize_score,
)
from voicesep.errors import ConfigError


def test_single_voice_path():
    score = generate_synthetic_score(1, 1, 5)
    assert len(score.notes) == 5
    assert len(derive_ground_truth_links(score)) == 4


def test_deterministic_output():
    a = serialize_score(generate_synthetic_score(42, 3, 20))
    b = serialize_score(generate_synthetic_score(42, 3, 20))
    assert a == b


def test_different_seeds_differ():
    a = serialize_score(generate_synthetic_score(1, 2, 20))
    b = serialize_score(generate_synthetic_score(2, 2, 20))
    assert a != b


def test_output_is_valid_and_monophonic():
    score = generate_synthetic_score(7, 3, 100)
    assert len(score.notes) == 300
    # parse_score re-runs the full validator
    assert parse_score(serialize_score(score)) == score
    links = derive_ground_truth_links(score)
    indeg, outdeg = {}, {}
    for u, v in links.links:
        outdeg[u] = outdeg.get(u, 0) + 1
        indeg[v] = indeg.get(v, 0) + 1
    assert all(d == 1 for d in outdeg.values())
    assert all(d == 1 for d in indeg.values())


def test_pitches_stay_in_range():
    cfg = SyntheticConfig(pitch_range=(40, 70), max_step=5)
    score = generate_synthetic_score(3, 4, 50, cfg)
    assert all(40 <= n.pitch <= 70 for n in score.notes)


def test_narrow_pitch_range_rejected():
    with pytest.raises(ConfigError, match="narrow"):
        generate_synthetic_score(0, 1, 5, SyntheticConfig(pitch_range=(60, 64), max_step=5))


@pytest.mark.parametrize(
    "kwargs",
    [
        {"durations": ()},
        {"rest_prob": 1.5},
        {"max_step": 0},
        {"rest_durations": (0,)},
    ],
)
def test_bad_config_rejected(kwargs):
    with pytest.raises(ConfigError):
        generate_synthetic_score(0, 2, 5, SyntheticConfig(**kwargs))


def test_bad_counts_rejected():
    with pytest.raises(ConfigError):
        generate_synthetic_score(0, 0, 5)
    with pytest.raises(ConfigError):
        generate_synthetic_score(0, 1, 0)
