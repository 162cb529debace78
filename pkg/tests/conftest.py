import json

import pytest

from voicesep import parse_score

FOUR_NOTE_DOC = {
    "divisions": 4,
    "measures": [
        {"index": 0, "onset": 0, "duration": 16},
        {"index": 1, "onset": 16, "duration": 16},
    ],
    "notes": [
        {"id": "u", "onset": 0, "duration": 8, "pitch": 60, "voice": 0},
        {"id": "v", "onset": 0, "duration": 4, "pitch": 67, "voice": 1},
        {"id": "w", "onset": 4, "duration": 4, "pitch": 64, "voice": 1},
        {"id": "x", "onset": 12, "duration": 4, "pitch": 62, "voice": 0},
    ],
}


@pytest.fixture
def four_note_score():
    """Two measures, two voices: u,x in voice 0 and v,w in voice 1."""
    return parse_score(json.dumps(FOUR_NOTE_DOC))


@pytest.fixture
def four_note_doc():
    return json.loads(json.dumps(FOUR_NOTE_DOC))
