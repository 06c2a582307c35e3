import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from duetface.color_frequency import read_ppm  # noqa: E402
from duetface.corpus import corpus_images, landmarks_for  # noqa: E402
from duetface.facial_roi import read_landmarks  # noqa: E402


@pytest.fixture(scope="session")
def corpus():
    """(name, image, landmarks) for every bundled portrait."""
    return [(p.stem, read_ppm(p), read_landmarks(landmarks_for(p))) for p in corpus_images()]


@pytest.fixture(scope="session")
def portrait(corpus):
    return corpus[1][1]


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


ACCEPTANCE_LOG: list[tuple[str, str, str]] = []


@pytest.fixture
def record():
    """Log one acceptance line, then assert it."""

    def _record(criterion: str, ok: bool, detail: str = "") -> None:
        status = "PASS" if ok else "FAIL"
        ACCEPTANCE_LOG.append((criterion, status, detail))
        print(f"[{status}] {criterion}: {detail}")
        assert ok, f"{criterion}: {detail}"

    return _record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LOG:
        return
    terminalreporter.section("acceptance criteria")
    for criterion, status, detail in ACCEPTANCE_LOG:
        terminalreporter.write_line(f"[{status}] {criterion}: {detail}")
