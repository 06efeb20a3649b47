import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from landmark_stab.geometry import LandmarkSet  # noqa: E402
from landmark_stab.synthetic import synthetic_face, template_landmarks  # noqa: E402

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def face():
    return synthetic_face()


@pytest.fixture(scope="session")
def template():
    return template_landmarks()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_face(rng, jitter=5.0, center=(128.0, 128.0)):
    base = template_landmarks(center).points
    return LandmarkSet(base + rng.normal(0, jitter, base.shape))


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
