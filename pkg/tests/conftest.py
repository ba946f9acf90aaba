import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from patchblur import GrayImage  # noqa: E402

# filled by test_acceptance.py, printed at the end of the session
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in ACCEPTANCE_LINES:
        terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def noise_image():
    def make(w=64, h=48, seed=0):
        return GrayImage(np.random.default_rng(seed).random((h, w)))
    return make


def const_image(w, h, value=0.5):
    return GrayImage(np.full((h, w), value))
