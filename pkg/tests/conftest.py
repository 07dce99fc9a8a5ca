import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

from cigmatch.data import gen_synthetic  # noqa: E402

RICK_MORTY_TEXT = (
    "Rick and Morty fly away in the ship. "
    "Morty helps Rick with the portal gun. "
    "Rick argues with Summer at dinner. "
    "Summer ignores Rick again. "
    "Morty lands on the candy planet. "
    "The candy planet has sweet rivers for Morty."
)

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def rick_morty_text():
    return RICK_MORTY_TEXT


@pytest.fixture(scope="session")
def synthetic_pairs():
    return gen_synthetic(40, n_topics=3, vocab_size=600, seed=3)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
