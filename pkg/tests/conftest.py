from pathlib import Path

import numpy as np
import pytest

from wrapphase import synth
from wrapphase.model import ModelConfig

REPO = Path(__file__).resolve().parents[1]
ARCTIC = REPO / "data" / "arctic"
SMOKE_CONFIG = REPO / "configs" / "smoke.json"

TINY = ModelConfig(trunk_channels=8, pre_kernel=3, block_kernels=(3, 5),
                   sub_block_dilations=(1, 2), output_kernel=3)


@pytest.fixture
def tiny_config():
    return TINY


@pytest.fixture(scope="session")
def speech():
    return synth.speech_like(7, duration=0.5)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# Acceptance verdicts, one line per criterion, echoed in the terminal summary.
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
