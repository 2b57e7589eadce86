from __future__ import annotations

import numpy as np
import pytest
from hypothesis import settings

from tlsmit.engine import default_layers
from tlsmit.model import GeneratorSet, floor_model

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


@pytest.fixture(scope="session")
def gs6() -> GeneratorSet:
    return GeneratorSet.chain(6)


@pytest.fixture(scope="session")
def layers6():
    return default_layers(6)


@pytest.fixture(scope="session")
def floors6(gs6):
    return {
        "L1": floor_model(gs6, [(0, 1), (2, 3), (4, 5)], 4e-4, 5e-5),
        "L2": floor_model(gs6, [(1, 2), (3, 4)], 4e-4, 5e-5),
    }


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
