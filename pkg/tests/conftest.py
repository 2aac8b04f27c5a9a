import sys

import numpy as np
import pytest

from magmech import config
from magmech.params import default_params


@pytest.fixture
def params():
    return default_params()


@pytest.fixture
def bistable():
    return config.load(config.data_path("bistable.conf"))


@pytest.fixture
def rng():
    return np.random.default_rng(0)


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    results = getattr(module, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for n in sorted(results):
            terminalreporter.write_line(results[n])
