import numpy as np
import pytest

from vocsmooth.dataset import make_rng


@pytest.fixture
def rng():
    return make_rng(1234)


def random_image(seed, h, w, c=3):
    return make_rng(seed).uniform(0.0, 1.0, size=(h, w, c))


def pytest_terminal_summary(terminalreporter):
    import sys

    module = sys.modules.get("test_acceptance")
    results = getattr(module, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for n in sorted(results):
            terminalreporter.write_line(results[n])
