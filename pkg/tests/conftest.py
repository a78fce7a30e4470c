import math

import hypothesis
import numpy as np
import pytest

from esr_bell.qtheory import singlet_state
from esr_bell.synthesis import FeasibilityProblem, canonical_settings, solve_problem

hypothesis.settings.register_profile("ci", max_examples=200, deadline=None)
hypothesis.settings.register_profile("fast", max_examples=20, deadline=None)
hypothesis.settings.load_profile("ci")

SQRT2 = math.sqrt(2.0)


@pytest.fixture(scope="session")
def singlet():
    return singlet_state()


@pytest.fixture(scope="session")
def canonical():
    return canonical_settings()


@pytest.fixture(scope="session")
def solved():
    """Cache of feasible LP results keyed by uniform eta."""
    cache = {}

    def get(eta):
        if eta not in cache:
            p = FeasibilityProblem.uniform(singlet_state(), canonical_settings(), eta)
            cache[eta] = (p, solve_problem(p))
        return cache[eta]

    return get


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
