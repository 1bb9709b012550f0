import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

sys.path.insert(0, str(Path(__file__).parent))

from cournot_climate.model import EconomyParams, Environment, FirmBelief  # noqa: E402

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

# one line per acceptance criterion, shown after the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def base():
    """Economy used throughout the worked examples (z = 8)."""
    return EconomyParams(A=10.0, b=1.0, c=1.0, d=1.0)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def beliefs_from_a(params, a_values):
    return [FirmBelief.from_a(float(a), params) for a in a_values]


positive = st.floats(min_value=0.05, max_value=20.0, allow_nan=False)


@st.composite
def economies(draw, allow_K_ex=True):
    A = draw(st.floats(min_value=1.0, max_value=20.0))
    c = draw(st.floats(min_value=0.05, max_value=1.5)) * A
    d = draw(st.floats(min_value=0.02, max_value=1.0)) * A
    b = draw(st.floats(min_value=0.1, max_value=5.0))
    K_ex = draw(st.floats(min_value=0.0, max_value=A)) if allow_K_ex else 0.0
    return EconomyParams(A=A, b=b, c=c, d=d, K_ex=K_ex)


@st.composite
def instances(draw, max_n=6, allow_K_ex=True):
    params = draw(economies(allow_K_ex=allow_K_ex))
    n = draw(st.integers(min_value=1, max_value=max_n))
    alphas = draw(st.lists(st.one_of(st.just(0.0), st.floats(min_value=1e-3, max_value=50.0)), min_size=n, max_size=n))
    return params, [FirmBelief(a) for a in alphas]


@st.composite
def environments(draw, params):
    Qm = draw(st.floats(min_value=0.0, max_value=params.A))
    Km = draw(st.floats(min_value=0.0, max_value=2 * params.A))
    return Environment(Qm, Km)
