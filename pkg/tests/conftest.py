import json
import os
import pathlib

import hypothesis
import numpy as np
import pytest
from hypothesis import strategies as st

from engine.schemas import Parameters, State

np.seterr(all="warn")

hypothesis.settings.register_profile("default", deadline=None)
hypothesis.settings.register_profile("fast", max_examples=10, deadline=None)
hypothesis.settings.register_profile("ci", max_examples=500, deadline=None)
hypothesis.settings.load_profile(os.getenv("HYPOTHESIS_PROFILE", "default"))

GOLDEN_PATH = pathlib.Path(__file__).resolve().parents[1] / "cli" / "data" / "golden_configs.json"


def _golden() -> dict:
    with open(GOLDEN_PATH, "r", encoding="utf-8") as f:
        return json.load(f)


GOLDEN = _golden()


def golden_case(name: str) -> tuple[Parameters, State]:
    case = GOLDEN[name]
    return Parameters(**case["parameters"]), State(**case["start"])


@pytest.fixture
def slow_escape() -> tuple[Parameters, State]:
    return golden_case("slow_escape")


@pytest.fixture
def adult_overshoot() -> tuple[Parameters, State]:
    return golden_case("adult_overshoot")


@pytest.fixture
def alternating_start() -> tuple[Parameters, State]:
    return golden_case("alternating_start")


@pytest.fixture
def decline() -> tuple[Parameters, State]:
    return golden_case("decline")


@pytest.fixture
def slow_growth() -> tuple[Parameters, State]:
    """Survival case whose larvae need about a million steps to pass div_threshold."""
    return Parameters(alpha=0.0526, beta=0.8278, mu=0.8129), State(x=1.0, y=1.0)


@pytest.fixture(autouse=True)
def log_dir(tmp_path, monkeypatch):
    monkeypatch.setenv("MOSQDYN_LOG_DIR", str(tmp_path / "logs"))
    monkeypatch.delenv("MOSQDYN_SEED", raising=False)


rates = st.floats(min_value=0.01, max_value=1.0, allow_nan=False)


@st.composite
def reduced_parameters(draw, min_gap: float = 0.01) -> Parameters:
    """Parameters of the reduced map with |beta - mu| > min_gap."""
    alpha = draw(rates)
    mu = draw(rates)
    beta = draw(rates.filter(lambda b: abs(b - mu) > min_gap))
    return Parameters(alpha=alpha, beta=beta, mu=mu)


quadrant_states = st.builds(
    State,
    x=st.floats(min_value=0.0, max_value=1e6, allow_nan=False),
    y=st.floats(min_value=0.0, max_value=1e6, allow_nan=False),
)


def random_reduced(rng: np.random.Generator, count: int, low: float = 0.01, min_gap: float = 0.01):
    """Seeded bulk draws of reduced-map parameters as arrays."""
    alpha = rng.uniform(low, 1.0, count)
    beta = rng.uniform(low, 1.0, count)
    mu = rng.uniform(low, 1.0, count)
    keep = np.abs(beta - mu) > min_gap
    return alpha[keep], beta[keep], mu[keep]
