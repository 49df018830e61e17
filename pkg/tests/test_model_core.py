from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import quadrant_states, random_reduced, reduced_parameters
from engine.errors import DomainError, PreconditionError
from engine.model_core import (
    apply_W,
    apply_W0,
    apply_W_arrays,
    continuous_rhs,
    emergence,
    require_valid,
    validate_parameters,
)
from engine.schemas import Parameters, State


def test_validate_reduced_case(slow_escape):
    p, _ = slow_escape
    report = validate_parameters(p, "W0")
    assert report.valid
    assert report.messages == []
    assert p.is_case_W0


def test_validate_rejects_alpha_out_of_box():
    report = validate_parameters(Parameters(alpha=1.5, beta=0.5, mu=0.5), "W0")
    assert not report.valid
    assert not report.alpha_in_range
    assert any("alpha=1.5" in m for m in report.messages)


def test_validate_rejects_equal_rates():
    p = Parameters(alpha=0.5, beta=0.5, mu=0.5)
    report = validate_parameters(p, "W0")
    assert not report.valid
    assert report.keeps_quadrant
    assert not report.distinct_rates
    assert not p.is_case_W0


def test_general_mode_accepts_larval_death():
    p = Parameters(alpha=0.6, beta=0.5, mu=0.48, d0=0.1, d1=0.05)
    assert validate_parameters(p, "general").valid
    assert not validate_parameters(p, "W0").valid
    assert validate_parameters(p, "quadrant").valid


def test_general_mode_rejects_negative_death():
    report = validate_parameters(Parameters(alpha=0.6, beta=0.5, mu=0.48, d1=-0.1))
    assert not report.valid
    assert not report.d1_nonnegative


def test_non_finite_parameters_are_invalid():
    report = validate_parameters(Parameters(alpha=float("nan"), beta=0.5, mu=0.4), "general")
    assert not report.valid
    assert not report.finite


def test_require_valid_raises():
    with pytest.raises(PreconditionError):
        require_valid(Parameters(alpha=0.5, beta=0.5, mu=0.5), "W0")


def test_apply_W_with_larval_death():
    p = Parameters(alpha=0.6, beta=0.5, mu=0.48, d0=0.1, d1=0.05)
    s = apply_W(p, State(x=1.0, y=1.0))
    # term by term: 1 + 0.5 - 0.3 - 0.15 and 0.3 + 0.52
    assert s.x == pytest.approx(1.0 + 0.5 * 1.0 - 0.6 * 0.5 - 0.15 * 1.0, abs=1e-15)
    assert s.x == pytest.approx(1.05, abs=1e-15)
    assert s.y == pytest.approx(0.82, abs=1e-15)


def test_apply_W0_reference_values(slow_escape):
    p, s0 = slow_escape
    s = apply_W0(p, s0)
    assert s.x == pytest.approx(1.65, abs=1e-15)
    assert s.y == pytest.approx(0.452, abs=1e-15)


def test_apply_W0_matches_exact_arithmetic(alternating_start):
    p, s0 = alternating_start
    s = apply_W0(p, s0)
    alpha, beta, mu = Fraction("0.9"), Fraction("0.9"), Fraction("0.88")
    x, y = Fraction("0.01"), Fraction("0.2")
    moved = alpha * x / (1 + x)
    assert s.x == pytest.approx(float(beta * y - moved + x), abs=1e-15)
    assert s.y == pytest.approx(float(moved - mu * y + y), abs=1e-15)
    assert s.x == pytest.approx(0.181089, abs=1e-6)
    assert s.y == pytest.approx(0.032910, abs=1e-6)


def test_apply_W0_rejects_general_parameters():
    with pytest.raises(PreconditionError):
        apply_W0(Parameters(alpha=0.6, beta=0.5, mu=0.48, d0=0.1), State(x=1.0, y=1.0))


def test_negative_larvae_is_a_domain_error(slow_escape):
    p, _ = slow_escape
    with pytest.raises(DomainError):
        apply_W(p, State(x=-0.1, y=1.0))
    with pytest.raises(DomainError):
        continuous_rhs(p, State(x=-0.1, y=1.0))


def test_continuous_rhs_reference(slow_escape):
    p, s0 = slow_escape
    dx, dy = continuous_rhs(p, s0)
    assert dx == pytest.approx(-0.35, abs=1e-15)
    assert dy == pytest.approx(0.352, abs=1e-15)


@given(
    st.floats(0.0, 1.0).filter(lambda v: v > 0),
    st.floats(0.01, 2.0),
    st.floats(0.0, 1.0).filter(lambda v: v > 0),
    st.floats(0.0, 1.0),
    st.floats(0.0, 1.0),
)
def test_origin_is_fixed_for_every_operator(alpha, beta, mu, d0, d1):
    p = Parameters(alpha=alpha, beta=beta, mu=mu, d0=d0, d1=d1)
    s = apply_W(p, State(x=0.0, y=0.0))
    assert (s.x, s.y) == (0.0, 0.0)
    assert continuous_rhs(p, State(x=0.0, y=0.0)) == (0.0, 0.0)


@given(reduced_parameters(), quadrant_states, st.floats(0.0, 0.5), st.floats(0.0, 0.5))
def test_step_is_state_plus_vector_field(p, s, d0, d1):
    p = p.model_copy(update={"d0": d0, "d1": d1})
    nxt = apply_W(p, s)
    dx, dy = continuous_rhs(p, s)
    scale = 1.0 + abs(s.x) + abs(s.y) + d1 * s.x * s.x
    assert nxt.x == pytest.approx(s.x + dx, rel=1e-12, abs=1e-12 * scale)
    assert nxt.y == pytest.approx(s.y + dy, rel=1e-12, abs=1e-12 * scale)


def test_forward_invariance_bulk():
    rng = np.random.default_rng(2024)
    alpha, beta, mu = random_reduced(rng, 150)
    samples = 0
    for a, b, m in list(zip(alpha, beta, mu))[:100]:
        p = Parameters(alpha=float(a), beta=float(b), mu=float(m))
        x = np.concatenate([rng.uniform(0, 10, 90), rng.uniform(0, 1e-6, 5), np.zeros(5)])
        y = np.concatenate([rng.uniform(0, 10, 90), np.zeros(5), rng.uniform(0, 1e-6, 5)])
        nx, ny = apply_W_arrays(p, x, y)
        assert np.all(nx >= 0)
        assert np.all(ny >= 0)
        samples += len(x)
    assert samples >= 10_000


def test_emergence_is_increasing_and_bounded():
    x = np.linspace(0.0, 1e3, 100_001)
    values = emergence(0.7, x)
    assert np.all(np.diff(values) > 0)
    assert np.all(values < 0.7)
    assert emergence(0.7, 1e308) == pytest.approx(0.7)
