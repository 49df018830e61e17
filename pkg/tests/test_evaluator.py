import numpy as np
import pytest
from pydantic import ValidationError

import evaluator.certification as certification
from engine.errors import VerificationError
from engine.schemas import OdeConfig, OrbitConfig, Parameters, State, SweepSpec
from engine.trajectory import iterate_orbit
from evaluator.certification import (
    CertifyOptions,
    certify_parameters,
    draw_parameters,
    period_certificate,
    results_frame,
    run_trials,
)
from evaluator.compare import compare_routes
from evaluator.plot_orbits import plot_orbits
from evaluator.sweep import run_cell, run_sweep, sweep_passed, sweep_summary
from utils.export import orbit_to_frame, write_frame

QUICK = CertifyOptions(p_max=4, grid_n=2000, fixed_point_step=0.1, two_periodic_n=200)


def _names(results):
    return [r.name for r in results]


def test_certify_survival_case(slow_escape):
    p, s0 = slow_escape
    results = certify_parameters(p, s0, QUICK)
    assert all(r.passed for r in results), results_frame(results)
    names = _names(results)
    assert "monotone_patterns" in names and "growth_lower_bound" in names
    assert "contraction_combos" not in names


def test_certify_extinction_case(decline):
    p, s0 = decline
    results = certify_parameters(p, s0, QUICK)
    assert all(r.passed for r in results), results_frame(results)
    names = _names(results)
    assert "contraction_combos" in names
    assert "monotone_patterns" not in names
    assert names[:4] == ["fixed_points", "eigenvalues", "classification", "stability_inequalities"]


def test_certify_from_origin(adult_overshoot):
    p, _ = adult_overshoot
    results = certify_parameters(p, State(x=0.0, y=0.0), QUICK)
    assert all(r.passed for r in results)
    assert "growth_lower_bound" not in _names(results)


def test_certificate_errors_become_failures(decline, monkeypatch):
    p, s0 = decline

    def broken(*args, **kwargs):
        raise VerificationError("stray fixed point")

    monkeypatch.setattr(certification, "find_fixed_points_W0", broken)
    results = certify_parameters(p, s0, QUICK)
    first = results[0]
    assert first.name == "fixed_points"
    assert not first.passed
    assert first.detail.startswith("VerificationError")
    assert all(r.passed for r in results[1:])


def test_results_frame(decline):
    p, s0 = decline
    frame = results_frame(certify_parameters(p, s0, QUICK))
    assert list(frame.columns) == ["name", "passed", "inconclusive", "detail"]
    assert frame["passed"].all()
    assert not frame["inconclusive"].any()


def test_period_certificate_is_kept(slow_escape):
    p, s0 = slow_escape
    cert = period_certificate(certify_parameters(p, s0, QUICK))
    assert cert["A"] == pytest.approx(-0.7296, abs=1e-12)
    assert cert["signs_ok"] is True
    assert sorted(int(q) for q in cert["roots_by_period"]) == [2, 3, 4]
    assert cert["spurious_roots"] == []
    assert period_certificate([]) is None


def test_exhausted_slow_growth_is_inconclusive(slow_growth):
    p, s0 = slow_growth
    orbit = OrbitConfig(max_iters=20_000, max_records=64)
    options = QUICK.model_copy(update={"orbit": orbit})
    results = certify_parameters(p, s0, options)
    assert all(r.passed for r in results), results_frame(results)
    by_name = {r.name: r for r in results}
    verdict = by_name["orbit_verdict"]
    assert verdict.inconclusive
    assert verdict.detail.startswith("inconclusive: exhausted after 20000 steps")
    assert by_name["growth_lower_bound"].passed
    assert not by_name["growth_lower_bound"].inconclusive
    assert results_frame(results)["inconclusive"].sum() == 1


def test_draw_parameters():
    draws = draw_parameters(np.random.default_rng(0), 200, low=0.2, min_gap=0.05)
    assert len(draws) == 200
    for p in draws:
        assert 0.2 <= min(p.alpha, p.beta, p.mu) and max(p.alpha, p.beta, p.mu) <= 1.0
        assert abs(p.beta - p.mu) >= 0.05
        assert p.is_case_W0


def test_trials_are_reproducible():
    first = run_trials(2, seed=21, options=QUICK)
    second = run_trials(2, seed=21, options=QUICK)
    assert first["passed"].all()
    columns = ["alpha", "beta", "mu", "x0", "y0"]
    assert first[columns].equals(second[columns])
    assert (first["seed"] == 21).all()


def test_sweep_grid_order():
    spec = SweepSpec(alpha_range=(0.5, 0.6, 2), beta_range=(0.3, 0.5, 2), mu_range=(0.4, 0.4, 1))
    cells = [(p.alpha, p.beta) for p in spec.grid()]
    assert cells == [(0.5, 0.3), (0.5, 0.5), (0.6, 0.3), (0.6, 0.5)]


@pytest.mark.parametrize(
    "ranges",
    [
        {"alpha_range": (0.5, 0.4, 2), "beta_range": (0.3, 0.3, 1), "mu_range": (0.4, 0.4, 1)},
        {"alpha_range": (0.5, 0.5, 0), "beta_range": (0.3, 0.3, 1), "mu_range": (0.4, 0.4, 1)},
    ],
)
def test_sweep_spec_rejects_empty_ranges(ranges):
    with pytest.raises(ValidationError):
        SweepSpec(**ranges)


def test_sweep_marks_cells():
    spec = SweepSpec(alpha_range=(0.6, 0.6, 1), beta_range=(0.25, 0.75, 3), mu_range=(0.5, 0.5, 1))
    df = run_sweep(spec)
    assert df["status"].tolist() == ["agree", "out-of-condition", "agree"]
    assert df["spectral_class"].tolist() == ["attracting", "nonhyperbolic", "saddle"]
    assert sweep_passed(df)
    summary = sweep_summary(df)
    assert summary["cells"].sum() == 3


def test_sweep_is_independent_of_workers():
    spec = SweepSpec(alpha_range=(0.5, 0.7, 2), beta_range=(0.3, 0.5, 2), mu_range=(0.4, 0.4, 1))
    serial = run_sweep(spec, workers=1)
    parallel = run_sweep(spec, workers=2)
    assert serial.equals(parallel)


def test_sweep_cells_outside_the_reduced_map():
    cfg = OrbitConfig(max_iters=100)
    row = run_cell((0, Parameters(alpha=0.6, beta=0.5, mu=0.4, d1=0.1), State(x=1.0, y=1.0), cfg))
    assert row["status"] == "out-of-condition"
    assert row["spectral_class"] == "n/a"
    row = run_cell((1, Parameters(alpha=1.4, beta=0.5, mu=0.4), State(x=1.0, y=1.0), cfg))
    assert row["status"] == "out-of-condition"


def test_sweep_reports_disagreement():
    cfg = OrbitConfig(max_iters=10)
    row = run_cell((0, Parameters(alpha=0.6, beta=0.5, mu=0.4), State(x=1.0, y=1.0), cfg))
    assert row["verdict"] == "exhausted"
    assert row["status"] == "disagree"
    spec = SweepSpec(
        alpha_range=(0.6, 0.6, 1), beta_range=(0.5, 0.5, 1), mu_range=(0.4, 0.4, 1), orbit=cfg
    )
    assert not sweep_passed(run_sweep(spec))


def test_compare_extinction(decline):
    p, s0 = decline
    frame, statement = compare_routes(p, s0, ode_cfg=OdeConfig(step=0.05, t_end=200.0))
    assert statement["discrete_verdict"] == "extinction"
    assert statement["continuous_outcome"] == "extinction"
    assert statement["extinction_agrees"]
    assert statement["threshold_coherent"]
    assert frame["x_discrete"].iloc[0] == frame["x_continuous"].iloc[0] == 1.0


def test_compare_escape_does_not_claim_larvae_agreement(slow_escape):
    p, s0 = slow_escape
    _, statement = compare_routes(p, s0, ode_cfg=OdeConfig(step=0.1, t_end=50.0))
    assert statement["discrete_verdict"] == "survival"
    assert statement["continuous_outcome"].startswith("unbounded larvae")
    assert np.isnan(statement["continuous_distance"])
    assert statement["threshold_coherent"]


def test_compare_positive_equilibrium():
    p = Parameters(alpha=0.6, beta=0.8, mu=0.5, d0=0.1, d1=0.05)
    _, statement = compare_routes(p, State(x=1.0, y=1.0))
    assert statement["continuous_outcome"] == "positive equilibrium"
    assert statement["discrete_verdict"] == "equilibrium"
    assert statement["threshold_coherent"] is None
    assert statement["positive_equilibrium"]["x"] == pytest.approx(1.22947, abs=1e-5)


def test_plot_orbits(tmp_path, slow_escape, decline):
    inputs = []
    for name, (p, s0) in {"escape": slow_escape, "decline": decline}.items():
        orbit = iterate_orbit(p, s0, OrbitConfig(max_iters=300))
        path = tmp_path / f"{name}.csv"
        write_frame(orbit_to_frame(orbit), path)
        inputs.append(str(path))
    out = tmp_path / "plots" / "orbits.png"
    plot_orbits(inputs, str(out), max_steps=100)
    assert out.stat().st_size > 0
