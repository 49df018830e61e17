import logging
from typing import Callable

import numpy as np
import pandas as pd
from pydantic import BaseModel, Field
from tqdm import tqdm

from engine.errors import MosqDynError
from engine.model_core import require_valid
from engine.schemas import Classification, OrbitConfig, Parameters, State, Verdict
from engine.simplex_map import (
    check_T_range,
    check_two_periodic_reduction,
    scan_periodic_points,
    scan_two_periodic_grid,
    two_periodic_certificate,
)
from engine.spectral import (
    classify_origin,
    eigenvalue_agreement,
    expected_classification,
    find_fixed_points_W0,
    stability_inequalities,
)
from engine.trajectory import (
    check_contraction_combos,
    check_growth_lower_bound,
    check_monotone_patterns,
    check_sum_identity,
    check_y_bound,
    iterate_orbit,
)

logger = logging.getLogger(__name__)

EIGEN_TOL = 1e-12
IDENTITY_TOL = 1e-9
REDUCTION_TOL = 1e-9


class CertificateResult(BaseModel):
    name: str
    passed: bool
    detail: str = ""
    inconclusive: bool = False
    """The check ran out of steps before it could decide; counts as passed."""
    payload: dict = {}
    """Machine-readable artefact of the check, such as the periodic scan certificate."""


class CertifyOptions(BaseModel):
    p_max: int = Field(default=8, ge=2)
    grid_n: int = Field(default=10_000, ge=2)
    fixed_point_step: float = Field(default=0.05, gt=0)
    two_periodic_n: int = Field(default=500, ge=2)
    orbit: OrbitConfig = Field(default_factory=OrbitConfig)


def _run(
    name: str, check: Callable[[], tuple[bool, str] | CertificateResult]
) -> CertificateResult:
    try:
        outcome = check()
    except MosqDynError as e:
        logger.error(f"certificate {name} raised: {e}")
        return CertificateResult(name=name, passed=False, detail=f"{type(e).__name__}: {e}")
    if isinstance(outcome, CertificateResult):
        result = outcome
    else:
        passed, detail = outcome
        result = CertificateResult(name=name, passed=passed, detail=detail)
    if result.inconclusive:
        logger.warning(f"certificate {name}: {result.detail}")
    else:
        status = "pass" if result.passed else "FAIL"
        level = logging.DEBUG if result.passed else logging.WARNING
        logger.log(level, f"certificate {name}: {status} {result.detail}")
    return result


def certify_parameters(
    p: Parameters, s0: State, options: CertifyOptions | None = None
) -> list[CertificateResult]:
    """Run every certificate of the reduced map for one parameter set and start."""
    options = options or CertifyOptions()
    require_valid(p, "W0")
    results = []

    def fixed_points():
        points = find_fixed_points_W0(p, step=options.fixed_point_step)
        return points == [State(x=0.0, y=0.0)], f"{len(points)} fixed point(s)"

    def eigen():
        gap = eigenvalue_agreement(p)
        return gap <= EIGEN_TOL, f"closed form vs solver gap {gap:.2e}"

    def classification():
        report = classify_origin(p)
        expected = expected_classification(p)
        return report.classification == expected, (
            f"{report.classification.value} (expected {expected.value})"
        )

    def inequalities():
        first, second = stability_inequalities(p)
        attracting = classify_origin(p).classification == Classification.ATTRACTING
        return (first and second) == attracting, f"({first}, {second})"

    results += [
        _run("fixed_points", fixed_points),
        _run("eigenvalues", eigen),
        _run("classification", classification),
        _run("stability_inequalities", inequalities),
    ]

    orbit = None
    try:
        orbit = iterate_orbit(p, s0, options.orbit)
    except MosqDynError as e:
        logger.error(f"orbit from ({s0.x}, {s0.y}) failed: {e}")
        results.append(CertificateResult(name="orbit_verdict", passed=False, detail=str(e)))

    if orbit is not None:
        monitors = orbit.monitors
        at_origin = s0.x == 0 and s0.y == 0

        def verdict():
            if at_origin:
                expected = Verdict.EXTINCTION
            else:
                expected = Verdict.SURVIVAL if p.beta > p.mu else Verdict.EXTINCTION
            detail = (
                f"{orbit.verdict.value} after {orbit.n_steps} steps, "
                f"y_limit={orbit.y_limit_estimate:.12g}"
            )
            if orbit.verdict is Verdict.EXHAUSTED:
                return CertificateResult(
                    name="orbit_verdict",
                    passed=True,
                    inconclusive=True,
                    detail=f"inconclusive: {detail}, expected {expected.value}",
                )
            return orbit.verdict == expected, detail

        def adult_bound():
            stored = check_y_bound(p, orbit)
            total = stored + monitors.y_bound_violations
            return total == 0, f"{monitors.y_bound_violations} online, {stored} stored"

        def sum_identity():
            err = monitors.sum_identity_max_err
            if orbit.full_resolution:
                err = max(err, check_sum_identity(p, orbit))
            return err <= IDENTITY_TOL, f"max error {err:.2e}"

        results += [
            _run("orbit_verdict", verdict),
            _run("adult_bound", adult_bound),
            _run("sum_identity", sum_identity),
        ]

        if p.beta > p.mu and not at_origin:

            def patterns():
                count = monitors.pattern_violations
                if orbit.full_resolution:
                    count = max(count, check_monotone_patterns(orbit, True))
                return count == 0, f"{count} violation(s)"

            def growth():
                n0 = monitors.n0_estimate
                online = monitors.growth_violations
                held = online == 0
                # thinned records may not hold step n0, the online count covers every step
                if n0 in orbit.steps:
                    held = held and check_growth_lower_bound(p, orbit, n0)
                return held, f"from step {n0}, {online} online violation(s)"

            results += [
                _run("monotone_patterns", patterns),
                _run("growth_lower_bound", growth),
            ]
        elif p.beta < p.mu:

            def contraction():
                held = check_contraction_combos(p, orbit)
                online = monitors.contraction_violations
                return held and online == 0, f"{online} online violation(s)"

            results.append(_run("contraction_combos", contraction))

    def t_range():
        return check_T_range(p, options.grid_n), f"grid {options.grid_n}"

    def period_two():
        cert = two_periodic_certificate(p)
        residual = cert.reduction_residual
        held = cert.signs_ok and residual is not None and residual <= REDUCTION_TOL
        return held, f"A={cert.A:.6g} B={cert.B:.6g} C={cert.C:.6g} residual={residual:.2e}"

    def periodic_scan():
        cert = scan_periodic_points(p, options.p_max, options.grid_n)
        return CertificateResult(
            name="periodic_scan",
            passed=not cert.spurious_roots,
            detail=f"periods 2..{options.p_max}",
            payload=cert.model_dump(mode="json"),
        )

    def two_periodic():
        check_two_periodic_reduction(p, s0)
        found = scan_two_periodic_grid(p, n=options.two_periodic_n)
        return found == [State(x=0.0, y=0.0)], f"{len(found)} grid point(s)"

    results += [
        _run("T_range", t_range),
        _run("period_two_signs", period_two),
        _run("periodic_scan", periodic_scan),
        _run("two_periodic_reduction", two_periodic),
    ]
    return results


RESULT_COLUMNS = ["name", "passed", "inconclusive", "detail"]


def results_frame(results: list[CertificateResult]) -> pd.DataFrame:
    rows = [r.model_dump(include=set(RESULT_COLUMNS)) for r in results]
    return pd.DataFrame(rows, columns=RESULT_COLUMNS)


def period_certificate(results: list[CertificateResult]) -> dict | None:
    """JSON form of the periodic scan certificate, None when the scan did not finish."""
    for r in results:
        if r.name == "periodic_scan" and r.payload:
            return r.payload
    return None


def draw_parameters(
    rng: np.random.Generator,
    count: int,
    low: float = 0.1,
    min_gap: float = 0.05,
) -> list[Parameters]:
    """Random reduced-map parameters in [low, 1]^3 with |beta - mu| >= min_gap."""
    draws = []
    while len(draws) < count:
        alpha, beta, mu = rng.uniform(low, 1.0, size=3)
        if abs(beta - mu) < min_gap:
            continue
        draws.append(Parameters(alpha=float(alpha), beta=float(beta), mu=float(mu)))
    return draws


def run_trials(
    trials: int,
    seed: int,
    options: CertifyOptions | None = None,
    start_box: float = 10.0,
) -> pd.DataFrame:
    """
    Certify ``trials`` random parameter sets from random starts.

    One row per trial; failing certificates are listed by name so a run can
    be reproduced from the seed and the echoed parameters.
    """
    options = options or CertifyOptions()
    rng = np.random.default_rng(seed)
    rows = []
    for i, p in enumerate(tqdm(draw_parameters(rng, trials), desc="trials")):
        x0, y0 = rng.uniform(0.0, start_box, size=2)
        s0 = State(x=float(x0), y=float(y0))
        try:
            results = certify_parameters(p, s0, options)
        except MosqDynError as e:
            logger.error(f"trial {i} with {p.model_dump()} failed: {e}")
            results = [CertificateResult(name="trial", passed=False, detail=str(e))]
        failed = [r.name for r in results if not r.passed]
        undecided = [r.name for r in results if r.inconclusive]
        rows.append(
            {
                "trial": i,
                "seed": seed,
                **p.model_dump(),
                "x0": s0.x,
                "y0": s0.y,
                "passed": not failed,
                "failed": ",".join(failed),
                "inconclusive": ",".join(undecided),
            }
        )
    return pd.DataFrame(rows)
