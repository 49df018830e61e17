import logging
import math

import numpy as np

from engine.errors import DomainError, PreconditionError
from engine.model_core import evolve, require_quadrant, require_valid
from engine.schemas import (
    DeltaSummary,
    MonitorLog,
    Orbit,
    OrbitConfig,
    Parameters,
    PatternReport,
    State,
    Verdict,
)

logger = logging.getLogger(__name__)

MONOTONE_TOL = 1e-14
BOUND_SLACK = 1e-12
PERSISTENCE_MIN_STEPS = 10


def _sign(delta: float) -> int:
    if delta > MONOTONE_TOL:
        return 1
    if delta < -MONOTONE_TOL:
        return -1
    return 0


class PatternTracker:
    """
    Sign bookkeeping of consecutive differences of an orbit.

    Counts steps where both coordinates fall (impossible when beta > mu) and
    steps that break growth once both coordinates have risen together. It
    also records whether larvae-down/adults-up, larvae-up/adults-down or the
    alternation of the two held on every step, none of which can last for
    the whole orbit.
    """

    def __init__(self, beta_gt_mu: bool):
        self.beta_gt_mu = beta_gt_mu
        self.counts = dict.fromkeys(DeltaSummary.model_fields, 0)
        self.steps = 0
        self.both_decreasing = 0
        self.growth_broken = 0
        self.growth_started = False
        self.all_x_down_y_up = True
        self.all_x_up_y_down = True
        self.alternating = True
        self.last_decrease = -1
        self._previous = None
        self._previous_gaps = None

    def feed(self, dx: float, dy: float) -> None:
        sx, sy = _sign(dx), _sign(dy)
        pattern = (sx, sy)
        counts = self.counts
        if sx < 0 or sy < 0:
            self.last_decrease = self.steps

        if pattern == (1, 1):
            counts["both_up"] += 1
        elif pattern == (1, -1):
            counts["x_up_y_down"] += 1
        elif pattern == (-1, 1):
            counts["x_down_y_up"] += 1
        elif pattern == (-1, -1):
            counts["both_down"] += 1
        else:
            counts["ties"] += 1

        if pattern == (-1, -1) and self.beta_gt_mu:
            self.both_decreasing += 1
        if self.growth_started and (sx < 0 or sy < 0):
            self.growth_broken += 1
        if pattern == (1, 1):
            self.growth_started = True

        self.all_x_down_y_up &= pattern == (-1, 1)
        self.all_x_up_y_down &= pattern == (1, -1)
        if pattern not in ((1, -1), (-1, 1)) or pattern == self._previous:
            self.alternating = False

        # inside a larvae-up/adults-down run the gain should shrink and the loss grow
        if pattern == (1, -1):
            gain, loss = dx, -dy
            if self._previous == (1, -1) and self._previous_gaps is not None:
                if gain >= self._previous_gaps[0]:
                    counts["larvae_gain_not_decreasing"] += 1
                if loss <= self._previous_gaps[1]:
                    counts["adult_loss_not_increasing"] += 1
            self._previous_gaps = (gain, loss)
        else:
            self._previous_gaps = None

        self._previous = pattern
        self.steps += 1

    def report(self) -> PatternReport:
        judged = self.steps >= PERSISTENCE_MIN_STEPS
        return PatternReport(
            steps_scanned=self.steps,
            both_decreasing=self.both_decreasing,
            growth_broken=self.growth_broken,
            persistent_x_down_y_up=judged and self.all_x_down_y_up,
            persistent_x_up_y_down=judged and self.all_x_up_y_down,
            persistent_alternation=judged and self.alternating,
        )

    @property
    def summary(self) -> DeltaSummary:
        return DeltaSummary(**self.counts)

    @property
    def n0_estimate(self) -> int:
        return self.last_decrease + 1


class _SurvivalTracker:
    """Extrapolates the adult count to x = infinity along the increasing regime."""

    def __init__(self):
        self.run = 0
        self.checkpoints: list[tuple[float, float, float]] = []
        self.estimate: float | None = None

    def feed(self, dx: float, dy: float, x: float, y: float) -> None:
        if _sign(dx) > 0 and _sign(dy) >= 0:
            self.run += 1
        else:
            self.run = 0
            self.checkpoints.clear()
            self.estimate = None
            return
        if x < 1.0:
            return
        if self.checkpoints and x < 2.0 * self.checkpoints[-1][0]:
            return
        self.checkpoints.append((x, 1.0 / (1.0 + x), y))
        del self.checkpoints[:-3]
        if len(self.checkpoints) == 3:
            _, u, v = zip(*self.checkpoints)
            # quadratic through the last three checkpoints, read off at u = 0
            self.estimate = float(np.polyfit(u, v, 2)[-1])


def iterate_orbit(
    p: Parameters, s0: State, cfg: OrbitConfig | None = None
) -> Orbit:
    """
    Iterate the model from ``s0`` until a verdict is reached.

    For the reduced map (no larval death, beta != mu) the run stops at
    extinction, when the orbit enters the conv_tol box around the origin, or
    at survival, once x has grown past div_threshold inside the increasing
    regime and the extrapolated adult limit sits within conv_tol of
    alpha/mu. Other parameters iterate the general operator, which stops at
    extinction or when successive states stop moving (equilibrium).
    Running out of max_iters gives the exhausted verdict.
    """
    cfg = cfg or OrbitConfig()
    require_valid(p, "quadrant")
    require_quadrant(s0)

    alpha, beta, mu, d0, d1 = p.alpha, p.beta, p.mu, p.d0, p.d1
    reduced = p.is_case_W0
    target = alpha / mu
    shrink = 1.0 - mu
    gap0 = s0.y - target
    k = mu / beta

    patterns = PatternTracker(beta_gt_mu=beta > mu)
    growing = reduced and beta > mu
    theta = max(s0.y, target)
    anchor = (0, s0.x, s0.y)
    growth_violations = 0
    survival = _SurvivalTracker()
    bound_violations = 0
    contraction_violations = 0
    identity_err = 0.0
    power = 1.0
    still = 0

    x, y = s0.x, s0.y
    steps, xs, ys = [0], [x], [y]
    stride = cfg.record_every
    verdict = Verdict.EXHAUSTED
    n = 0
    if max(x, y) < cfg.conv_tol:
        verdict = Verdict.EXTINCTION

    while verdict is Verdict.EXHAUSTED and n < cfg.max_iters:
        x_next, y_next = evolve(alpha, beta, mu, d0, d1, x, y)
        if not (math.isfinite(x_next) and math.isfinite(y_next)) or x_next < 0:
            logger.error(f"orbit left the quadrant at step {n + 1}: ({x_next}, {y_next})")
            raise DomainError(f"orbit left the quadrant at step {n + 1}")
        n += 1
        dx, dy = x_next - x, y_next - y

        power *= shrink
        if y_next > target + power * gap0 + BOUND_SLACK or y_next < -BOUND_SLACK:
            bound_violations += 1
        expected = x + y + (beta - mu) * y - (d0 + d1 * x) * x
        err = abs((x_next + y_next) - expected)
        if err > identity_err:
            identity_err = err
        if reduced:
            patterns.feed(dx, dy)
            if patterns.last_decrease == n - 1:
                anchor = (n, x_next, y_next)
                growth_violations = 0
            elif growing and anchor[2] > 0:
                n0, x0, y0 = anchor
                bound = x0 + y0 - theta + (beta - mu) * (n - n0) * y0
                if x_next <= bound - BOUND_SLACK * max(1.0, x_next):
                    growth_violations += 1
            if beta < mu:
                scale = max(1.0, x + y)
                if dx + dy > MONOTONE_TOL * scale or k * dx + dy > MONOTONE_TOL * k * scale:
                    contraction_violations += 1
            else:
                survival.feed(dx, dy, x_next, y_next)

        x, y = x_next, y_next
        if n % stride == 0:
            steps.append(n)
            xs.append(x)
            ys.append(y)
            if len(steps) >= cfg.max_records:
                steps, xs, ys = steps[::2], xs[::2], ys[::2]
                stride *= 2

        if max(x, y) < cfg.conv_tol:
            verdict = Verdict.EXTINCTION
        elif reduced:
            if (
                survival.run >= cfg.survival_window
                and x > cfg.div_threshold
                and survival.estimate is not None
                and abs(survival.estimate - target) < cfg.conv_tol
            ):
                verdict = Verdict.SURVIVAL
        else:
            still = still + 1 if max(abs(dx), abs(dy)) < cfg.conv_tol else 0
            if still >= cfg.survival_window:
                verdict = Verdict.EQUILIBRIUM

    if steps[-1] != n:
        steps.append(n)
        xs.append(x)
        ys.append(y)

    monitors = MonitorLog(
        y_bound_violations=bound_violations,
        sum_identity_max_err=identity_err,
        contraction_violations=contraction_violations,
        growth_violations=growth_violations,
    )
    if reduced:
        pattern_report = patterns.report()
        monitors.pattern_violations = pattern_report.total
        monitors.n0_estimate = patterns.n0_estimate
        monitors.delta_sequence = patterns.summary
        if pattern_report.total:
            logger.warning(f"monotone pattern violations: {pattern_report.model_dump()}")
        gaps = patterns.summary
        if gaps.larvae_gain_not_decreasing or gaps.adult_loss_not_increasing:
            logger.info(
                "larvae-up/adults-down runs with non-monotone gaps: "
                f"{gaps.larvae_gain_not_decreasing} gain, {gaps.adult_loss_not_increasing} loss"
            )

    if verdict is Verdict.SURVIVAL or (
        verdict is Verdict.EXHAUSTED and survival.estimate is not None
    ):
        y_limit = survival.estimate
    else:
        y_limit = y

    logger.info(
        f"orbit from ({s0.x}, {s0.y}): {verdict.value} after {n} steps, y_limit={y_limit:.12g}"
    )
    return Orbit(
        parameters=p,
        steps=np.asarray(steps, dtype=np.int64),
        xs=np.asarray(xs, dtype=float),
        ys=np.asarray(ys, dtype=float),
        verdict=verdict,
        n_steps=n,
        y_limit_estimate=y_limit,
        record_every=stride,
        monitors=monitors,
    )


def _require_same_parameters(p: Parameters, orbit: Orbit) -> None:
    if orbit.parameters != p:
        raise PreconditionError("orbit was produced with different parameters")


def _require_full_resolution(orbit: Orbit) -> None:
    if not orbit.full_resolution:
        raise PreconditionError(
            f"check needs consecutive states, orbit is stored every {orbit.record_every} steps"
        )


def check_y_bound(p: Parameters, orbit: Orbit) -> int:
    """Count stored states whose adult count escapes the closed-form envelope."""
    _require_same_parameters(p, orbit)
    target = p.alpha / p.mu
    y0 = orbit.ys[0]
    with np.errstate(under="ignore"):
        decay = np.power(1.0 - p.mu, orbit.steps.astype(float))
    envelope = target + decay * (y0 - target)
    above = orbit.ys > envelope + BOUND_SLACK
    below = orbit.ys < -BOUND_SLACK
    return int(np.count_nonzero(above | below))


def check_sum_identity(p: Parameters, orbit: Orbit) -> float:
    _require_same_parameters(p, orbit)
    _require_full_resolution(orbit)
    if len(orbit.xs) < 2:
        return 0.0
    x, y = orbit.xs[:-1], orbit.ys[:-1]
    expected = x + y + (p.beta - p.mu) * y - (p.d0 + p.d1 * x) * x
    actual = orbit.xs[1:] + orbit.ys[1:]
    return float(np.max(np.abs(actual - expected)))


def pattern_report(orbit: Orbit, beta_gt_mu: bool) -> PatternReport:
    _require_full_resolution(orbit)
    tracker = PatternTracker(beta_gt_mu)
    for dx, dy in zip(np.diff(orbit.xs), np.diff(orbit.ys)):
        tracker.feed(float(dx), float(dy))
    return tracker.report()


def check_monotone_patterns(orbit: Orbit, beta_gt_mu: bool) -> int:
    if not beta_gt_mu:
        raise PreconditionError("monotone pattern scan applies to beta > mu")
    report = pattern_report(orbit, beta_gt_mu)
    if report.total:
        logger.warning(f"monotone pattern scan: {report.model_dump()}")
    return report.total


def check_growth_lower_bound(p: Parameters, orbit: Orbit, n0: int) -> bool:
    """
    Linear lower bound on larvae after the last decrease.

    Past step n0 both coordinates are nondecreasing, and summing the
    recurrences gives x_n > x_n0 + y_n0 - theta + (beta - mu)(n - n0) y_n0
    with theta = max(y_0, alpha/mu).
    """
    _require_same_parameters(p, orbit)
    if p.beta <= p.mu:
        raise PreconditionError("growth lower bound applies to beta > mu")
    matches = np.nonzero(orbit.steps == n0)[0]
    if len(matches) == 0:
        raise PreconditionError(f"step {n0} is not stored in the orbit")
    i0 = int(matches[0])
    x0, y0 = orbit.xs[i0], orbit.ys[i0]
    if y0 <= 0:
        raise PreconditionError(f"adult count at step {n0} must be positive")
    theta = max(orbit.ys[0], p.alpha / p.mu)
    later = orbit.steps > n0
    bound = x0 + y0 - theta + (p.beta - p.mu) * (orbit.steps[later] - n0) * y0
    slack = 1e-12 * np.maximum(1.0, np.abs(orbit.xs[later]))
    held = bool(np.all(orbit.xs[later] > bound - slack))
    if not held:
        logger.warning(f"growth lower bound failed after step {n0}")
    return held


def check_contraction_combos(p: Parameters, orbit: Orbit) -> bool:
    """
    x + y and (mu/beta) x + y never increase when beta < mu.

    Works on strided orbits as well, since monotone sequences stay monotone
    on any subsequence.
    """
    _require_same_parameters(p, orbit)
    if p.beta >= p.mu:
        raise PreconditionError("contraction combinations apply to beta < mu")
    k = p.mu / p.beta
    held = True
    for combo in (orbit.xs + orbit.ys, k * orbit.xs + orbit.ys):
        if np.any(combo < 0):
            held = False
        rise = np.diff(combo)
        scale = MONOTONE_TOL * np.maximum(1.0, combo[:-1])
        if np.any(rise > scale):
            held = False
    if not held:
        logger.warning(f"contraction combinations increased along the orbit of {p.model_dump()}")
    return held


def orbit_summary(orbit: Orbit) -> dict:
    """Flat view of an orbit's verdict and monitors for tables."""
    monitors = orbit.monitors
    return {
        "verdict": orbit.verdict.value,
        "n_steps": orbit.n_steps,
        "y_limit_estimate": orbit.y_limit_estimate,
        "y_bound_violations": monitors.y_bound_violations,
        "pattern_violations": monitors.pattern_violations,
        "sum_identity_max_err": monitors.sum_identity_max_err,
        "n0_estimate": monitors.n0_estimate,
        "growth_violations": monitors.growth_violations,
        "contraction_violations": monitors.contraction_violations,
    }