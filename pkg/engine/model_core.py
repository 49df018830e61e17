import logging
import math
from typing import Literal

import numpy as np

from engine.errors import DomainError, PreconditionError
from engine.schemas import Parameters, State, ValidationReport

logger = logging.getLogger(__name__)

ValidationMode = Literal["general", "quadrant", "W0"]


def _constraint_messages(p: Parameters) -> dict[str, str]:
    """Message for every constraint that fails, keyed by constraint."""
    values = (p.alpha, p.beta, p.mu, p.d0, p.d1)
    failed = {}
    if not all(math.isfinite(v) for v in values):
        failed["finite"] = "all parameters must be finite"
        return failed
    if not p.alpha > 0:
        failed["alpha_positive"] = f"alpha={p.alpha} must be positive"
    if not p.alpha <= 1:
        failed["alpha_in_range"] = (
            f"alpha={p.alpha} must lie in (0, 1] for the map to keep the positive quadrant"
        )
    if not p.mu > 0:
        failed["mu_positive"] = f"mu={p.mu} must be positive"
    if not p.mu <= 1:
        failed["mu_in_range"] = (
            f"mu={p.mu} must lie in (0, 1] for the map to keep the positive quadrant"
        )
    if not p.beta > 0:
        failed["beta_positive"] = f"beta={p.beta} must be positive"
    if not p.d0 >= 0:
        failed["d0_nonnegative"] = f"d0={p.d0} must be nonnegative"
    if not p.d1 >= 0:
        failed["d1_nonnegative"] = f"d1={p.d1} must be nonnegative"
    if not (p.d0 == 0 and p.d1 == 0):
        failed["no_larval_death"] = f"d0={p.d0}, d1={p.d1}: the reduced map needs d0 = d1 = 0"
    if p.beta == p.mu:
        failed["distinct_rates"] = f"beta=mu={p.mu}: the reduced map needs beta != mu"
    return failed


_GENERAL = ("finite", "alpha_positive", "mu_positive", "beta_positive", "d0_nonnegative", "d1_nonnegative")
_QUADRANT = _GENERAL + ("alpha_in_range", "mu_in_range")
_REDUCED = _QUADRANT + ("no_larval_death", "distinct_rates")
_REQUIRED = {"general": _GENERAL, "quadrant": _QUADRANT, "W0": _REDUCED}


def validate_parameters(
    p: Parameters, mode: ValidationMode = "general"
) -> ValidationReport:
    """
    Check the model constants against the constraints of ``mode``.

    ``general`` only asks for the operator to be defined (positive rates,
    nonnegative larvae deaths). ``quadrant`` adds the rate box alpha, mu in
    (0, 1] that keeps the quadrant invariant. ``W0`` further asks for no
    larval death and distinct birth and death rates. The report lists a
    message for every failed constraint of the requested mode.
    """
    failed = _constraint_messages(p)
    finite = "finite" not in failed
    messages = [failed[name] for name in _REQUIRED[mode] if name in failed]
    return ValidationReport(
        mode=mode,
        valid=not messages,
        finite=finite,
        alpha_in_range=finite and not {"alpha_positive", "alpha_in_range"} & failed.keys(),
        beta_positive=finite and "beta_positive" not in failed,
        mu_in_range=finite and not {"mu_positive", "mu_in_range"} & failed.keys(),
        d0_nonnegative=finite and "d0_nonnegative" not in failed,
        d1_nonnegative=finite and "d1_nonnegative" not in failed,
        no_larval_death=p.d0 == 0 and p.d1 == 0,
        distinct_rates=p.beta != p.mu,
        messages=messages,
    )


def require_valid(p: Parameters, mode: ValidationMode = "W0") -> ValidationReport:
    report = validate_parameters(p, mode)
    if not report.valid:
        raise PreconditionError(f"invalid parameters for {mode} mode: {report.summary()}")
    return report


def require_quadrant(s: State) -> None:
    if not (math.isfinite(s.x) and math.isfinite(s.y)):
        raise DomainError(f"state ({s.x}, {s.y}) is not finite")
    if s.x < 0 or s.y < 0:
        raise DomainError(f"state ({s.x}, {s.y}) lies outside the positive quadrant")


def emergence(alpha, x):
    """Larvae turning into adults in one step; increasing in x and below alpha."""
    return alpha * (x / (1.0 + x))


def evolve(alpha, beta, mu, d0, d1, x, y):
    """One step of the operator on floats or numpy arrays, no checks."""
    moved = emergence(alpha, x)
    x_next = (x - moved) - (d0 + d1 * x) * x + beta * y
    y_next = moved + (y - mu * y)
    return x_next, y_next


def apply_W(p: Parameters, s: State) -> State:
    require_quadrant(s)
    x_next, y_next = evolve(p.alpha, p.beta, p.mu, p.d0, p.d1, s.x, s.y)
    return State(x=x_next, y=y_next)


def apply_W0(p: Parameters, s: State) -> State:
    require_valid(p, "W0")
    return apply_W(p, s)


def apply_W_arrays(
    p: Parameters, x: np.ndarray, y: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.any(x < 0) or np.any(y < 0):
        raise DomainError("states must lie in the positive quadrant")
    return evolve(p.alpha, p.beta, p.mu, p.d0, p.d1, x, y)


def continuous_rhs(p: Parameters, s: State) -> tuple[float, float]:
    require_quadrant(s)
    moved = emergence(p.alpha, s.x)
    dx = p.beta * s.y - moved - (p.d0 + p.d1 * s.x) * s.x
    dy = moved - p.mu * s.y
    return dx, dy
