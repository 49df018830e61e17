import logging
import math

import numpy as np

from engine.errors import PreconditionError, VerificationError
from engine.model_core import apply_W_arrays, evolve, require_quadrant, require_valid, validate_parameters
from engine.schemas import Classification, Parameters, SpectralReport, State

logger = logging.getLogger(__name__)

HYPERBOLIC_TOL = 1e-9
ORIGIN_TOL = 1e-8


def _require_zero_larval_death(p: Parameters) -> None:
    # equal birth and death rates are accepted here so they can be reported
    report = validate_parameters(p, "W0")
    if not (report.keeps_quadrant and report.no_larval_death):
        raise PreconditionError(f"spectral analysis needs the reduced map: {report.summary()}")


def jacobian_at_origin(p: Parameters) -> np.ndarray:
    _require_zero_larval_death(p)
    return np.array([[1.0 - p.alpha, p.beta], [p.alpha, 1.0 - p.mu]])


def eigenvalues(p: Parameters) -> tuple[float, float]:
    """Closed-form eigenvalues of the Jacobian at the origin, larger first."""
    _require_zero_larval_death(p)
    root = math.sqrt((p.alpha - p.mu) ** 2 + 4.0 * p.alpha * p.beta)
    centre = 2.0 - p.alpha - p.mu
    return 0.5 * (centre + root), 0.5 * (centre - root)


def eigenvalue_agreement(p: Parameters) -> float:
    """Largest gap between the closed form and a generic eigensolver."""
    closed = np.array(eigenvalues(p))
    numeric = np.sort(np.linalg.eigvals(jacobian_at_origin(p)).real)[::-1]
    return float(np.max(np.abs(closed - numeric)))


def classify_origin(p: Parameters, tol: float = HYPERBOLIC_TOL) -> SpectralReport:
    lambda1, lambda2 = eigenvalues(p)
    moduli = (abs(lambda1), abs(lambda2))
    if any(abs(m - 1.0) <= tol for m in moduli):
        classification = Classification.NONHYPERBOLIC
    elif all(m < 1.0 for m in moduli):
        classification = Classification.ATTRACTING
    elif all(m > 1.0 for m in moduli):
        classification = Classification.REPELLING
    else:
        classification = Classification.SADDLE
    logger.debug(
        f"origin of {p.model_dump()}: lambda=({lambda1:.6g}, {lambda2:.6g}) -> {classification.value}"
    )
    return SpectralReport(
        jacobian=jacobian_at_origin(p).tolist(),
        lambda1=lambda1,
        lambda2=lambda2,
        classification=classification,
        tol=tol,
    )


def expected_classification(p: Parameters) -> Classification:
    """What the rate comparison predicts for the origin."""
    if p.beta < p.mu:
        return Classification.ATTRACTING
    if p.beta > p.mu:
        return Classification.SADDLE
    return Classification.NONHYPERBOLIC


def stability_inequalities(p: Parameters) -> tuple[bool, bool]:
    _require_zero_larval_death(p)
    root = math.sqrt((p.alpha - p.mu) ** 2 + 4.0 * p.alpha * p.beta)
    rates = p.alpha + p.mu
    return rates + root < 4.0, 0.0 < rates - root < 4.0


def fixed_point_residual(p: Parameters, s: State) -> float:
    require_quadrant(s)
    x_next, y_next = evolve(p.alpha, p.beta, p.mu, p.d0, p.d1, s.x, s.y)
    return max(abs(x_next - s.x), abs(y_next - s.y))


def _newton_refine(
    p: Parameters,
    x: np.ndarray,
    y: np.ndarray,
    damping: float = 1.0,
    max_iter: int = 60,
) -> tuple[np.ndarray, np.ndarray]:
    """Damped Newton on W0(s) - s, projected back onto the quadrant."""
    alpha, beta, mu = p.alpha, p.beta, p.mu
    for _ in range(max_iter):
        fx, fy = evolve(alpha, beta, mu, 0.0, 0.0, x, y)
        fx, fy = fx - x, fy - y
        slope = alpha / (1.0 + x) ** 2
        det = slope * (mu - beta)
        dx = (mu * fx + beta * fy) / det
        dy = slope * (fx + fy) / det
        x = np.maximum(x + damping * dx, 0.0)
        y = np.maximum(y + damping * dy, 0.0)
    return x, y


def find_fixed_points_W0(
    p: Parameters,
    extent: tuple[float, float] = (50.0, 50.0),
    step: float = 0.05,
    residual_tol: float = 1e-10,
) -> list[State]:
    """
    Fixed points of the reduced map in the quadrant.

    The answer is the origin alone. A residual scan over [0, X] x [0, Y]
    backs this up: every grid node whose residual is small enough to hide a
    fixed point within one cell is refined, and any refined point that
    converges away from the origin raises VerificationError.
    """
    require_valid(p, "W0")
    if step <= 0 or min(extent) <= 0:
        raise PreconditionError("scan extent and step must be positive")
    xs = np.linspace(0.0, extent[0], int(round(extent[0] / step)) + 1)
    ys = np.linspace(0.0, extent[1], int(round(extent[1] / step)) + 1)
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    fx, fy = apply_W_arrays(p, gx, gy)
    residual = np.maximum(np.abs(fx - gx), np.abs(fy - gy))

    # the residual map is Lipschitz with constant below 1 + max(alpha, beta, mu)
    mask = residual <= step * (1.0 + max(p.alpha, p.beta, p.mu))
    cand_x, cand_y = gx[mask], gy[mask]
    rx, ry = _newton_refine(p, cand_x, cand_y)
    fx, fy = evolve(p.alpha, p.beta, p.mu, 0.0, 0.0, rx, ry)
    refined = np.maximum(np.abs(fx - rx), np.abs(fy - ry))
    stray = (refined < residual_tol) & (np.maximum(rx, ry) > ORIGIN_TOL)
    if np.any(stray):
        points = list(zip(rx[stray].tolist(), ry[stray].tolist()))
        logger.error(f"fixed point scan found points besides the origin: {points[:5]}")
        raise VerificationError(f"fixed points besides the origin: {points[:5]}")
    logger.debug(f"fixed point scan: {int(mask.sum())} candidates, all refined to the origin")
    return [State(x=0.0, y=0.0)]
