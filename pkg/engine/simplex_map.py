import logging

import numpy as np
from numpy.polynomial import Polynomial

from engine.errors import DomainError, PreconditionError, VerificationError
from engine.model_core import apply_W_arrays, require_quadrant, require_valid
from engine.schemas import Parameters, PeriodCertificate, State

logger = logging.getLogger(__name__)

SIMPLEX_TOL = 1e-12
BISECT_TOL = 1e-12
FIXED_POINT_TOL = 1e-10
REDUCTION_TOL = 1e-9


def _t_numerator(p: Parameters, x):
    return (1.0 - p.beta) * x**2 + (1.0 - p.alpha) * x + p.beta


def _t_denominator(p: Parameters, x):
    return (p.mu - p.beta) * x**2 + x + (p.beta - p.mu + 1.0)


def _t_gap(p: Parameters, x):
    """Denominator minus numerator of T, kept apart to avoid cancellation."""
    return (p.mu - 1.0) * x**2 + p.alpha * x + (1.0 - p.mu)


def t_map(p: Parameters, x):
    """T on floats or numpy arrays, no checks."""
    return _t_numerator(p, x) / _t_denominator(p, x)


def t_iterate(p: Parameters, x, q: int):
    for _ in range(q):
        x = t_map(p, x)
    return x


def apply_U(p: Parameters, s: State) -> State:
    """Project one step of the reduced map back onto the line x + y = 1."""
    require_valid(p, "W0")
    require_quadrant(s)
    if abs(s.x + s.y - 1.0) > SIMPLEX_TOL:
        raise DomainError(f"state ({s.x}, {s.y}) is off the simplex")
    x, y = s.x, s.y
    denominator = (1.0 + x) * (x + (p.beta - p.mu + 1.0) * y)
    if denominator <= 0:
        raise DomainError(f"normalising denominator {denominator} is not positive")
    larvae = p.beta * y * (1.0 + x) + x**2 + (1.0 - p.alpha) * x
    adults = p.alpha * x + (1.0 - p.mu) * y * (1.0 + x)
    return State(x=larvae / denominator, y=adults / denominator)


def apply_T(p: Parameters, x: float) -> float:
    require_valid(p, "W0")
    if not 0.0 <= x <= 1.0:
        raise DomainError(f"x={x} is outside [0, 1]")
    return float(t_map(p, x))


def check_T_range(p: Parameters, grid_n: int = 10_000) -> bool:
    """T maps [0, 1] into itself on a uniform grid of ``grid_n`` points."""
    if grid_n < 2:
        raise PreconditionError("grid_n must be at least 2")
    grid = np.linspace(0.0, 1.0, grid_n)
    numerator = _t_numerator(p, grid)
    denominator = _t_denominator(p, grid)
    gap = _t_gap(p, grid)
    endpoints = np.isclose(_t_gap(p, 0.0), 1.0 - p.mu, rtol=0, atol=1e-15) and np.isclose(
        _t_gap(p, 1.0), p.alpha, rtol=0, atol=1e-14
    )
    held = bool(
        np.all(gap >= 0) and np.all(numerator >= 0) and np.all(denominator > 0) and endpoints
    )
    if not held:
        logger.warning(f"T range check failed for {p.model_dump()}")
    return held


def fixed_points_T(p: Parameters) -> list[float]:
    """Fixed points of T in [0, 1]: real roots of the cubic numerator of T(x) - x."""
    require_valid(p, "W0")
    cubic = Polynomial([p.beta, p.mu - p.alpha - p.beta, -p.beta, p.beta - p.mu])
    roots = cubic.roots()
    real = roots[np.abs(roots.imag) < 1e-9].real
    return sorted(float(r) for r in real if -1e-12 <= r <= 1.0 + 1e-12)


def period_two_coefficients(p: Parameters) -> tuple[float, float, float]:
    a, b, m = p.alpha, p.beta, p.mu
    A = (1.0 - b) * (b - 2.0) + (b - m + 1.0) * (b - m)
    B = -a * b + 2.0 * m + 2.0 * a - 4.0
    C = b * (a + 2.0 * m - 4.0) + (1.0 - m) * (a + m - 2.0)
    return A, B, C


def verify_period_two_reduction(p: Parameters) -> float:
    """
    Check that two-step fixed points of T split off its fixed points.

    With T = a/b the numerator of T(T(x)) - x, multiplied by b^2, must equal
    minus the cubic numerator of T(x) - x times A x^2 + B x + C. Returns the
    largest coefficient deviation of quotient and remainder.
    """
    require_valid(p, "W0")
    a = Polynomial([p.beta, 1.0 - p.alpha, 1.0 - p.beta])
    b = Polynomial([p.beta - p.mu + 1.0, 1.0, p.mu - p.beta])
    x = Polynomial([0.0, 1.0])
    fixed = a - x * b
    numerator = (1.0 - p.beta) * a**2 + (1.0 - p.alpha) * a * b + p.beta * b**2
    denominator = (p.mu - p.beta) * a**2 + a * b + (p.beta - p.mu + 1.0) * b**2
    two_step = numerator - x * denominator
    quotient, remainder = divmod(two_step, fixed)
    A, B, C = period_two_coefficients(p)
    expected = -Polynomial([C, B, A])
    gap = (quotient - expected).coef
    residual = float(max(np.max(np.abs(gap)), np.max(np.abs(remainder.coef))))
    if residual > REDUCTION_TOL:
        logger.warning(
            f"period-two factorisation deviates by {residual:.3e} for {p.model_dump()}"
        )
    return residual


def two_periodic_certificate(p: Parameters) -> PeriodCertificate:
    require_valid(p, "W0")
    A, B, C = period_two_coefficients(p)
    signs_ok = A + B + C < 0 and B < 0 and C < 0
    if not signs_ok:
        logger.error(f"period-two signs fail for {p.model_dump()}: A={A}, B={B}, C={C}")
        raise VerificationError(
            f"sign conditions A+B+C<0, B<0, C<0 fail: A={A}, B={B}, C={C}"
        )
    return PeriodCertificate(
        A=A,
        B=B,
        C=C,
        signs_ok=signs_ok,
        reduction_residual=verify_period_two_reduction(p),
    )


def _bisect(p: Parameters, q: int, lo: float, hi: float, f_lo: float) -> float:
    while hi - lo > BISECT_TOL:
        mid = 0.5 * (lo + hi)
        f_mid = t_iterate(p, mid, q) - mid
        if f_mid == 0:
            return mid
        if (f_mid < 0) == (f_lo < 0):
            lo, f_lo = mid, f_mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def scan_periodic_points(
    p: Parameters, p_max: int = 8, grid_n: int = 10_000
) -> PeriodCertificate:
    """
    Roots of T^q(x) = x for q = 2..p_max that are not fixed points of T.

    Sign changes on a uniform grid are bracketed and bisected; a root with
    |T(x) - x| below the fixed-point tolerance is a fixed point of T and is
    dropped, anything else is spurious and raises VerificationError.
    """
    if p_max < 2:
        raise PreconditionError("p_max must be at least 2")
    if grid_n < 2:
        raise PreconditionError("grid_n must be at least 2")
    certificate = two_periodic_certificate(p)
    grid = np.linspace(0.0, 1.0, grid_n + 1)

    roots_by_period: dict[int, list[float]] = {}
    spurious: list[float] = []
    for q in range(2, p_max + 1):
        values = t_iterate(p, grid, q) - grid
        roots = [float(grid[i]) for i in np.nonzero(values == 0)[0]]
        for i in np.nonzero(values[:-1] * values[1:] < 0)[0]:
            roots.append(_bisect(p, q, float(grid[i]), float(grid[i + 1]), float(values[i])))
        roots.sort()
        roots_by_period[q] = roots
        extra = [r for r in roots if abs(t_map(p, r) - r) >= FIXED_POINT_TOL]
        spurious.extend(extra)
        logger.debug(f"period {q}: {len(roots)} roots, {len(extra)} not fixed by T")

    certificate = certificate.model_copy(
        update={
            "scanned_periods": (2, p_max),
            "roots_by_period": roots_by_period,
            "spurious_roots": spurious,
        }
    )
    if spurious:
        logger.error(f"periodic points of T found for {p.model_dump()}: {spurious}")
        raise VerificationError(f"spurious periodic roots: {spurious}")
    return certificate


def check_two_periodic_reduction(
    p: Parameters, s: State, tol: float = 1e-10, origin_tol: float = 1e-6
) -> bool:
    """
    A two-step fixed point of the reduced map must be the origin.

    Such a point satisfies alpha x/(1+x) = (mu - 2) y, whose sides have
    opposite signs on the quadrant unless x = y = 0.
    """
    require_valid(p, "W0")
    require_quadrant(s)
    x1, y1 = apply_W_arrays(p, s.x, s.y)
    x2, y2 = apply_W_arrays(p, x1, y1)
    if max(abs(x2 - s.x), abs(y2 - s.y)) >= tol:
        return True
    left = p.alpha * (s.x / (1.0 + s.x))
    right = (2.0 - p.mu) * s.y
    if left > origin_tol or right > origin_tol:
        logger.error(f"two-periodic point away from the origin: ({s.x}, {s.y})")
        raise VerificationError(f"two-periodic point ({s.x}, {s.y}) besides the origin")
    return True


def scan_two_periodic_grid(
    p: Parameters,
    extent: float = 5.0,
    n: int = 500,
    tol: float = 1e-10,
    origin_tol: float = 1e-6,
) -> list[State]:
    """Brute-force search for two-step fixed points on an n x n grid of [0, extent]^2."""
    require_valid(p, "W0")
    axis = np.linspace(0.0, extent, n)
    gx, gy = np.meshgrid(axis, axis, indexing="ij")
    x1, y1 = apply_W_arrays(p, gx, gy)
    x2, y2 = apply_W_arrays(p, x1, y1)
    residual = np.maximum(np.abs(x2 - gx), np.abs(y2 - gy))
    hits = residual < tol
    away = hits & (np.maximum(gx, gy) > origin_tol)
    if np.any(away):
        points = list(zip(gx[away].tolist(), gy[away].tolist()))
        logger.error(f"two-periodic grid scan found {points[:5]}")
        raise VerificationError(f"two-periodic points besides the origin: {points[:5]}")
    return [State(x=float(x), y=float(y)) for x, y in zip(gx[hits], gy[hits])]
