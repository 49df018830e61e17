import logging
import math

import numpy as np

from engine.errors import IntegrationError, PreconditionError, VerificationError
from engine.model_core import continuous_rhs, emergence, require_quadrant, require_valid
from engine.schemas import EquilibriumReport, OdeConfig, OdeTrajectory, Parameters, State

logger = logging.getLogger(__name__)

EQUILIBRIUM_RESIDUAL_TOL = 1e-9
MAX_STEP = 1.0
SINGULARITY_GUARD = -0.5


def compute_r0(p: Parameters) -> float:
    """Basic offspring number of the continuous model."""
    if p.mu == 0 or p.alpha + p.d0 == 0:
        raise PreconditionError("r0 needs mu > 0 and alpha + d0 > 0")
    return p.alpha * p.beta / ((p.alpha + p.d0) * p.mu)


def positive_equilibrium(p: Parameters) -> State | None:
    if p.d1 <= 0:
        raise PreconditionError("the positive equilibrium formula needs d1 > 0")
    r0 = compute_r0(p)
    if r0 <= 1:
        return None
    spread = p.d0 + p.d1
    disc = spread**2 - 4.0 * p.d1 * (p.alpha + p.d0) * (1.0 - r0)
    x0 = (math.sqrt(disc) - spread) / (2.0 * p.d1)
    y0 = p.alpha * x0 / (p.mu * (1.0 + x0))
    equilibrium = State(x=x0, y=y0)
    residual = max(abs(v) for v in continuous_rhs(p, equilibrium))
    if residual >= EQUILIBRIUM_RESIDUAL_TOL:
        logger.error(f"equilibrium residual {residual:.3e} for {p.model_dump()}")
        raise VerificationError(f"positive equilibrium residual {residual:.3e}")
    return equilibrium


def equilibrium_report(p: Parameters) -> EquilibriumReport:
    require_valid(p, "general")
    r0 = compute_r0(p)
    # Jacobian at the origin: [[-alpha - d0, beta], [alpha, -mu]]
    trace = -p.alpha - p.d0 - p.mu
    root = math.sqrt((p.alpha + p.d0 - p.mu) ** 2 + 4.0 * p.alpha * p.beta)
    positive = positive_equilibrium(p) if p.d1 > 0 else None
    return EquilibriumReport(
        r0=r0,
        trivial_stable=r0 <= 1,
        positive_equilibrium=positive,
        origin_eigenvalues=(0.5 * (trace + root), 0.5 * (trace - root)),
    )


def settle_target(p: Parameters) -> State | None:
    """Where a continuous trajectory should end up; None when x grows without bound."""
    r0 = compute_r0(p)
    if r0 <= 1:
        return State(x=0.0, y=0.0)
    if p.d1 > 0:
        return positive_equilibrium(p)
    return None


def _rhs(p: Parameters, x: float, y: float) -> tuple[float, float]:
    moved = emergence(p.alpha, x)
    return p.beta * y - moved - (p.d0 + p.d1 * x) * x, moved - p.mu * y


def rk4_step(p: Parameters, x: float, y: float, h: float) -> tuple[float, float]:
    k1x, k1y = _rhs(p, x, y)
    k2x, k2y = _rhs(p, x + 0.5 * h * k1x, y + 0.5 * h * k1y)
    k3x, k3y = _rhs(p, x + 0.5 * h * k2x, y + 0.5 * h * k2y)
    k4x, k4y = _rhs(p, x + h * k3x, y + h * k3y)
    x_next = x + h / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
    y_next = y + h / 6.0 * (k1y + 2.0 * k2y + 2.0 * k3y + k4y)
    return x_next, y_next


def integrate_ode(p: Parameters, s0: State, cfg: OdeConfig | None = None) -> OdeTrajectory:
    """
    Fixed-step classic Runge-Kutta integration up to ``cfg.t_end``.

    The last step is shortened so the trajectory ends exactly at t_end.
    """
    cfg = cfg or OdeConfig()
    require_valid(p, "general")
    require_quadrant(s0)
    if cfg.step > MAX_STEP:
        raise PreconditionError(f"step {cfg.step} is larger than {MAX_STEP}")

    n = max(1, math.ceil(cfg.t_end / cfg.step - 1e-9))
    t = np.empty(n + 1)
    xs = np.empty(n + 1)
    ys = np.empty(n + 1)
    x, y = s0.x, s0.y
    t[0], xs[0], ys[0] = 0.0, x, y
    for i in range(1, n + 1):
        t_prev = (i - 1) * cfg.step
        t_next = cfg.t_end if i == n else i * cfg.step
        x, y = rk4_step(p, x, y, t_next - t_prev)
        if not (math.isfinite(x) and math.isfinite(y)) or x < SINGULARITY_GUARD:
            logger.error(f"integration broke down at t={t_next}: ({x}, {y})")
            raise IntegrationError(f"unstable iterate ({x}, {y}) at t={t_next}")
        t[i], xs[i], ys[i] = t_next, x, y
    logger.debug(f"integrated {n} steps up to t={cfg.t_end}, final ({x:.6g}, {y:.6g})")
    return OdeTrajectory(parameters=p, t=t, xs=xs, ys=ys)
