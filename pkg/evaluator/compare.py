import logging

import numpy as np
import pandas as pd

from engine.reference_ode import compute_r0, equilibrium_report, integrate_ode, settle_target
from engine.schemas import OdeConfig, OrbitConfig, Parameters, State, Verdict
from engine.trajectory import iterate_orbit
from utils.export import orbit_to_frame, trajectory_to_frame

logger = logging.getLogger(__name__)


def compare_routes(
    p: Parameters,
    s0: State,
    orbit_cfg: OrbitConfig | None = None,
    ode_cfg: OdeConfig | None = None,
) -> tuple[pd.DataFrame, dict]:
    """
    Run the discrete map and the continuous model from the same start.

    Returns the two trajectories side by side (rows aligned by index, the
    shorter one padded) and a statement of what each route did. The
    statement does not claim the larvae dynamics agree; with d1 = 0 and
    beta > mu the discrete larvae escape while the continuous model has no
    positive equilibrium to settle at.
    """
    ode_cfg = ode_cfg or OdeConfig()
    orbit = iterate_orbit(p, s0, orbit_cfg)
    trajectory = integrate_ode(p, s0, ode_cfg)

    discrete = orbit_to_frame(orbit).rename(columns={"x": "x_discrete", "y": "y_discrete"})
    continuous = trajectory_to_frame(trajectory).rename(
        columns={"x": "x_continuous", "y": "y_continuous"}
    )
    frame = pd.concat([discrete, continuous], axis=1)
    frame["n"] = frame["n"].astype("Int64")

    report = equilibrium_report(p)
    target = settle_target(p)
    final = trajectory.final_state
    if target is None:
        distance = float("nan")
        continuous_outcome = "unbounded larvae (d1 = 0 leaves no positive equilibrium)"
    else:
        distance = trajectory.distance_to(target)
        if distance >= ode_cfg.conv_tol:
            continuous_outcome = "not settled"
        elif target.x == 0 and target.y == 0:
            continuous_outcome = "extinction"
        else:
            continuous_outcome = "positive equilibrium"

    r0 = compute_r0(p)
    coherent = None
    if p.d0 == 0 and p.d1 == 0:
        coherent = bool(np.sign(r0 - 1.0) == np.sign(p.beta - p.mu))
    discrete_extinct = orbit.verdict == Verdict.EXTINCTION
    statement = {
        "parameters": p.model_dump(),
        "r0": r0,
        "threshold_coherent": coherent,
        "discrete_verdict": orbit.verdict.value,
        "discrete_steps": orbit.n_steps,
        "discrete_y_limit": orbit.y_limit_estimate,
        "continuous_outcome": continuous_outcome,
        "continuous_final": final.model_dump(),
        "continuous_distance": distance,
        "positive_equilibrium": (
            report.positive_equilibrium.model_dump() if report.positive_equilibrium else None
        ),
        "extinction_agrees": discrete_extinct == (continuous_outcome == "extinction"),
    }
    logger.info(
        f"discrete {orbit.verdict.value} vs continuous {continuous_outcome} (r0={r0:.6g})"
    )
    return frame, statement
