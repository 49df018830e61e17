import logging
from multiprocessing import Pool

import pandas as pd
from tqdm import tqdm

from engine.errors import MosqDynError
from engine.model_core import validate_parameters
from engine.schemas import Classification, OrbitConfig, Parameters, State, SweepSpec, Verdict
from engine.spectral import classify_origin
from engine.trajectory import iterate_orbit

logger = logging.getLogger(__name__)

EXPECTED_VERDICT = {
    Classification.ATTRACTING: Verdict.EXTINCTION,
    Classification.SADDLE: Verdict.SURVIVAL,
}


def run_cell(job: tuple[int, Parameters, State, OrbitConfig]) -> dict:
    """Spectral class and simulated verdict of one grid cell."""
    index, p, s0, cfg = job
    row = {"cell": index, **p.model_dump()}
    report = validate_parameters(p, "W0")
    spectral = "n/a"
    if report.keeps_quadrant and report.no_larval_death:
        spectral = classify_origin(p).classification.value
    row["spectral_class"] = spectral
    if not report.valid:
        row.update(verdict="", n_steps=0, y_limit_estimate=float("nan"))
        row.update(agreement=False, status="out-of-condition")
        return row
    try:
        orbit = iterate_orbit(p, s0, cfg)
    except MosqDynError as e:
        logger.error(f"cell {index} {p.model_dump()} failed: {e}")
        row.update(verdict="", n_steps=0, y_limit_estimate=float("nan"))
        row.update(agreement=False, status="error")
        return row
    expected = EXPECTED_VERDICT.get(Classification(spectral))
    agreement = orbit.verdict == expected
    row.update(
        verdict=orbit.verdict.value,
        n_steps=orbit.n_steps,
        y_limit_estimate=orbit.y_limit_estimate,
        agreement=agreement,
        status="agree" if agreement else "disagree",
    )
    return row


def run_sweep(spec: SweepSpec, workers: int = 1) -> pd.DataFrame:
    """
    Run every cell of the sweep grid.

    Rows come back sorted by cell index whatever the number of workers, so
    the written raster does not depend on scheduling.
    """
    s0 = State(x=spec.x0, y=spec.y0)
    jobs = [(i, p, s0, spec.orbit) for i, p in enumerate(spec.grid())]
    logger.info(f"sweeping {len(jobs)} cells with {workers} worker(s)")
    if workers > 1:
        with Pool(workers) as pool:
            rows = list(tqdm(pool.imap_unordered(run_cell, jobs), total=len(jobs), desc="sweep"))
    else:
        rows = [run_cell(job) for job in tqdm(jobs, desc="sweep")]
    return pd.DataFrame(rows).sort_values("cell").reset_index(drop=True)


def sweep_summary(df: pd.DataFrame) -> pd.DataFrame:
    """Counts per status and verdict."""
    summary = df.groupby(["status", "verdict"], dropna=False).size().rename("cells")
    return summary.reset_index()


def sweep_passed(df: pd.DataFrame) -> bool:
    in_condition = df[df["status"] != "out-of-condition"]
    return bool(in_condition["agreement"].all())
