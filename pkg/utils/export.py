import json
import logging
import os
import pathlib
import tempfile

import pandas as pd

from engine.schemas import OdeTrajectory, Orbit
from engine.trajectory import orbit_summary

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.16e"


def atomic_write_text(path: str | os.PathLike, text: str) -> None:
    """Write ``text`` to a temp file next to ``path`` and rename it into place."""
    path = pathlib.Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as f:
            f.write(text)
        os.replace(tmp_name, path)
    except BaseException:
        if os.path.exists(tmp_name):
            os.remove(tmp_name)
        raise


def frame_to_csv(df: pd.DataFrame) -> str:
    return df.to_csv(index=False, float_format=FLOAT_FORMAT, lineterminator="\n")


def write_frame(df: pd.DataFrame, path: str | os.PathLike) -> None:
    atomic_write_text(path, frame_to_csv(df))
    logger.info(f"wrote {len(df)} rows to {path}")


def to_json(data) -> str:
    return json.dumps(data, indent=4, ensure_ascii=False) + "\n"


def write_json(data, path: str | os.PathLike) -> None:
    atomic_write_text(path, to_json(data))
    logger.info(f"wrote {path}")


def orbit_to_frame(orbit: Orbit) -> pd.DataFrame:
    return pd.DataFrame({"n": orbit.steps, "x": orbit.xs, "y": orbit.ys})


def trajectory_to_frame(trajectory: OdeTrajectory) -> pd.DataFrame:
    return pd.DataFrame({"t": trajectory.t, "x": trajectory.xs, "y": trajectory.ys})


def orbit_to_json(orbit: Orbit) -> dict:
    return {
        "parameters": orbit.parameters.model_dump(),
        **orbit_summary(orbit),
        "record_every": orbit.record_every,
        "delta_sequence": orbit.monitors.delta_sequence.model_dump(),
        "states": [
            {"n": int(n), "x": float(x), "y": float(y)}
            for n, x, y in zip(orbit.steps, orbit.xs, orbit.ys)
        ],
    }


def read_orbit_csv(path: str | os.PathLike) -> pd.DataFrame:
    return pd.read_csv(path, float_precision="round_trip")
