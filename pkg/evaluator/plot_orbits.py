import argparse
import logging
import pathlib

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from utils.clogger import _set_logger
from utils.export import read_orbit_csv

logger = logging.getLogger(__name__)


def get_args():
    parser = argparse.ArgumentParser(description="Render orbit CSV files to a PNG.")
    parser.add_argument("--inputs", nargs="+", required=True, help="orbit CSVs with columns n,x,y")
    parser.add_argument("--out", type=str, default="./evaluator/output/orbits.png")
    parser.add_argument("--max-steps", type=int, default=None, help="only plot steps up to this index")
    return parser.parse_args()


def plot_orbits(inputs: list[str], out: str, max_steps: int | None = None) -> None:
    fig, (ax_time, ax_phase) = plt.subplots(1, 2, figsize=(12, 5))
    for path in inputs:
        df = read_orbit_csv(path)
        if max_steps is not None:
            df = df[df["n"] <= max_steps]
        label = pathlib.Path(path).stem
        ax_time.plot(df["n"], df["x"], label=f"{label} larvae")
        ax_time.plot(df["n"], df["y"], "--", label=f"{label} adults")
        ax_phase.plot(df["x"], df["y"], label=label)
        ax_phase.scatter(df["x"].iloc[0], df["y"].iloc[0], marker="o", s=15)
    ax_time.set_xlabel("n")
    ax_time.set_ylabel("count")
    ax_time.legend(fontsize="small")
    ax_phase.set_xlabel("larvae x")
    ax_phase.set_ylabel("adults y")
    ax_phase.legend(fontsize="small")
    fig.tight_layout()
    pathlib.Path(out).parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out, dpi=150)
    plt.close(fig)
    logger.info(f"saved {out}")


if __name__ == "__main__":
    _set_logger(exp_dir=pathlib.Path("./logs"), file_name="plot_orbits.log")
    args = get_args()
    plot_orbits(args.inputs, args.out, args.max_steps)
