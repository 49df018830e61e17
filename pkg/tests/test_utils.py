import logging
import os

import pandas as pd
import pytest

from engine.reference_ode import integrate_ode
from engine.schemas import OdeConfig, Parameters, State
from utils.clogger import _set_logger
from utils.config_file import load_config_file, resolve_seed
from utils.export import (
    atomic_write_text,
    frame_to_csv,
    read_orbit_csv,
    to_json,
    trajectory_to_frame,
    write_frame,
)


def test_config_file_keys_and_ranges(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(
        "# comment\nALPHA=0.6\nconv-tol=1e-6\nbeta-range=0.1 0.9 5\nempty\n",
        encoding="utf-8",
    )
    values = load_config_file(str(cfg))
    assert values == {"alpha": "0.6", "conv_tol": "1e-6", "beta_range": [0.1, 0.9, 5]}


def test_config_file_missing(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_config_file(str(tmp_path / "nope.cfg"))


def test_seed_precedence(monkeypatch):
    assert resolve_seed(None) == 0
    monkeypatch.setenv("MOSQDYN_SEED", "42")
    assert resolve_seed(None) == 42
    assert resolve_seed(7) == 7


def test_atomic_write_replaces_file(tmp_path):
    path = tmp_path / "nested" / "report.txt"
    atomic_write_text(path, "first\n")
    atomic_write_text(path, "second\n")
    assert path.read_text(encoding="utf-8") == "second\n"
    assert os.listdir(path.parent) == ["report.txt"]


def test_atomic_write_failure_keeps_previous_content(tmp_path, monkeypatch):
    path = tmp_path / "report.txt"
    atomic_write_text(path, "kept\n")

    def refuse(src, dst):
        raise OSError("disk full")

    monkeypatch.setattr(os, "replace", refuse)
    with pytest.raises(OSError):
        atomic_write_text(path, "lost\n")
    assert path.read_text(encoding="utf-8") == "kept\n"
    assert os.listdir(tmp_path) == ["report.txt"]


def test_csv_floats_round_trip(tmp_path):
    values = [0.1, 1.0 / 3.0, 5e-324, 1.7976931348623157e308, 2.0**-40]
    df = pd.DataFrame({"n": range(len(values)), "x": values, "y": values[::-1]})
    assert "\r" not in frame_to_csv(df)
    path = tmp_path / "orbit.csv"
    write_frame(df, path)
    back = read_orbit_csv(path)
    assert back["x"].tolist() == values
    assert back["y"].tolist() == values[::-1]


def test_trajectory_frame():
    trajectory = integrate_ode(
        Parameters(alpha=0.5, beta=0.3, mu=0.6),
        State(x=1.0, y=1.0),
        OdeConfig(step=0.5, t_end=1.0),
    )
    df = trajectory_to_frame(trajectory)
    assert list(df.columns) == ["t", "x", "y"]
    assert df["t"].tolist() == [0.0, 0.5, 1.0]


def test_to_json_keeps_unicode():
    assert to_json({"name": "α"}) == '{\n    "name": "α"\n}\n'


def test_set_logger_levels(tmp_path):
    root = _set_logger(tmp_path / "logs", logging.DEBUG, logging.WARNING, file_name="run.log")
    assert root.level == logging.DEBUG
    assert len(root.handlers) == 2
    logging.getLogger("engine.test").debug("only in the file")
    text = (tmp_path / "logs" / "run.log").read_text(encoding="utf-8")
    assert "only in the file" in text
    _set_logger(tmp_path / "logs", file_name="again.log")
    assert len(logging.getLogger().handlers) == 2
