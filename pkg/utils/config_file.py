import logging
import os

from dotenv import dotenv_values

logger = logging.getLogger(__name__)

DEFAULT_SEED = 0
SEED_ENV = "MOSQDYN_SEED"
RANGE_KEYS = {"alpha_range", "beta_range", "mu_range"}


def load_config_file(path: str) -> dict:
    """
    Read a flat key=value file whose keys mirror the command-line flags.

    Dashes in keys become underscores; range keys hold ``lo hi steps``.
    Scalar values stay strings so argparse converts them like flag values.
    """
    if not os.path.isfile(path):
        raise FileNotFoundError(f"config file {path} does not exist")
    values = {}
    for key, value in dotenv_values(path).items():
        if value is None:
            logger.warning(f"config key {key} has no value, ignored")
            continue
        name = key.strip().lower().replace("-", "_")
        if name in RANGE_KEYS:
            lo, hi, steps = value.split()
            values[name] = [float(lo), float(hi), int(steps)]
        else:
            values[name] = value.strip()
    logger.debug(f"loaded {len(values)} settings from {path}")
    return values


def resolve_seed(cli_seed: int | None) -> int:
    """Flag first, then the environment, then the built-in default."""
    if cli_seed is not None:
        return cli_seed
    env_seed = os.getenv(SEED_ENV)
    if env_seed:
        return int(env_seed)
    return DEFAULT_SEED
