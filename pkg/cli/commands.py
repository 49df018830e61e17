import argparse
import json
import logging
import os
import pathlib
import sys

from dotenv import load_dotenv

from engine.errors import DomainError, IntegrationError, PreconditionError, VerificationError
from engine.model_core import require_valid, validate_parameters
from engine.reference_ode import compute_r0, equilibrium_report
from engine.schemas import OdeConfig, OrbitConfig, Parameters, State, SweepSpec
from engine.spectral import classify_origin, expected_classification
from engine.trajectory import iterate_orbit
from evaluator.certification import (
    CertifyOptions,
    certify_parameters,
    period_certificate,
    results_frame,
    run_trials,
)
from evaluator.compare import compare_routes
from evaluator.sweep import run_sweep, sweep_passed, sweep_summary
from utils.clogger import _set_logger
from utils.config_file import load_config_file, resolve_seed
from utils.export import (
    atomic_write_text,
    frame_to_csv,
    orbit_to_frame,
    orbit_to_json,
    to_json,
    write_frame,
    write_json,
)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_IO = 3
EXIT_FAILED = 4


def _add_parameter_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--alpha", type=float, default=None, help="maximum emergence rate")
    parser.add_argument("--beta", type=float, default=None, help="adult birth rate")
    parser.add_argument("--mu", type=float, default=None, help="adult death rate")
    parser.add_argument("--d0", type=float, default=0.0, help="density-independent larvae death")
    parser.add_argument("--d1", type=float, default=0.0, help="density-dependent larvae death")


def _add_start_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--x0", type=float, default=1.0, help="initial larvae")
    parser.add_argument("--y0", type=float, default=1.0, help="initial adults")


def _add_orbit_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--steps", type=int, default=1_000_000, help="maximum iterations")
    parser.add_argument("--conv-tol", type=float, default=1e-8)
    parser.add_argument("--div-threshold", type=float, default=1e3)
    parser.add_argument("--record-every", type=int, default=1)


def get_parser() -> tuple[argparse.ArgumentParser, dict[str, argparse.ArgumentParser]]:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=str, default=None, help="key=value file mirroring flags")
    common.add_argument("--log-level", type=str, default="WARNING")

    parser = argparse.ArgumentParser(
        prog="mosqdyn", description="Discrete-time wild mosquito dynamics engine."
    )
    subparsers = parser.add_subparsers(dest="command", required=True)
    commands = {}

    simulate = subparsers.add_parser("simulate", parents=[common], help="iterate one orbit")
    _add_parameter_flags(simulate)
    _add_start_flags(simulate)
    _add_orbit_flags(simulate)
    simulate.add_argument("--out", type=str, default=None, help="orbit file, stdout if omitted")
    simulate.add_argument("--format", choices=["csv", "json"], default="csv")
    simulate.set_defaults(func=cmd_simulate)
    commands["simulate"] = simulate

    classify = subparsers.add_parser("classify", parents=[common], help="classify the origin")
    _add_parameter_flags(classify)
    classify.set_defaults(func=cmd_classify)
    commands["classify"] = classify

    sweep = subparsers.add_parser("sweep", parents=[common], help="phase diagram over a grid")
    for name in ("alpha", "beta", "mu"):
        sweep.add_argument(
            f"--{name}-range",
            nargs=3,
            type=float,
            default=None,
            metavar=("LO", "HI", "STEPS"),
        )
    sweep.add_argument("--d0", type=float, default=0.0)
    sweep.add_argument("--d1", type=float, default=0.0)
    _add_start_flags(sweep)
    _add_orbit_flags(sweep)
    sweep.add_argument("--out", type=str, default="./output/sweep.csv")
    sweep.add_argument("--workers", type=int, default=1)
    sweep.set_defaults(func=cmd_sweep)
    commands["sweep"] = sweep

    certify = subparsers.add_parser("certify", parents=[common], help="run the certificate suite")
    _add_parameter_flags(certify)
    _add_start_flags(certify)
    _add_orbit_flags(certify)
    certify.add_argument("--p-max", type=int, default=8)
    certify.add_argument("--grid-n", type=int, default=10_000)
    certify.add_argument("--trials", type=int, default=0, help="extra random parameter draws")
    certify.add_argument("--seed", type=int, default=None)
    certify.add_argument("--out", type=str, default=None, help="JSON report")
    certify.set_defaults(func=cmd_certify)
    commands["certify"] = certify

    compare = subparsers.add_parser("compare", parents=[common], help="discrete vs continuous")
    _add_parameter_flags(compare)
    _add_start_flags(compare)
    _add_orbit_flags(compare)
    compare.add_argument("--t-end", type=float, default=500.0)
    compare.add_argument("--step", type=float, default=0.01)
    compare.add_argument("--ode-tol", type=float, default=1e-6)
    compare.add_argument("--out", type=str, default="./output/compare.csv")
    compare.set_defaults(func=cmd_compare)
    commands["compare"] = compare

    return parser, commands


def parse_args(argv: list[str] | None = None) -> argparse.Namespace:
    """Parse flags; values from --config fill in whatever the flags leave unset."""
    parser, commands = get_parser()
    args = parser.parse_args(argv)
    if args.config:
        sub = commands[args.command]
        known = {action.dest for action in sub._actions}
        values = load_config_file(args.config)
        unknown = sorted(set(values) - known)
        if unknown:
            raise PreconditionError(f"unknown config keys: {', '.join(unknown)}")
        sub.set_defaults(**values)
        args = parser.parse_args(argv)
    return args


def _parameters(args: argparse.Namespace) -> Parameters:
    missing = [name for name in ("alpha", "beta", "mu") if getattr(args, name) is None]
    if missing:
        raise PreconditionError(f"missing parameters: {', '.join('--' + m for m in missing)}")
    return Parameters(alpha=args.alpha, beta=args.beta, mu=args.mu, d0=args.d0, d1=args.d1)


def _orbit_config(args: argparse.Namespace) -> OrbitConfig:
    return OrbitConfig(
        max_iters=args.steps,
        conv_tol=args.conv_tol,
        div_threshold=args.div_threshold,
        record_every=args.record_every,
    )


def _start(args: argparse.Namespace) -> State:
    return State(x=args.x0, y=args.y0)


def cmd_simulate(args: argparse.Namespace) -> int:
    p = _parameters(args)
    require_valid(p, "quadrant")
    orbit = iterate_orbit(p, _start(args), _orbit_config(args))
    if args.format == "csv":
        text = frame_to_csv(orbit_to_frame(orbit))
    else:
        text = to_json(orbit_to_json(orbit))
    line = f"{orbit.verdict.value} n_steps={orbit.n_steps} y_limit_estimate={orbit.y_limit_estimate:.12g}"
    if args.out:
        atomic_write_text(args.out, text)
        print(line)
    else:
        sys.stdout.write(text)
        print(line, file=sys.stderr)
    return EXIT_OK


def cmd_classify(args: argparse.Namespace) -> int:
    p = _parameters(args)
    report = validate_parameters(p, "W0")
    if not (report.keeps_quadrant and report.no_larval_death):
        problems = [m for m in report.messages if not m.startswith("beta=mu")]
        raise PreconditionError("; ".join(problems))
    spectral = classify_origin(p)
    result = {
        "parameters": p.model_dump(),
        "lambda1": spectral.lambda1,
        "lambda2": spectral.lambda2,
        "classification": spectral.classification.value,
        "expected": expected_classification(p).value,
        "r0": compute_r0(p),
        "jacobian": spectral.jacobian,
    }
    sys.stdout.write(to_json(result))
    return EXIT_OK


def cmd_sweep(args: argparse.Namespace) -> int:
    ranges = {}
    for name in ("alpha_range", "beta_range", "mu_range"):
        value = getattr(args, name)
        flag = f"--{name.replace('_', '-')}"
        if value is None:
            raise PreconditionError(f"{flag} is required")
        lo, hi, steps = value
        if not float(steps).is_integer():
            raise PreconditionError(f"{flag} needs an integer number of steps, got {steps}")
        ranges[name] = (float(lo), float(hi), int(steps))
    spec = SweepSpec(
        **ranges,
        d0=args.d0,
        d1=args.d1,
        x0=args.x0,
        y0=args.y0,
        orbit=_orbit_config(args),
    )
    df = run_sweep(spec, workers=args.workers)
    write_frame(df, args.out)
    print(sweep_summary(df).to_markdown(index=False))
    passed = sweep_passed(df)
    if not passed:
        bad = df[df["status"].isin(["disagree", "error"])]
        logger.error(f"{len(bad)} cell(s) disagree, first: {bad.iloc[0].to_dict()}")
    return EXIT_OK if passed else EXIT_FAILED


def cmd_certify(args: argparse.Namespace) -> int:
    p = _parameters(args)
    require_valid(p, "W0")
    options = CertifyOptions(p_max=args.p_max, grid_n=args.grid_n, orbit=_orbit_config(args))
    results = certify_parameters(p, _start(args), options)
    frame = results_frame(results)
    print(frame.to_markdown(index=False))
    report = {
        "parameters": p.model_dump(),
        "start": _start(args).model_dump(),
        "certificates": [r.model_dump(exclude={"payload"}) for r in results],
        "period_certificate": period_certificate(results),
    }
    inconclusive = [r.name for r in results if r.inconclusive]
    if inconclusive:
        print(f"inconclusive: {', '.join(inconclusive)}")
    passed = all(r.passed for r in results)

    if args.trials > 0:
        seed = resolve_seed(args.seed)
        print(f"random trials: {args.trials}, seed {seed}")
        trials = run_trials(args.trials, seed, options)
        failed = trials[~trials["passed"]]
        print(f"trials passed: {len(trials) - len(failed)}/{len(trials)}")
        if len(failed):
            print(failed.to_markdown(index=False))
        report["seed"] = seed
        report["trials"] = json.loads(trials.to_json(orient="records"))
        passed = passed and failed.empty

    if args.out:
        write_json(report, args.out)
    if not passed:
        print(f"certification failed for {p.model_dump()} from {_start(args).model_dump()}")
    return EXIT_OK if passed else EXIT_FAILED


def cmd_compare(args: argparse.Namespace) -> int:
    p = _parameters(args)
    require_valid(p, "quadrant")
    ode_cfg = OdeConfig(step=args.step, t_end=args.t_end, conv_tol=args.ode_tol)
    frame, statement = compare_routes(p, _start(args), _orbit_config(args), ode_cfg)
    statement["equilibrium_report"] = equilibrium_report(p).model_dump(mode="json")
    write_frame(frame, args.out)
    sys.stdout.write(to_json(statement))
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    load_dotenv()
    try:
        args = parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else EXIT_INVALID
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO

    level = getattr(logging, args.log_level.upper(), logging.WARNING)
    log_dir = pathlib.Path(os.getenv("MOSQDYN_LOG_DIR", "./logs"))
    _set_logger(
        exp_dir=log_dir,
        logging_level=min(level, logging.INFO),
        logging_level_stdout=level,
        file_name=f"{args.command}.log",
    )
    try:
        return args.func(args)
    except (VerificationError, IntegrationError) as e:
        logger.error(f"{args.command} failed: {e}")
        print(f"error: {e}", file=sys.stderr)
        return EXIT_FAILED
    except (PreconditionError, DomainError, ValueError) as e:
        logger.error(f"{args.command}: invalid input: {e}")
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as e:
        logger.error(f"{args.command}: I/O failure: {e}")
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO
