import argparse
import logging
import math
import signal
import sys
from typing import Optional

import numpy as np

from .errors import LabError, NonPSDError
from .estimators.intersection import sample_intersection
from .estimators.local_time import KernelParams, sample_local_time, tail_curve
from .simulator.covariance import CovKind, CovModel
from .simulator.sampling import sample_process
from .theory import rkhs
from .theory.constants import L_bounds, constants_table
from .theory.moments import (
    estimate_L_theta,
    exp_moment,
    exp_moment_bracket,
    log_moment_growth,
    moment_unit_time,
)
from .utils.loader_and_saver import (
    build_report,
    handler,
    load_config,
    resolve_config,
    save_csv,
    save_paths_binary,
    save_paths_csv,
    save_report,
    save_rows,
)
from .utils.statistics import summarize
from .utils.verification import list_suites, verify_suite

LOGGER = logging.getLogger("fbm_lab")

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2
EXIT_DOMAIN = 3
EXIT_NUMERIC = 4

OVERRIDABLE = (
    "H",
    "d",
    "p",
    "n",
    "T",
    "eps",
    "replicas",
    "m_max",
    "budget",
    "seed",
    "out",
    "format",
    "workers",
    "verbose",
)

REGIMES = {
    "localtime": "check_local_time_regime",
    "moments": "check_local_time_regime",
    "intersect": "check_intersection_regime",
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument(
        "-config",
        "--configurationFile",
        default=None,
        help="Path to a YAML file containing the configuration of the experiment",
    )
    common.add_argument("--H", type=float, help="Hurst index")
    common.add_argument("--d", type=int, help="space dimension")
    common.add_argument("--p", type=int, help="number of intersecting processes")
    common.add_argument("--n", type=int, help="grid steps")
    common.add_argument("--T", type=float, help="time horizon")
    common.add_argument("--eps", type=float, help="kernel variance")
    common.add_argument("--replicas", type=int)
    common.add_argument("--m-max", dest="m_max", type=int)
    common.add_argument("--budget", type=int, help="importance samples per order")
    common.add_argument("--seed", type=int)
    common.add_argument("--out", help="output file, stdout when omitted")
    common.add_argument("--format", choices=("json", "csv"))
    common.add_argument("--workers", type=int)
    common.add_argument("-v", "--verbose", action="count", default=None)

    parser = argparse.ArgumentParser(
        prog="fbm-lab",
        description="Local times of fractional Brownian motion",
    )
    commands = parser.add_subparsers(dest="subcommand", required=True)
    processes = [kind.value for kind in CovKind]

    simulate = commands.add_parser("simulate", parents=[common])
    simulate.add_argument("--process", choices=processes, default="fbm")
    simulate.add_argument("--binary", help="also write the binary path container")

    localtime = commands.add_parser("localtime", parents=[common])
    localtime.add_argument("--process", choices=("fbm", "rl"), default="fbm")
    localtime.add_argument("--x", type=float, default=0.0, help="level")
    localtime.add_argument("--tail-levels", type=int, default=20)

    intersect = commands.add_parser("intersect", parents=[common])
    intersect.add_argument("--process", choices=("fbm", "rl"), default="rl")

    commands.add_parser("moments", parents=[common])
    commands.add_parser("constants", parents=[common])

    rkhs_parser = commands.add_parser("rkhs", parents=[common])
    rkhs_parser.add_argument("--action", choices=("norm", "demo", "K_a"), default="K_a")
    rkhs_parser.add_argument("--input", help="CSV with columns t,f for --action norm")
    rkhs_parser.add_argument("--a", type=float, default=0.2, help="junction time")

    verify = commands.add_parser("verify", parents=[common])
    verify.add_argument("--suite", choices=list_suites())
    verify.add_argument("--list", action="store_true", help="print the suite names")
    return parser


def _kernel(config) -> Optional[KernelParams]:
    return None if config.eps is None else KernelParams(config.eps)


def run_simulate(config, args):
    kind = CovKind(args.process)
    batch = sample_process(
        kind,
        config.params,
        config.n,
        config.T,
        config.seed,
        config.replicas,
        workers=config.workers,
    )
    if args.binary:
        save_paths_binary(batch, args.binary, kind, config.H)
    if config.format == "csv":
        save_paths_csv(batch, config.out)
        return None, EXIT_OK
    results = {
        "process": kind.value,
        "metadata": batch.metadata,
        "times": batch.times,
        "values": batch.values,
    }
    return results, EXIT_OK


def run_localtime(config, args):
    model = CovModel(CovKind(args.process), config.params)
    sample = sample_local_time(
        model,
        config.T,
        args.x,
        _kernel(config),
        config.n,
        config.seed,
        config.replicas,
        workers=config.workers,
    )
    if config.format == "csv":
        columns = [np.arange(len(sample)), sample.values]
        save_csv(config.out, ["replica", "local_time"], columns)
        return None, EXIT_OK
    top = float(np.quantile(sample.values, 0.99)) if len(sample) else 0.0
    levels = np.linspace(0.0, top, args.tail_levels + 1)[1:]
    results = {
        "summary": summarize(sample.values, "local_time"),
        "sample": sample,
        "tail": tail_curve(sample, levels),
    }
    return results, EXIT_OK


def run_intersect(config, args):
    sample = sample_intersection(
        CovKind(args.process),
        config.params,
        config.T,
        _kernel(config),
        config.n,
        config.seed,
        config.replicas,
        workers=config.workers,
    )
    if config.format == "csv":
        columns = [np.arange(len(sample)), sample.values]
        save_csv(config.out, ["replica", "alpha"], columns)
        return None, EXIT_OK
    return {"summary": summarize(sample.values, "alpha"), "sample": sample}, EXIT_OK


def run_moments(config, args):
    params = config.params
    unit, exponential, brackets = [], [], []
    budget, seed, verbose = config.budget, config.seed, config.verbose
    for m in range(1, config.m_max + 1):
        unit.append(moment_unit_time(m, params, budget, seed, verbose))
        exponential.append(exp_moment(m, params, budget, seed, verbose))
        brackets.append(exp_moment_bracket(m, params))
    if config.format == "csv":
        columns = [
            [estimate.m for estimate in unit],
            [estimate.value for estimate in unit],
            [estimate.stderr for estimate in unit],
            [estimate.value for estimate in exponential],
            [estimate.stderr for estimate in exponential],
        ]
        save_csv(config.out, ["m", "unit", "unit_stderr", "exp", "exp_stderr"], columns)
        return None, EXIT_OK
    growth_bracket = L_bounds(params).mapped(math.log, "log L")
    results = {
        "unit_time": unit,
        "exponential_time": exponential,
        "brackets": brackets,
        "growth": log_moment_growth(exponential, 1.0, growth_bracket),
        "L_theta": estimate_L_theta(params, config.m_max, config.budget, config.seed),
    }
    return results, EXIT_OK


def _flatten(table: dict, prefix: str = ""):
    for name, value in table.items():
        if isinstance(value, dict) and "lower" in value:
            yield [prefix + name, value["lower"], value["upper"], value["point"]]
        elif isinstance(value, dict):
            yield from _flatten(value, f"{prefix}{name}.")
        else:
            yield [prefix + name, value, value, value]


def run_constants(config, args):
    table = constants_table(config.params)
    if config.format == "csv":
        save_rows(config.out, ["name", "lower", "upper", "point"], _flatten(table))
        return None, EXIT_OK
    return table, EXIT_OK


def run_rkhs(config, args):
    if args.action == "norm":
        if args.input is None:
            msg = "--action norm needs --input"
            raise LabError(msg)
        table = np.loadtxt(args.input, delimiter=",", skiprows=1, ndmin=2)
        function = rkhs.RkhsFunction.from_samples(table[:, 0], table[:, 1], config.H)
        norm, error = rkhs.rkhs_norm_with_error(function)
        return {"norm": norm, "discretization": error, "T": function.T}, EXIT_OK
    if args.action == "demo":
        sample = rkhs.sample_Z_a(
            config.H,
            args.a,
            config.T,
            config.n,
            config.seed,
            config.replicas,
            include_values=True,
        )
        paths = [sample.filled(index) for index in range(len(sample))]
        if config.format == "csv":
            header = ["t"] + [f"r{index}" for index in range(len(paths))]
            columns = [paths[0].times] + [path.values for path in paths]
            save_csv(config.out, header, columns)
            return None, EXIT_OK
        return {"a": args.a, "paths": paths}, EXIT_OK
    estimate = rkhs.estimate_K_a(
        config.H, args.a, config.replicas, config.seed, config.T
    )
    return {"K_a": estimate}, EXIT_OK


def run_verify(config, args, partial: dict):
    if args.list:
        print("\n".join(list_suites()))
        return None, EXIT_OK
    name = args.suite or config.options.get("suite", "core")

    def progress(checks):
        partial["results"] = {"suite": name, "checks": list(checks)}

    report = verify_suite(name, config, on_check=progress)
    return report, report.exit_code


HANDLERS = {
    "simulate": run_simulate,
    "localtime": run_localtime,
    "intersect": run_intersect,
    "moments": run_moments,
    "constants": run_constants,
    "rkhs": run_rkhs,
}


def run(argv=None) -> int:
    """Parse ``argv``, run one experiment and return the exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE

    overrides = {key: getattr(args, key) for key in OVERRIDABLE}
    try:
        params = load_config(args.configurationFile)
        config = resolve_config(args.subcommand, params, overrides)
    except (OSError, LabError) as exc:
        print(f"fbm-lab: {exc}", file=sys.stderr)
        return EXIT_USAGE

    logging.basicConfig(
        level=[logging.WARNING, logging.INFO, logging.DEBUG][min(config.verbose, 2)],
        stream=sys.stderr,
        format="%(asctime)s %(name)s %(levelname)s %(message)s",
    )
    partial = build_report(config, None)
    signal.signal(
        signal.SIGINT,
        lambda signum, frame: handler(
            signum=signum,
            frame=frame,
            name=config.subcommand,
            partial=partial,
            path=config.out,
        ),
    )

    try:
        if args.subcommand in REGIMES:
            getattr(config.params, REGIMES[args.subcommand])()
        if args.subcommand == "verify":
            results, code = run_verify(config, args, partial)
        else:
            results, code = HANDLERS[args.subcommand](config, args)
    except NonPSDError as exc:
        LOGGER.error("Numeric failure: %s", exc)
        return EXIT_NUMERIC
    except (LabError, ValueError) as exc:
        LOGGER.error("%s", exc)
        print(f"fbm-lab: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except ArithmeticError as exc:
        LOGGER.error("Numeric failure: %s", exc)
        return EXIT_NUMERIC
    if results is not None:
        save_report(build_report(config, results), config.out)
    return code


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
