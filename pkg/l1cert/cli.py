"""
Command-line front end.

    l1cert check INSTANCE [--x-from file|solve] [--J 2,3] [--oracle]
    l1cert constants INSTANCE [--C0 C0]
    l1cert solve INSTANCE --model bp|lasso|bpdn [--lambda L] [--delta D]
    l1cert compare INSTANCE
    l1cert sweep INSTANCE [--noise-draws N] [--delta-grid 0,0.01,0.1] [--out rows.csv] [--db URL]
    l1cert generate --m M --n N [--l L] --sparsity S [--psi identity|tight-frame|random] [--out FILE]

INSTANCE is a JSON instance file or the name of a bundled fixture. Reports go to
stdout as JSON (CSV for sweep); logs go to stderr.

Exit codes: 0 Unique or success, 1 NotUnique or violations, 2 Marginal,
3 domain error or refusal, 4 instance file error, 5 usage error.
"""
import argparse
import logging
import os
import sys
from datetime import datetime
from typing import Any, Dict, List, Optional, Sequence

from .certify import (
    MARGINAL,
    NOT_UNIQUE,
    UNIQUE,
    ProblemInstance,
    check_assumptions,
    verify_condition1,
    verify_condition1_prime,
)
from .compare import implication_tests
from .config import Settings, Tolerances
from .constants import l2_error_bounds, robustness_constants, thm2_bounds
from .database import DatabaseManager
from .errors import InstanceFileError, InvalidInputError, L1CertError
from .instances import FIXTURES, InstanceGenerator, PSI_KINDS, dumps, instance_to_dict, load_fixture, load_instance, save_instance
from .logger import RunLogger, setup_logger
from .solvers import MODELS, solve, solve_bp, uniqueness_oracle
from .sweep import SweepConfig, SweepRunner, count_violations, write_csv

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_NOT_UNIQUE = 1
EXIT_MARGINAL = 2
EXIT_DOMAIN = 3
EXIT_FILE = 4
EXIT_USAGE = 5

VERDICT_EXIT = {UNIQUE: EXIT_OK, NOT_UNIQUE: EXIT_NOT_UNIQUE, MARGINAL: EXIT_MARGINAL}
TOLERANCE_FLAGS = ("rank_tol", "feas_tol", "gap_tol", "strict_tol", "supp_tol", "solver_tol", "oracle_tol")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(EXIT_USAGE)


def _float_list(text: str) -> List[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma separated numbers, got {text!r}")


def _int_list(text: str) -> List[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma separated indices, got {text!r}")


def _emit(payload: Dict[str, Any]):
    sys.stdout.write(dumps(payload))
    sys.stdout.flush()


def _resolve_instance(ref: str) -> ProblemInstance:
    if not os.path.exists(ref) and ref.removesuffix(".json") in FIXTURES:
        return load_fixture(ref)
    return load_instance(ref)


def _tolerances(args) -> Tolerances:
    return Tolerances().with_overrides(**{k: getattr(args, k, None) for k in TOLERANCE_FLAGS})


def _signal(instance: ProblemInstance):
    """The point under test: x_bar when the file has one, x_star otherwise"""
    x = instance.x_bar if instance.x_bar is not None else instance.x_star
    if x is None:
        raise InvalidInputError("Instance has neither x_bar nor x_star; use --x-from solve")
    return x


def cmd_check(args, run_logger: RunLogger) -> int:
    instance = _resolve_instance(args.instance)
    tolerances = _tolerances(args)

    solved = None
    if args.x_from == "solve":
        solved = solve_bp(instance.phi, instance.psi, instance.b, tolerances)
        x = solved.x
    else:
        x = _signal(instance)

    if args.J:
        report = verify_condition1_prime(instance, x, args.J, tolerances)
    else:
        report = verify_condition1(instance, x, tolerances)
    run_logger.log_verdict(instance.name or "instance", report.verdict, report.lp_value)

    payload = report.to_dict()
    payload["x"] = x.tolist()
    payload["assumptions"] = check_assumptions(instance.phi, instance.psi).to_dict()
    if args.oracle:
        if solved is None:
            solved = solve_bp(instance.phi, instance.psi, instance.b, tolerances)
        oracle = uniqueness_oracle(instance.phi, instance.psi, instance.b, solved.objective, tolerances)
        payload["oracle"] = {
            "unique": oracle.unique,
            "optimal_value": oracle.optimal_value,
            "face_diameter": oracle.face_diameter,
            "ambiguous": oracle.ambiguous,
        }
    _emit(payload)
    return VERDICT_EXIT[report.verdict]


def cmd_constants(args, run_logger: RunLogger) -> int:
    instance = _resolve_instance(args.instance)
    tolerances = _tolerances(args)
    x = _signal(instance)

    assumptions = check_assumptions(instance.phi, instance.psi)
    report = verify_condition1(instance, x, tolerances)
    run_logger.log_verdict(instance.name or "instance", report.verdict, report.lp_value)
    if report.verdict != UNIQUE:
        logger.error(f"Refusing to compute robustness constants: verdict is {report.verdict}, "
                     f"but the error bounds assume a certified unique solution (kernel condition "
                     f"plus a dual certificate with ||y_J||_inf < 1)")
        logger.error(f"Assumptions: {assumptions.to_dict()}")
        return EXIT_DOMAIN

    constants = robustness_constants(instance.phi, instance.psi, report.certificate,
                                     report.pattern, args.C0, tolerances)
    payload = constants.to_dict()
    payload["assumptions"] = assumptions.to_dict()
    if instance.delta is not None:
        payload["delta"] = instance.delta
        payload["bounds"] = {**thm2_bounds(constants, instance.delta),
                             **l2_error_bounds(constants, instance.delta)}
        payload["lambda"] = constants.C0 * instance.delta
    _emit(payload)
    return EXIT_OK


def cmd_solve(args, run_logger: RunLogger) -> int:
    instance = _resolve_instance(args.instance)
    tolerances = _tolerances(args)
    parameter = None
    if args.model == "lasso":
        parameter = args.lam if args.lam is not None else instance.lam
        if parameter is None:
            raise UsageError("lasso needs --lambda or a \"lambda\" entry in the instance")
    elif args.model == "bpdn":
        parameter = args.delta if args.delta is not None else instance.delta
        if parameter is None:
            raise UsageError("bpdn needs --delta or a \"delta\" entry in the instance")

    result = solve(args.model, instance.phi, instance.psi, instance.b, parameter, tolerances)
    payload = result.to_dict()
    if parameter is not None:
        payload["lambda" if args.model == "lasso" else "delta"] = parameter
    _emit(payload)
    return EXIT_OK


def cmd_compare(args, run_logger: RunLogger) -> int:
    instance = _resolve_instance(args.instance)
    tolerances = _tolerances(args)
    report = implication_tests(instance, _signal(instance), tolerances=tolerances)
    run_logger.log_verdict(instance.name or "instance", report.condition1.verdict, report.condition1.lp_value)
    _emit(report.to_dict(noise_norm=instance.delta))
    return EXIT_OK if report.ok else EXIT_NOT_UNIQUE


def cmd_sweep(args, run_logger: RunLogger) -> int:
    instance = _resolve_instance(args.instance)
    config = SweepConfig(
        noise_draws=args.noise_draws,
        delta_grid=args.delta_grid,
        seed=args.seed,
        C0=args.C0,
        support_size=args.support_size,
        max_workers=args.workers,
        tolerances=_tolerances(args),
    )
    started_at = datetime.utcnow()
    records = SweepRunner(instance, config, run_logger).run()
    write_csv(records, args.out)

    if args.db:
        db = DatabaseManager(args.db)
        db.create_tables()
        db.save_sweep(instance.name or "instance", args.seed, records, started_at)

    violations = count_violations(records)
    if violations:
        logger.error(f"{violations} of {len(records)} sweep rows violate their bound")
        return EXIT_NOT_UNIQUE
    return EXIT_OK


def cmd_generate(args, run_logger: RunLogger) -> int:
    l = args.l if args.l is not None else args.n
    generator = InstanceGenerator(args.seed)
    try:
        if args.tail_mass is not None:
            instance = generator.approximately_sparse(args.m, args.n, l, args.sparsity, args.tail_mass,
                                                      args.psi, args.delta)
        else:
            instance = generator.generate(args.m, args.n, l, args.sparsity, args.psi, args.delta)
    except InvalidInputError as e:
        raise UsageError(str(e)) from e

    if args.out:
        save_instance(instance, args.out)
    else:
        _emit(instance_to_dict(instance))
    return EXIT_OK


def _tolerance_parent() -> argparse.ArgumentParser:
    parent = argparse.ArgumentParser(add_help=False)
    group = parent.add_argument_group("tolerances")
    for name in TOLERANCE_FLAGS:
        group.add_argument(f"--{name.replace('_', '-')}", dest=name, type=float, default=None)
    return parent


def build_parser(settings: Settings) -> argparse.ArgumentParser:
    parser = _Parser(prog="l1cert", description="Uniqueness certificates and robustness bounds "
                                                 "for l1-analysis recovery")
    parser.add_argument("--log-level", default=None,
                        choices=["DEBUG", "INFO", "WARNING", "ERROR"], help="Console log level")
    parser.add_argument("--log-file", default=settings.log_file, help="Also log to this file at DEBUG level")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    tol = _tolerance_parent()

    p = sub.add_parser("check", parents=[tol], help="Verify the uniqueness condition")
    p.add_argument("instance")
    p.add_argument("--x-from", choices=["file", "solve"], default="file", dest="x_from")
    p.add_argument("--J", type=_int_list, default=None,
                   help="Cosupport subset for the boxed variant (comma separated, 0-based)")
    p.add_argument("--oracle", action="store_true", help="Cross-check with the brute-force uniqueness oracle")
    p.set_defaults(handler=cmd_check)

    p = sub.add_parser("constants", parents=[tol], help="Compute robustness constants")
    p.add_argument("instance")
    p.add_argument("--C0", type=float, default=None)
    p.set_defaults(handler=cmd_constants)

    p = sub.add_parser("solve", parents=[tol], help="Solve bp, lasso or bpdn")
    p.add_argument("instance")
    p.add_argument("--model", choices=MODELS, default="bp")
    p.add_argument("--lambda", dest="lam", type=float, default=None)
    p.add_argument("--delta", type=float, default=None)
    p.set_defaults(handler=cmd_solve)

    p = sub.add_parser("compare", parents=[tol], help="Evaluate prior-work conditions and implications")
    p.add_argument("instance")
    p.set_defaults(handler=cmd_compare)

    p = sub.add_parser("sweep", parents=[tol], help="Noisy re-solves checked against the error bounds")
    p.add_argument("instance")
    p.add_argument("--noise-draws", type=int, default=10, dest="noise_draws")
    p.add_argument("--delta-grid", type=_float_list, default=[0.0, 1e-3, 1e-2, 1e-1], dest="delta_grid")
    p.add_argument("--seed", type=int, default=settings.seed)
    p.add_argument("--C0", type=float, default=None)
    p.add_argument("--support-size", type=int, default=None, dest="support_size")
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--out", default=None, help="CSV path (stdout when omitted)")
    p.add_argument("--db", default=settings.database_url, help="SQLAlchemy URL to store the run")
    p.set_defaults(handler=cmd_sweep)

    p = sub.add_parser("generate", help="Write a random instance")
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--l", type=int, default=None, help="Number of analysis atoms (default n)")
    p.add_argument("--sparsity", type=int, required=True)
    p.add_argument("--psi", choices=PSI_KINDS, default="identity")
    p.add_argument("--seed", type=int, default=settings.seed)
    p.add_argument("--delta", type=float, default=None)
    p.add_argument("--tail-mass", type=float, default=None, dest="tail_mass",
                   help="Draw an approximately sparse x* with this tail l1 mass")
    p.add_argument("--out", default=None)
    p.set_defaults(handler=cmd_generate)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        settings = Settings.from_env()
    except InvalidInputError as e:
        sys.stderr.write(f"l1cert: error: {e}\n")
        return EXIT_USAGE

    parser = build_parser(settings)
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else EXIT_USAGE

    level = logging.getLevelName(args.log_level) if args.log_level else settings.log_level
    setup_logger(level=level, log_file=args.log_file)
    run_logger = RunLogger()
    run_logger.start_run(args.command)

    try:
        return args.handler(args, run_logger)
    except UsageError as e:
        logger.error(str(e))
        return EXIT_USAGE
    except InstanceFileError as e:
        logger.error(str(e))
        return EXIT_FILE
    except L1CertError as e:
        logger.error(f"{type(e).__name__}: {e}")
        return EXIT_DOMAIN
    except ValueError as e:
        # DatabaseManager without a URL, malformed tolerance values
        logger.error(str(e))
        return EXIT_DOMAIN
    finally:
        run_logger.end_run()


if __name__ == "__main__":
    sys.exit(main())
