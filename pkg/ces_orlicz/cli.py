import argparse
import asyncio
import logging
import os
import sys
from pathlib import Path
from typing import Callable, NoReturn, Optional

from ces_orlicz import __version__
from ces_orlicz.certifier.certifier import (
    CertificationException,
    certify_all,
    certify_rotundity,
    format_certificate,
    reverify,
    solve_alpha,
)
from ces_orlicz.harness.models import SuiteConfig
from ces_orlicz.harness.suites import format_report, run_all_suites
from ces_orlicz.modular.evaluator import ModularException, luxemburg_norm, modular
from ces_orlicz.modular.models import Sequence
from ces_orlicz.modular.sequences import SequenceException, parse_sequence
from ces_orlicz.orlicz.function import PhiSpecException, describe, parse_phi
from ces_orlicz.orlicz.models import OrliczFunction
from ces_orlicz.witness.builder import (
    WitnessException,
    format_witness,
    sm_failure_witness,
    verify_witness,
)

logger = logging.getLogger(__name__)

PROG = "ces-orlicz"
DEFAULT_TOL = 1e-8
DEFAULT_TRIALS = 200
DEFAULT_SEED = 0
DEFAULT_PROCESSES = os.cpu_count() or 0

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_INPUT = 2


class InputError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> NoReturn:
        self.exit(EXIT_INPUT, f"{PROG}: error: {message}\n")


def _positive_float(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{text!r} is not a number")
    if not value > 0:
        raise argparse.ArgumentTypeError(f"{text!r} must be positive")
    return value


def _int_at_least(low: int) -> Callable[[str], int]:
    def convert(text: str) -> int:
        try:
            value = int(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"{text!r} is not an integer")
        if value < low:
            raise argparse.ArgumentTypeError(f"{text!r} must be at least {low}")
        return value

    return convert


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("-v", "--verbose", action="store_true", help="log at DEBUG")
    common.add_argument("-o", "--output", type=Path, help="write output to a file")

    tol = _Parser(add_help=False)
    tol.add_argument("--tol", type=_positive_float, default=DEFAULT_TOL)

    parser = _Parser(prog=PROG, description="Certified computations in ces_phi.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("phi-check", parents=[common], help="validate and describe phi")
    p.add_argument("phi", type=Path)

    p = sub.add_parser("certify", parents=[common, tol], help="all space certificates")
    p.add_argument("phi", type=Path)

    for name, summary in (("norm", "Luxemburg norm"), ("modular", "Cesaro modular")):
        p = sub.add_parser(name, parents=[common, tol], help=summary)
        p.add_argument("phi", type=Path)
        p.add_argument("sequence", type=Path)

    p = sub.add_parser("alpha", parents=[common, tol], help="solve f(alpha) = 1")
    p.add_argument("phi", type=Path)

    p = sub.add_parser("witness", parents=[common, tol], help="counterexample pair")
    p.add_argument("phi", type=Path)
    p.add_argument("--kind", choices=("sm", "rotund"), required=True)

    p = sub.add_parser("suite", parents=[common, tol], help="randomized suites")
    p.add_argument("phi", type=Path, nargs="+")
    p.add_argument("--seed", type=_int_at_least(0), default=DEFAULT_SEED)
    p.add_argument("--trials", type=_int_at_least(1), default=DEFAULT_TRIALS)
    p.add_argument("--processes", type=_int_at_least(0), default=DEFAULT_PROCESSES)

    return parser


def _read(path: Path) -> str:
    try:
        return path.read_text()
    except OSError as err:
        raise InputError(f"cannot read {path}: {err.strerror or err}")


def _load_phi(path: Path) -> OrliczFunction:
    try:
        return parse_phi(_read(path))
    except PhiSpecException as err:
        raise InputError(f"{path}: {err.code}: {err}")


def _load_sequence(path: Path) -> Sequence:
    try:
        return parse_sequence(_read(path))
    except SequenceException as err:
        raise InputError(f"{path}: {err.code}: {err}")


def _phi_check(args: argparse.Namespace) -> tuple[str, int]:
    info = describe(_load_phi(args.phi))
    lines = [
        f"a_phi: {info['a_phi']}",
        f"sai: {info['sai']}",
        f"delta2_at_zero: {info['delta2_at_zero']}",
        f"lower_index: {info['lower_index']}",
    ]
    for key in ("delta2_constants", "lower_index_constants"):
        if info[key]:
            lines.append(f"{key}: {info[key]}")
    return "\n".join(lines) + "\n", EXIT_OK


def _certify(args: argparse.Namespace) -> tuple[str, int]:
    phi = _load_phi(args.phi)
    certificates = certify_all(phi, args.tol)
    verified = all(reverify(phi, c, args.tol) for c in certificates)
    return (
        "\n".join(format_certificate(c) for c in certificates),
        EXIT_OK if verified else EXIT_FAILED,
    )


def _norm(args: argparse.Namespace) -> tuple[str, int]:
    phi, x = _load_phi(args.phi), _load_sequence(args.sequence)
    return f"{luxemburg_norm(phi, x, args.tol)}\n", EXIT_OK


def _modular(args: argparse.Namespace) -> tuple[str, int]:
    phi, x = _load_phi(args.phi), _load_sequence(args.sequence)
    return f"{modular(phi, x, args.tol)}\n", EXIT_OK


def _alpha(args: argparse.Namespace) -> tuple[str, int]:
    return f"{solve_alpha(_load_phi(args.phi), args.tol)}\n", EXIT_OK


def _witness(args: argparse.Namespace) -> tuple[str, int]:
    phi = _load_phi(args.phi)
    if args.kind == "sm":
        w = sm_failure_witness(phi, args.tol)
    else:
        certificate = certify_rotundity(phi, args.tol)
        if certificate.witness is None:
            return (
                f"rotundity: {certificate.verdict.value}, no witness"
                f" ({certificate.note})\n",
                EXIT_FAILED,
            )
        w = certificate.witness

    report = verify_witness(phi, w, 10 * args.tol)
    return format_witness(w), EXIT_OK if report.passed else EXIT_FAILED


def _suite(args: argparse.Namespace) -> tuple[str, int]:
    cfg = SuiteConfig(
        seed=args.seed,
        trials=args.trials,
        tol=args.tol,
        phi_pool=[_load_phi(path) for path in args.phi],
        processes=args.processes,
    )
    reports = asyncio.run(run_all_suites(cfg))
    passed = all(report.passed for report in reports)
    return format_report(reports), EXIT_OK if passed else EXIT_FAILED


COMMANDS = {
    "phi-check": _phi_check,
    "certify": _certify,
    "norm": _norm,
    "modular": _modular,
    "alpha": _alpha,
    "witness": _witness,
    "suite": _suite,
}


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        stream=sys.stderr,
        format="%(levelname)s %(name)s: %(message)s",
    )

    try:
        text, status = COMMANDS[args.command](args)
    except InputError as err:
        print(f"{PROG}: error: {err}", file=sys.stderr)
        return EXIT_INPUT
    except (
        CertificationException,
        ModularException,
        WitnessException,
    ) as err:
        text, status = f"{args.command}: {err.code}: {err}\n", EXIT_FAILED

    if args.output is not None:
        try:
            args.output.write_text(text)
        except OSError as err:
            print(f"{PROG}: error: cannot write {args.output}: {err}", file=sys.stderr)
            return EXIT_INPUT
    else:
        sys.stdout.write(text)

    logger.debug("%s exited with %d", args.command, status)
    return status
