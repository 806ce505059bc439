"""Command-line interface.

.. code-block:: text

    fracbvp solve   SPEC [--n N] [--tol T] [--damping L] [--max-iter K] [--out CSV] [--no-certify]
    fracbvp certify SPEC [--samples K] [--out FILE]
    fracbvp check   SPEC
    fracbvp green   --alpha A [--grid N] [--out CSV]

Errors are reported on standard error as a single line
``fracbvp: error[CODE]: detail`` and mapped to exit codes: 2 for invalid
problems, 3 for nonconvergence, 4 for certificate failures and 5 for
internal or quadrature errors.
"""

from __future__ import annotations

import argparse
import io
import json
import logging
import sys
from dataclasses import dataclass, field

import numpy as np

from fracbvp.errors import CertificateError, DomainError, FracBVPError

__all__ = ["CommandOutcome", "main", "run"]

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_NONCONVERGENCE = 3
EXIT_CERTIFICATE = 4
EXIT_INTERNAL = 5

ERROR_CODES = {
    EXIT_INVALID: "INVALID_SPEC",
    EXIT_NONCONVERGENCE: "NONCONVERGENCE",
    EXIT_CERTIFICATE: "CERTIFICATE",
    EXIT_INTERNAL: "INTERNAL",
}

FLOAT_FORMAT = "%.17g"
DEFAULT_GREEN_GRID = 11


@dataclass
class CommandOutcome:
    exit_code: int = EXIT_OK
    artifacts: list[str] = field(default_factory=list)


class _Failure(Exception):
    def __init__(self, exit_code: int, detail: str):
        super().__init__(detail)
        self.exit_code = exit_code


# {{{ output helpers


def _write_csv(path: str | None, header: str, columns: list[np.ndarray], out) -> str | None:
    buffer = io.StringIO()
    np.savetxt(buffer, np.column_stack(columns), fmt=FLOAT_FORMAT, delimiter=",",
               header=header, comments="")
    text = buffer.getvalue()
    if path is None:
        out.write(text)
        return None
    with open(path, "w", encoding="utf-8", newline="\n") as outfile:
        outfile.write(text)
    return path


def _write_json(path: str | None, data: dict, out) -> str | None:
    text = json.dumps(data, sort_keys=True, indent=2, allow_nan=True) + "\n"
    if path is None:
        out.write(text)
        return None
    with open(path, "w", encoding="utf-8", newline="\n") as outfile:
        outfile.write(text)
    return path


# }}}


# {{{ subcommands


def _cmd_solve(args, out, err) -> list[str]:
    from fracbvp.certify import certify, classify_nonlinearity
    from fracbvp.operator import apply_S
    from fracbvp.problem import load_problem
    from fracbvp.solver import picard_solve

    problem = load_problem(args.spec)
    changes = {
        key: value
        for key, value in (("n", args.n), ("tol", args.tol), ("damping", args.damping),
                           ("max_iter", args.max_iter))
        if value is not None
    }
    if changes:
        problem = problem.with_solver(**changes)

    certificate = None
    if not args.no_certify and classify_nonlinearity(problem.nonlinearity).cls in ("A1", "A2"):
        try:
            certificate = certify(problem)
        except CertificateError as exc:
            err.write(f"fracbvp: warning: no certificate to seed the iteration: {exc}\n")

    report = picard_solve(problem, certificate=certificate)
    out.write(report.summary() + "\n")

    u = report.solution
    from fracbvp.operator import OperatorWorkspace

    su = apply_S(OperatorWorkspace(problem, u.grid), u)
    t = u.grid.t
    with np.errstate(invalid="ignore"):
        weighted = t ** problem.order.p * u.d_alpha_minus_1
    residual = np.abs(u.values - su.values)
    written = _write_csv(args.out, "t,u,t_pow_D,residual", [t, u.values, weighted, residual], out)
    return [written] if written else []


def _cmd_certify(args, out, err) -> list[str]:
    from fracbvp.certify import certify, classify_nonlinearity, verify_certificate_by_sampling
    from fracbvp.problem import load_problem

    problem = load_problem(args.spec)
    classification = classify_nonlinearity(problem.nonlinearity)
    out.write(f"class                {classification.cls}  ({classification.detail})\n")
    certificate = certify(problem)
    for name in ("case", "small_radius", "large_radius", "rate_small", "rate_large",
                 "threshold", "integral_small", "integral_mid", "valid"):
        out.write(f"{name:<21}{getattr(certificate, name)}\n")
    if not certificate.valid:
        raise CertificateError("certificate constants are inconsistent (need 0 < r < R)")

    report = verify_certificate_by_sampling(problem, certificate, args.samples)
    out.write(f"sampling violations  {report.violations} of {2 * len(report.samples)} checks\n")
    out.write(f"worst margin         {report.worst_margin:.6e}\n")

    data = {
        "certificate": certificate.to_dict(),
        "classification": {
            "class": classification.cls, "p": classification.p,
            "f0": classification.f0, "f_inf": classification.f_inf,
        },
        "verification": {
            "family_size": args.samples,
            "violations": report.violations,
            "worst_margin": report.worst_margin,
            "samples": list(report.samples),
        },
    }
    written = _write_json(args.out, data, out) if args.out else None
    if report.violations:
        raise CertificateError(f"sampling found {report.violations} boundary violations")
    return [written] if written else []


def _cmd_check(args, out, err) -> list[str]:
    from fracbvp.problem import PROBE_INTERVALS, load_problem
    from fracbvp.quadrature import check_H1, check_H2

    problem = load_problem(args.spec)
    h1 = check_H1(problem.order, problem.weight)
    out.write(f"H1  {h1.status:<13}{h1.detail}\n")
    for key in ("F_body", "tail_bound"):
        if key in h1.report:
            out.write(f"    {key} = {h1.report[key]:.6e}\n")
    if "ratios" in h1.report:
        tail = ", ".join(f"{r:.4f}" for r in h1.report["ratios"][-4:])
        out.write(f"    tail ratios: {tail}\n")
    h2 = check_H2(problem.weight, PROBE_INTERVALS)
    out.write(f"H2  {h2.status:<13}{h2.detail}\n")
    for (lo, hi), vmax in zip(PROBE_INTERVALS, h2.maxima):
        out.write(f"    max h on [{lo:.4g}, {hi:g}] = {vmax:.6e}\n")
    return []


def _cmd_green(args, out, err) -> list[str]:
    from fracbvp.fractional_core import FractionalOrder, green_value

    try:
        order = FractionalOrder(args.alpha)
    except DomainError as exc:
        raise _Failure(EXIT_INVALID, str(exc)) from exc
    if args.grid < 2:
        raise _Failure(EXIT_INVALID, f"--grid needs at least 2 points, got {args.grid}")
    x = np.arange(args.grid) / (args.grid - 1)
    t, s = np.meshgrid(x, x, indexing="ij")
    g = green_value(order, t, s)
    written = _write_csv(args.out, "t,s,G", [t.ravel(), s.ravel(), g.ravel()], out)
    return [written] if written else []


# }}}


# {{{ entry points


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        raise _Failure(EXIT_INVALID, f"{self.prog}: {message}")


def _parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="fracbvp",
        description="Positive solutions of singular fractional boundary value problems.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="solve by damped fixed-point iteration")
    p.add_argument("spec")
    p.add_argument("--n", type=int)
    p.add_argument("--tol", type=float)
    p.add_argument("--damping", type=float)
    p.add_argument("--max-iter", dest="max_iter", type=int)
    p.add_argument("--out", help="CSV file for the solution (default: stdout)")
    p.add_argument("--no-certify", action="store_true",
                   help="do not seed the iteration from an existence certificate")

    p = sub.add_parser("certify", help="build and verify an existence certificate")
    p.add_argument("spec")
    p.add_argument("--samples", type=int, default=16, help="size of the test family")
    p.add_argument("--out", help="JSON file for the certificate")

    p = sub.add_parser("check", help="check the hypotheses on the weight")
    p.add_argument("spec")

    p = sub.add_parser("green", help="tabulate the Green's function")
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--grid", type=int, default=DEFAULT_GREEN_GRID)
    p.add_argument("--out", help="CSV file (default: stdout)")
    return parser


COMMANDS = {"solve": _cmd_solve, "certify": _cmd_certify, "check": _cmd_check, "green": _cmd_green}


def _fail(err, code: int, detail: str) -> CommandOutcome:
    detail = " ".join(str(detail).split())
    err.write(f"fracbvp: error[{ERROR_CODES[code]}]: {detail}\n")
    return CommandOutcome(code)


def run(argv, *, stdout=None, stderr=None) -> CommandOutcome:
    """Run one command; never raises for expected failures."""
    out = stdout if stdout is not None else sys.stdout
    err = stderr if stderr is not None else sys.stderr

    try:
        args = _parser().parse_args(list(argv))
    except _Failure as exc:
        return _fail(err, exc.exit_code, str(exc))
    except SystemExit as exc:  # --help
        return CommandOutcome(EXIT_OK if exc.code in (0, None) else EXIT_INVALID)

    if args.verbose:
        logging.basicConfig(level=logging.INFO, stream=err, format="%(name)s: %(message)s")

    try:
        artifacts = COMMANDS[args.command](args, out, err)
    except _Failure as exc:
        return _fail(err, exc.exit_code, str(exc))
    except FracBVPError as exc:
        detail = f"{type(exc).__name__}: {exc}"
        report = getattr(exc, "report", None)
        if report is not None and report.history:
            detail += f" (iterations {report.iterations}, last step {report.history[-1]:.3e})"
        return _fail(err, exc.exit_code, detail)
    except Exception as exc:  # anything unexpected is an internal error
        return _fail(err, EXIT_INTERNAL, f"{type(exc).__name__}: {exc}")
    return CommandOutcome(EXIT_OK, artifacts)


def main(argv=None) -> int:
    outcome = run(sys.argv[1:] if argv is None else argv)
    return outcome.exit_code


# }}}
