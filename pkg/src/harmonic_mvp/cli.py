"""Command-line front end.

Exit codes: 0 on success, 1 on input errors, 2 on numerical failures
(non-convergence, failed acceptance, reproduce mismatch).
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from . import functions as fn
from . import io
from .dirichlet import (DirichletProblem, dp_solve_continuous, dp_solve_measurable,
                        subharmonic_lift)
from .errors import HarmonicError, InputError, NumericalError
from .estimates import constant_sheet, empirical_harnack, liouville_scan
from .meanvalue import Domain, classify
from .perron import BarrierCandidate, SubharmonicFamilyPlan, boundary_regularity_check, lower_perron
from .reproduce import EXAMPLES, reproduce
from .space import DEFAULT_EPS, DiscreteSpace, SamplePlan, measure_diagnostics

log = logging.getLogger("harmonic_mvp")

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def _positive_float(text):
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not (v > 0 and math.isfinite(v)):
        raise argparse.ArgumentTypeError(f"must be positive, got {text}")
    return v


def _positive_int(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be at least 1, got {text}")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--space", help="space descriptor (JSON file or inline JSON)")
    common.add_argument("--problem", help="problem or plan descriptor (JSON file or inline JSON)")
    common.add_argument("--tol", type=_positive_float, help="override the tolerance")
    common.add_argument("--eps", type=_positive_float, help="override the averaging radius")
    common.add_argument("--max-iters", type=_positive_int, help="override the iteration cap")
    common.add_argument("--out", default=".", help="output directory (default: current)")
    common.add_argument("--format", choices=("csv", "json"), default="csv", help="output format")

    p = _Parser(prog="harmonic-mvp", description="Mean-value harmonic functions on metric measure spaces.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("solve", parents=[common], help="DP Dirichlet solver or subharmonic lift")
    sub.add_parser("classify", parents=[common], help="classify a function by its mean value defects")
    sub.add_parser("diagnose", parents=[common], help="doubling, annular decay and uniformity diagnostics")
    sub.add_parser("estimate", parents=[common], help="constant sheet and empirical Harnack ratios")
    sub.add_parser("scan-liouville", parents=[common], help="symmetric-difference ratio scan")
    sub.add_parser("perron", parents=[common], help="lower Perron solution and boundary regularity")
    rp = sub.add_parser("reproduce", parents=[common], help="run a catalogued example")
    rp.add_argument("example", help="one of: " + ", ".join(EXAMPLES))
    return p


# -- helpers ----------------------------------------------------------------------

def _descriptors(args):
    problem = io.load_descriptor(args.problem) if args.problem else {}
    if args.space:
        space_desc = args.space
    elif "space" in problem:
        space_desc = problem["space"]
    else:
        raise InputError("no space given (use --space or a \"space\" entry in the problem)")
    return io.space_from_descriptor(space_desc), problem


def _require(problem, *keys):
    missing = [k for k in keys if k not in problem]
    if missing:
        raise InputError(f"problem descriptor lacks {', '.join(missing)}")


def _omega(space, spec):
    """Node list on discrete spaces, ``(a, b)`` on the line, ``None`` for the whole space."""
    if spec is None:
        return None
    if isinstance(space, DiscreteSpace):
        return io.resolve_nodes(space, spec)
    if isinstance(spec, dict) and "interval" in spec:
        spec = spec["interval"]
    a, b = spec
    return (-math.inf if a is None else float(a), math.inf if b is None else float(b))


def _data(space, problem, key="boundary"):
    raw = problem[key]
    if isinstance(raw, dict) and ("id" in raw or "values" in raw):
        return fn.from_ref(raw)
    if isinstance(raw, str):
        return fn.from_ref(raw)
    return io.resolve_values(space, raw, problem.get("boundary_by", "node"))


class _Writer:
    def __init__(self, args, stem):
        self.out = Path(args.out)
        self.fmt = args.format
        self.stem = stem
        self.payload = {"command": stem}
        self.written = []

    def table(self, name, header, rows):
        if self.fmt == "csv":
            self.written.append(io.write_csv(self.out / f"{self.stem}_{name}.csv", header, rows))
        else:
            self.payload[name] = [dict(zip(header, r)) for r in rows]

    def summary(self, **items):
        self.payload.update(items)

    def close(self, always_json=False):
        if self.fmt == "json" or always_json:
            self.written.append(io.write_json(self.out / f"{self.stem}.json", self.payload))
        for path in self.written:
            print(path)


# -- subcommands -------------------------------------------------------------------

def cmd_solve(args) -> int:
    space, problem = _descriptors(args)
    if not isinstance(space, DiscreteSpace):
        raise InputError("solve needs a discrete space")
    _require(problem, "omega", "boundary")
    variant = problem.get("variant", "measurable")
    omega = io.resolve_nodes(space, problem["omega"])
    g = _data(space, problem)
    tol = args.tol or float(problem.get("tol", 1e-10))
    max_iters = args.max_iters or int(problem.get("max_iters", 100_000))
    w = _Writer(args, "solve")
    if variant == "sublift":
        _require(problem, "v")
        u, trace = subharmonic_lift(space, omega, g, fn.from_ref(problem["v"]), tol=tol, max_iters=max_iters)
    elif variant in ("measurable", "continuous"):
        eps = args.eps or problem.get("eps")
        if eps is None:
            raise InputError("the DP solver needs eps")
        ctor = DirichletProblem.measurable if variant == "measurable" else DirichletProblem.continuous
        pb = ctor(space, omega, float(eps), g, tol=tol, max_iters=max_iters)
        if variant == "measurable":
            u, trace = dp_solve_measurable(pb, seed=problem.get("seed", "below"))
        else:
            u, trace = dp_solve_continuous(pb, seed=problem.get("seed", "below"))
    else:
        raise InputError(f"unknown variant {variant!r}")
    nodes = trace.nodes.tolist()
    w.table("solution", ("point", "value"), [(i, u.values[i]) for i in nodes])
    w.table("trace", ("iter", "sup_delta", "residual"), trace.rows())
    w.summary(variant=variant, iterations=trace.iterations, converged=trace.converged,
              residual=trace.residual, tol=tol)
    w.close()
    return EXIT_OK


def cmd_classify(args) -> int:
    space, problem = _descriptors(args)
    _require(problem, "function", "points", "radii")
    f = fn.from_ref(problem["function"])
    omega = _omega(space, problem.get("omega"))
    cls = classify(space, f, Domain(problem["points"], omega), problem["radii"], args.tol or problem.get("tol"))
    w = _Writer(args, "classify")
    w.table("defects", ("x", "r", "defect"),
            [(x, r, d) for i, x in enumerate(cls.points) for r, d in zip(cls.radii[i], cls.defects[i])])
    w.summary(**cls.to_dict())
    w.close(always_json=True)
    print(cls.verdict)
    return EXIT_OK


def cmd_diagnose(args) -> int:
    space, problem = _descriptors(args)
    _require(problem, "centers", "radii")
    plan = SamplePlan(problem["centers"], problem["radii"], problem.get("eps", DEFAULT_EPS),
                      fit_threshold=args.tol or problem.get("fit_threshold", 1e-3))
    rep = measure_diagnostics(space, plan)
    w = _Writer(args, "diagnose")
    header, rows = io.diagnostics_rows(rep)
    w.table("samples", header, rows)
    w.summary(**rep.to_dict())
    w.close(always_json=True)
    return EXIT_OK


def cmd_estimate(args) -> int:
    problem = io.load_descriptor(args.problem) if args.problem else {}
    _require(problem, "sheet")
    sheet = constant_sheet(**problem["sheet"])
    w = _Writer(args, "estimate")
    w.summary(sheet=sheet.to_dict())
    status = EXIT_OK
    if "harnack" in problem:
        space, _ = _descriptors(args)
        h = problem["harnack"]
        _require(h, "functions", "x", "r")
        omega = _omega(space, h.get("omega"))
        rows = []
        for ref in h["functions"]:
            f = fn.from_ref(ref)
            res = empirical_harnack(space, f, h["x"], float(h["r"]), omega, h.get("C_mu"))
            rows.append((f.name, res.ratio, res.bound, res.passed))
            if not res.passed:
                status = EXIT_NUMERIC
        w.table("harnack", ("function", "ratio", "bound", "passed"), rows)
    w.close(always_json=True)
    return status


def cmd_scan(args) -> int:
    space, problem = _descriptors(args)
    _require(problem, "x", "y")
    scan = liouville_scan(space, problem["x"], problem["y"], problem.get("radii"), int(problem.get("n", 60)))
    w = _Writer(args, "scan")
    w.table("ratios", ("r", "ratio"), scan.rows())
    w.summary(liminf=scan.liminf, window=list(scan.window))
    w.close()
    return EXIT_OK


def cmd_perron(args) -> int:
    space, problem = _descriptors(args)
    if not isinstance(space, DiscreteSpace):
        raise InputError("perron needs a discrete space")
    _require(problem, "omega", "boundary", "generators")
    omega = io.resolve_nodes(space, problem["omega"])
    g = _data(space, problem)
    plan = SubharmonicFamilyPlan([fn.from_ref(r) for r in problem["generators"]],
                                 problem.get("schedule"), int(problem.get("rounds", 3)))
    tol = args.tol or float(problem.get("tol", 1e-10))
    P, trace = lower_perron(space, omega, g, plan, tol=tol)
    w = _Writer(args, "perron")
    pts = np.flatnonzero(np.isfinite(P.values))
    label = space.coords if space.coords is not None and space.coords.ndim == 1 else np.arange(space.size)
    w.table("solution", ("point", "value"), [(label[i], P.values[i]) for i in pts])
    w.summary(round_max=trace.round_max, round_defect=trace.round_defect, sup_g=trace.sup_g)
    status = EXIT_OK
    if "barrier" in problem:
        b = problem["barrier"]
        _require(b, "function", "x0")
        rep = boundary_regularity_check(space, omega, g, BarrierCandidate(fn.from_ref(b["function"]), int(b["x0"])),
                                        [int(y) for y in problem.get("approach", [])], perron=P,
                                        tol=float(problem.get("regularity_tol", 1e-4)))
        w.table("approach", ("point", "distance", "deviation"), rep.rows)
        w.summary(regularity={"monotone": rep.monotone, "final_deviation": rep.final_deviation,
                              "passed": rep.passed})
        if not rep.passed:
            status = EXIT_NUMERIC
    w.close()
    return status


def cmd_reproduce(args) -> int:
    rep = reproduce(args.example)
    w = _Writer(args, f"reproduce_{args.example}")
    for name, (header, rows) in rep.tables.items():
        w.table(name, header, rows)
    w.summary(**rep.to_dict())
    w.close(always_json=True)
    for c in rep.checks:
        print(f"{'PASS' if c.passed else 'FAIL'}  {c.name}: {c.value}")
    return EXIT_OK if rep.passed else EXIT_NUMERIC


COMMANDS = {
    "solve": cmd_solve,
    "classify": cmd_classify,
    "diagnose": cmd_diagnose,
    "estimate": cmd_estimate,
    "scan-liouville": cmd_scan,
    "perron": cmd_perron,
    "reproduce": cmd_reproduce,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (HarmonicError, KeyError, TypeError, ValueError, OSError) as exc:
        # malformed descriptors surface as plain Python errors
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
