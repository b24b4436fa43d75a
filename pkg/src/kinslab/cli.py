"""Command-line entry point.

``kinslab run SCENARIO [--out DIR] [--check-only] [--workers N] [--no-figures]``
``kinslab weakconv FAMILY [--terms N] [--resolution R] ...``
``kinslab --version``

Exit codes: 0 success, 1 a diagnostic check failed, 2 bad scenario or
arguments, 3 the solver aborted (the message names the step).
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .runner import RunError, simulate, write_artifacts
from .scenario import ScenarioError, parse_scenario, serialize_scenario
from . import weakconv as wc

EXIT_OK, EXIT_CHECKS, EXIT_USAGE, EXIT_SOLVER = 0, 1, 2, 3


def _cmd_run(args: argparse.Namespace) -> int:
    try:
        text = Path(args.scenario).read_text()
    except OSError as exc:
        print(f"error: cannot read scenario: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        scenario = parse_scenario(text)
        scenario.wall_specs()
    except (ScenarioError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if args.check_only:
        sys.stdout.write(serialize_scenario(scenario))
        return EXIT_OK
    try:
        result = simulate(scenario, workers=args.workers)
    except RunError as exc:
        print(f"error: solver aborted at {exc}", file=sys.stderr)
        return EXIT_SOLVER
    out = Path(args.out if args.out is not None else scenario.run.out)
    paths = write_artifacts(result, out, figures=not args.no_figures)
    for name, check in result.checks.items():
        if not check.get("applicable", True):
            state = "n/a "
        else:
            state = "PASS" if check["passed"] else "FAIL"
        print(f"{state}  {name}")
    print(f"wrote {', '.join(str(p) for p in paths.values())}")
    return EXIT_OK if result.passed else EXIT_CHECKS


def weakconv_report(family: str, terms: int = 64, resolution: int = 4096, basis: int = 8,
                    levels: tuple[float, ...] = (1.0, 2.0, 4.0, 8.0), epsilon: float = 0.1,
                    threshold: float = 0.1, level: float = 8.0) -> dict:
    """JSON-ready tables and verdicts for one generator family."""
    seq = wc.build_sequence(family, terms, resolution)
    report: dict = {"family": family, "terms": terms, "resolution": resolution, "basis_size": basis}
    for ren in ("truncation", "rational"):
        est = wc.estimate_renormalized_limit(seq, levels, basis, renormalizer=ren)
        report[ren] = {
            "estimates": [{"level": e.level, "cell_means": e.cell_means.tolist(),
                           "tail_variance": e.tail_variance.tolist(),
                           "flagged": e.flagged.tolist()} for e in est],
            "monotonicity": wc.monotonicity_report(est),
            "limit": wc.limit_verdict(est),
        }
    biting = wc.biting_set_search(seq, epsilon, threshold=threshold, level=level)
    report["biting"] = biting
    report["l1_norms"] = [float(np.sum(s)) / resolution for s in seq.samples] if family != "oscillation" else None
    if seq.clip_counts:
        report["clip_counts"] = seq.clip_counts
    report["verdict"] = _verdict(family, report)
    return report


def _verdict(family: str, report: dict) -> str:
    est = report["truncation"]["estimates"]
    top = max(abs(x) for x in est[-1]["cell_means"])
    lim = report["truncation"]["limit"]
    bite = report["biting"]["verdict"]
    if family == "oscillation":
        means = ", ".join(f"M={e['level']:g}: {np.mean(e['cell_means']):.4f}" for e in est)
        tail = "renormalized limit unbounded" if not lim["bounded"] else "renormalized limit bounded"
        return f"T_M estimates {means}; {tail}"
    if family == "concentration":
        return f"r-limit estimate sup|T_M| = {top:.3g} at M={est[-1]['level']:g}; {bite}"
    return f"r-limit {'equals the function' if lim['bounded'] else 'not settled'}; {bite}"


def _cmd_weakconv(args: argparse.Namespace) -> int:
    try:
        report = weakconv_report(args.family, args.terms, args.resolution, args.basis,
                                 tuple(args.levels), args.epsilon, args.threshold, args.level)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    text = json.dumps(report, indent=2)
    if args.out:
        Path(args.out).write_text(text + "\n")
        print(report["verdict"])
    else:
        print(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="kinslab", description="Slab kinetic solver with wall-reflection diagnostics.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run a scenario and write ledger, summary and figures")
    r.add_argument("scenario")
    r.add_argument("--out", default=None, help="output directory (default: run.out of the scenario)")
    r.add_argument("--check-only", action="store_true", help="validate and echo the scenario, do not run")
    r.add_argument("--workers", type=int, default=None, help="override run.workers")
    r.add_argument("--no-figures", action="store_true")
    r.set_defaults(func=_cmd_run)

    w = sub.add_parser("weakconv", help="weak-convergence report for a sequence family")
    w.add_argument("family", choices=("concentration", "oscillation", "constant"))
    w.add_argument("--terms", type=int, default=64)
    w.add_argument("--resolution", type=int, default=4096)
    w.add_argument("--basis", type=int, default=8)
    w.add_argument("--levels", type=float, nargs="+", default=[1.0, 2.0, 4.0, 8.0])
    w.add_argument("--epsilon", type=float, default=0.1)
    w.add_argument("--threshold", type=float, default=0.1)
    w.add_argument("--level", type=float, default=8.0, help="level of the uniform-integrability witness")
    w.add_argument("--out", default=None, help="write the JSON report here instead of stdout")
    w.set_defaults(func=_cmd_weakconv)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
