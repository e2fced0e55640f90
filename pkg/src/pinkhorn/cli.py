"""Command line front end: solve, system, bench, and check subcommands.

File formats are deliberately plain: dense matrices as headerless CSV
(row-major), vectors as one value per line or one comma-separated line,
sparse systems as triplet CSV with header ``row,col,value``.  Floats are
written with 17 significant digits so a written plan re-reads to the same
values.  Exit codes: 0 converged (or all checks passed), 1 input error,
2 non-convergence.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .checks import run_checks
from .otx import OTProblem, round_to_feasible, transport_cost
from .penalty import ConstraintSystem
from .solvers import METHODS, SAMPLINGS, SolverConfig, solve, solve_smd

__all__ = ["CliInputError", "main", "app"]

_TRIPLET_HEADER = ("row", "col", "value")


class CliInputError(Exception):
    """Bad command line usage or malformed input data; exits with code 1."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise CliInputError(message)


def _data_lines(path: str):
    """Yield (line_number, stripped_text) for non-empty lines of a text file."""
    try:
        with open(path, encoding="utf-8") as handle:
            for lineno, raw in enumerate(handle, start=1):
                text = raw.strip()
                if text:
                    yield lineno, text
    except OSError as exc:
        raise CliInputError(f"cannot read {path}: {exc}") from exc


def read_matrix_csv(path: str) -> np.ndarray:
    """Dense headerless CSV, one matrix row per line."""
    rows = []
    width = None
    for lineno, text in _data_lines(path):
        cells = [cell.strip() for cell in text.split(",")]
        try:
            row = [float(cell) for cell in cells]
        except ValueError as exc:
            raise CliInputError(f"{path}:{lineno}: not a number: {exc}") from exc
        if width is None:
            width = len(row)
        elif len(row) != width:
            raise CliInputError(
                f"{path}:{lineno}: expected {width} columns, found {len(row)}"
            )
        rows.append(row)
    if not rows:
        raise CliInputError(f"{path}: no data rows")
    return np.array(rows)


def read_vector_csv(path: str) -> np.ndarray:
    """Vector CSV: one value per line, or a single comma-separated line."""
    return read_matrix_csv(path).reshape(-1)


def read_system_csv(path: str):
    """Dense or triplet constraint matrix; triplet files start with row,col,value.

    Returns ``("dense", matrix)`` or ``("triplets", list, n_rows, n_cols)``.
    """
    lines = list(_data_lines(path))
    if not lines:
        raise CliInputError(f"{path}: no data rows")
    first = tuple(cell.strip().lower() for cell in lines[0][1].split(","))
    if first != _TRIPLET_HEADER:
        return ("dense", read_matrix_csv(path))
    triplets = []
    for lineno, text in lines[1:]:
        cells = [cell.strip() for cell in text.split(",")]
        if len(cells) != 3:
            raise CliInputError(f"{path}:{lineno}: expected row,col,value")
        try:
            triplets.append((int(cells[0]), int(cells[1]), float(cells[2])))
        except ValueError as exc:
            raise CliInputError(f"{path}:{lineno}: bad triplet: {exc}") from exc
    if not triplets:
        raise CliInputError(f"{path}: triplet file has a header but no entries")
    n_rows = max(t[0] for t in triplets) + 1
    n_cols = max(t[1] for t in triplets) + 1
    return ("triplets", triplets, n_rows, n_cols)


def _fmt(value: float) -> str:
    return f"{float(value):.17g}"


def write_matrix_csv(path: str, matrix: np.ndarray) -> None:
    matrix = np.atleast_2d(np.asarray(matrix))
    with open(path, "w", encoding="utf-8") as handle:
        for row in matrix:
            handle.write(",".join(_fmt(v) for v in row) + "\n")


def write_vector_csv(path: str, vector: np.ndarray) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for v in np.asarray(vector).reshape(-1):
            handle.write(_fmt(v) + "\n")


def write_telemetry_csv(path: str, trace) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        handle.write("iter,objective,violation_l1,time_ms\n")
        for entry in trace:
            handle.write(
                f"{entry.iteration},{_fmt(entry.objective)},"
                f"{_fmt(entry.violation_l1)},{_fmt(entry.time_ms)}\n"
            )


def _write_summary(path: str | None, summary: dict) -> None:
    text = json.dumps(summary, indent=2)
    if path is None:
        print(text)
    else:
        with open(path, "w", encoding="utf-8") as handle:
            handle.write(text + "\n")


def _parse_blocks(value: str):
    """Blocks given inline as JSON (starts with '[') or as a path to a JSON file."""
    if value.lstrip().startswith("["):
        source, text = "--blocks", value
    else:
        source = value
        try:
            with open(value, encoding="utf-8") as handle:
                text = handle.read()
        except OSError as exc:
            raise CliInputError(f"cannot read {value}: {exc}") from exc
    try:
        blocks = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CliInputError(f"{source}: invalid JSON: {exc}") from exc
    if not isinstance(blocks, list) or not all(isinstance(b, list) for b in blocks):
        raise CliInputError(f"{source}: expected a list of lists of row indices")
    return [[int(i) for i in block] for block in blocks]


def _solver_config(args, method: str | None = None) -> SolverConfig:
    try:
        return SolverConfig(
            method=method if method is not None else args.method,
            eta=args.eta,
            sampling=getattr(args, "sampling", "cyclic"),
            tol=args.tol,
            max_iter=args.max_iter,
            seed=args.seed,
        )
    except ValueError as exc:
        raise CliInputError(str(exc)) from exc


def _exit_code(stop_reason: str) -> int:
    return 0 if stop_reason == "converged" else 2


def cmd_solve(args) -> int:
    cost = read_matrix_csv(args.cost)
    p = read_vector_csv(args.p)
    q = read_vector_csv(args.q)
    try:
        problem = OTProblem(cost=cost, gamma=args.gamma, p=p, q=q)
    except ValueError as exc:
        raise CliInputError(str(exc)) from exc
    cfg = _solver_config(args)
    report = solve(problem, cfg)
    plan = report.final_iterate
    if args.round:
        plan = round_to_feasible(problem, plan)
    summary = {
        "method": cfg.method,
        "iterations": report.iterations,
        "stop_reason": report.stop_reason,
        "final_violation": report.trace[-1].violation_l1,
        "transport_cost": transport_cost(problem, plan),
        "gamma": problem.gamma,
    }
    if args.out:
        write_matrix_csv(args.out, plan)
    if args.log:
        write_telemetry_csv(args.log, report.trace)
    _write_summary(args.summary, summary)
    return _exit_code(report.stop_reason)


def cmd_system(args) -> int:
    parsed = read_system_csv(args.matrix)
    b = read_vector_csv(args.b)
    blocks = _parse_blocks(args.blocks) if args.blocks else None
    try:
        if parsed[0] == "dense":
            system = ConstraintSystem.from_dense(parsed[1], b, blocks=blocks)
        else:
            _, triplets, n_rows, n_cols = parsed
            if b.size != n_rows:
                raise ValueError(f"b has {b.size} entries for {n_rows} triplet rows")
            system = ConstraintSystem.from_triplets(
                triplets, b, dimension=n_cols, blocks=blocks
            )
    except ValueError as exc:
        raise CliInputError(str(exc)) from exc
    if args.x0:
        x0 = read_vector_csv(args.x0)
    else:
        x0 = np.ones(system.dimension)
    cfg = _solver_config(args, method="smd")
    try:
        report = solve_smd(system, x0, cfg)
    except ValueError as exc:
        raise CliInputError(str(exc)) from exc
    summary = {
        "method": "smd",
        "sampling": cfg.sampling,
        "iterations": report.iterations,
        "stop_reason": report.stop_reason,
        "final_violation": report.trace[-1].violation_l1,
    }
    if args.out:
        write_vector_csv(args.out, report.final_iterate)
    if args.log:
        write_telemetry_csv(args.log, report.trace)
    _write_summary(args.summary, summary)
    return _exit_code(report.stop_reason)


def cmd_bench(args) -> int:
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    for m in methods:
        if m not in METHODS:
            raise CliInputError(f"unknown method {m!r}; expected one of {METHODS}")
    if not methods:
        raise CliInputError("--methods is empty")
    rng = np.random.default_rng(args.seed)
    lines = ["instance,method,iterations,final_violation,time_ms"]
    for instance in range(args.count):
        cost = rng.random((args.n, args.n))
        p = rng.uniform(0.5, 1.5, args.n)
        q = rng.uniform(0.5, 1.5, args.n)
        problem = OTProblem(cost=cost, gamma=args.gamma, p=p / p.sum(), q=q / q.sum())
        for method in methods:
            cfg = _solver_config(args, method=method)
            report = solve(problem, cfg)
            last = report.trace[-1]
            lines.append(
                f"{instance},{method},{report.iterations},"
                f"{_fmt(last.violation_l1)},{_fmt(last.time_ms)}"
            )
    text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8") as handle:
            handle.write(text)
    else:
        print(text, end="")
    return 0


def cmd_check(args) -> int:
    results = run_checks(seed=args.seed, tol_scale=args.tol_scale)
    width = max(len(r.name) for r in results)
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        print(f"{r.name:<{width}}  {status}  {r.detail}")
    failed = sum(not r.passed for r in results)
    print(f"{len(results) - failed}/{len(results)} checks passed")
    return 0 if failed == 0 else 1


def _add_solver_flags(sub) -> None:
    sub.add_argument("--eta", type=float, default=None, help="stepsize; default per method")
    sub.add_argument(
        "--sampling", choices=SAMPLINGS, default="cyclic", help="block selection rule"
    )
    sub.add_argument("--tol", type=float, default=1e-8, help="l1 violation threshold")
    sub.add_argument("--max-iter", type=int, default=100_000, help="iteration cap")
    sub.add_argument("--seed", type=int, default=0, help="seed for uniform sampling")


def _add_output_flags(sub) -> None:
    sub.add_argument("--log", default=None, help="telemetry CSV output path")
    sub.add_argument("--out", default=None, help="solution CSV output path")
    sub.add_argument(
        "--summary", default=None, help="summary JSON path (default: print to stdout)"
    )


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="pinkhorn", description="Entropic transport and KL penalty solvers")
    subs = parser.add_subparsers(dest="subcommand", required=True)

    sp = subs.add_parser("solve", help="solve an entropic optimal transport instance")
    sp.add_argument("--cost", required=True, help="cost matrix CSV")
    sp.add_argument("--p", required=True, help="row marginal CSV")
    sp.add_argument("--q", required=True, help="column marginal CSV")
    sp.add_argument("--gamma", type=float, required=True, help="entropic regularization")
    sp.add_argument("--method", choices=METHODS, default="sinkhorn")
    sp.add_argument(
        "--round",
        action="store_true",
        help="round the output plan to exact marginals before writing",
    )
    _add_solver_flags(sp)
    _add_output_flags(sp)
    sp.set_defaults(func=cmd_solve)

    sp = subs.add_parser("system", help="solve a nonnegative linear system Ax = b")
    sp.add_argument("--matrix", required=True, help="dense CSV or row,col,value triplet CSV")
    sp.add_argument("--b", required=True, help="right-hand side CSV (positive entries)")
    sp.add_argument(
        "--blocks", default=None, help="JSON list of row-index blocks, inline or a file path"
    )
    sp.add_argument("--x0", default=None, help="starting point CSV (default: all ones)")
    _add_solver_flags(sp)
    _add_output_flags(sp)
    sp.set_defaults(func=cmd_system)

    sp = subs.add_parser("bench", help="run seeded random instances across methods")
    sp.add_argument("--n", type=int, required=True, help="marginal size")
    sp.add_argument("--count", type=int, required=True, help="number of instances")
    sp.add_argument("--gamma", type=float, default=1.0)
    sp.add_argument("--methods", required=True, help="comma-separated method names")
    sp.add_argument("--out", default=None, help="comparison CSV path (default: stdout)")
    _add_solver_flags(sp)
    sp.set_defaults(func=cmd_bench)

    sp = subs.add_parser("check", help="run the oracle-backed invariant suite")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--tol-scale", type=float, default=1.0, help=argparse.SUPPRESS)
    sp.set_defaults(func=cmd_check)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except CliInputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def app() -> None:
    sys.exit(main())


if __name__ == "__main__":
    app()
