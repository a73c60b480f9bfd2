"""Command-line front end: ``uode solve|verify|stats|decouple``."""
from __future__ import annotations

import argparse
import json
import sys

from .solution import ExplicitSolution, term_count, verify
from .solver import METHODS, InconsistentError, Session, SolverConfig, Uode, solve
from .systems import decouple, verify_system
from .textio import (ParseError, expr_json, format_expr, format_solution,
                     format_substitutions, parse, parse_ode, result_json)

EXIT_OK, EXIT_USAGE, EXIT_PARSE, EXIT_INCONSISTENT, EXIT_UNVERIFIED = 0, 1, 2, 3, 4


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _add_solver_flags(p):
    p.add_argument("--method", choices=METHODS, default="new")
    p.add_argument("--absorb-gcd", action="store_true",
                   help="absorb coefficient gcds into new functions after each step")
    p.add_argument("--avoid-den", action="store_true",
                   help="rescale functions so that substitutions stay polynomial")
    p.add_argument("--no-integration-constant", action="store_true",
                   help="integrate exact equations without adding a constant")
    p.add_argument("--prefix", default="f", help="name prefix for introduced functions")
    p.add_argument("--start", type=int, default=None,
                   help="first index for introduced functions (default: r+1)")
    p.add_argument("--trace", action="store_true", help="log every step on stderr")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="uode", description="Solve underdetermined linear ODEs.")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("solve", help="solve one equation")
    s.add_argument("file")
    _add_solver_flags(s)
    s.add_argument("--format", choices=("subs", "explicit", "json"), default="subs")

    v = sub.add_parser("verify", help="check a solution file against an equation file")
    v.add_argument("ode")
    v.add_argument("solution")

    st = sub.add_parser("stats", help="term counts of a solution")
    st.add_argument("file")
    st.add_argument("solution", nargs="?", help="count this .sol file instead of solving")
    _add_solver_flags(st)
    st.add_argument("--format", choices=("text", "json"), default="text")

    d = sub.add_parser("decouple", help="decouple a system of equations")
    d.add_argument("file")
    _add_solver_flags(d)
    d.add_argument("--format", choices=("subs", "json"), default="subs")
    return ap


def _read(path: str) -> str:
    try:
        with open(path, encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        raise _UsageError(f"cannot read {path}: {exc.strerror}") from exc


def _config(args) -> SolverConfig:
    return SolverConfig(method=args.method, absorb_gcd=args.absorb_gcd,
                        avoid_denominators=args.avoid_den,
                        integration_constant=not args.no_integration_constant)


def _solve_file(args):
    doc = parse_ode(_read(args.file))
    if len(doc.equations) != 1:
        raise _UsageError("solve expects exactly one equation (use decouple for systems)")
    ode = Uode(doc.equations[0].terms, doc.equations[0].inhom)
    session = Session.for_ode(ode, prefix=args.prefix, start=args.start)
    return doc, ode, solve(ode, _config(args), session)


def _print_trace(result, out):
    for r in result.trace:
        d = r.as_dict()
        out.write(f"{d['kind']}: pivot={d['pivot']} new={','.join(d['introduced']) or '-'} "
                  f"order {d['order_sum_before']}->{d['order_sum_after']} "
                  f"size {d['size_before']}->{d['size_after']}\n")


def cmd_solve(args, out) -> int:
    doc, ode, result = _solve_file(args)
    if args.trace:
        _print_trace(result, sys.stderr)
    base = doc.base_name
    if args.format == "json":
        out.write(json.dumps(result_json(result, base), indent=2) + "\n")
    elif args.format == "explicit":
        out.write(format_solution(result.explicit(), base, doc.given, doc.consts))
    else:
        out.write(format_substitutions(result.substitutions, base, result.residual))
    return EXIT_OK


def cmd_verify(args, out) -> int:
    doc = parse_ode(_read(args.ode))
    sol_doc = parse(_read(args.solution), doc)
    ok = True
    for e in doc.equations:
        sol = ExplicitSolution(dict(sol_doc.assignments), list(sol_doc.params), sol_doc.residual)
        ok = ok and verify(e, sol)
    out.write("verified\n" if ok else "verification failed\n")
    return EXIT_OK if ok else EXIT_UNVERIFIED


def cmd_stats(args, out) -> int:
    if args.solution:
        doc = parse_ode(_read(args.file))
        sol_doc = parse(_read(args.solution), doc)
        sol = ExplicitSolution(dict(sol_doc.assignments), list(sol_doc.params), sol_doc.residual)
        counts = term_count(sol)
        data = {"term_counts": {k: [v.num, v.den] for k, v in counts.items()}}
    else:
        _, _, result = _solve_file(args)
        counts = term_count(result)
        data = {
            "term_counts": {k: [v.num, v.den] for k, v in counts.items()},
            "iterations": result.iterations,
            "substitutions": len(result.substitutions),
            "order_sum_trace": result.order_sum_trace,
            "parametric": [f.name for f in result.parametric],
        }
    if args.format == "json":
        out.write(json.dumps(data, indent=2) + "\n")
        return EXIT_OK
    for name, c in counts.items():
        out.write(f"{name}: {c.num}/{c.den}\n")
    for key in ("iterations", "substitutions"):
        if key in data:
            out.write(f"{key}: {data[key]}\n")
    if "order_sum_trace" in data:
        out.write("order sums: " + " -> ".join(map(str, data["order_sum_trace"])) + "\n")
    return EXIT_OK


def cmd_decouple(args, out) -> int:
    doc = parse_ode(_read(args.file))
    res = decouple(doc.equations, _config(args))
    if not verify_system(doc.equations, res):
        out.write("internal error: decoupled system does not verify\n")
        return EXIT_UNVERIFIED
    base = doc.base_name
    if args.format == "json":
        data = {
            "parametric": [f.name for f in res.parametric],
            "substitutions": [{"target": s.target.name, "kind": s.kind,
                               "rhs": expr_json(s.rhs, base)} for s in res.substitutions],
            "decoupled": [expr_json(e, base) for e in res.decoupled],
            "forced": [f.name for f in res.forced],
        }
        out.write(json.dumps(data, indent=2) + "\n")
        return EXIT_OK
    out.write(format_substitutions(res.substitutions, base))
    for e in res.decoupled:
        out.write(f"eq: {format_expr(e, base)} = 0;\n")
    for f in res.forced:
        out.write(f"# {f.name} is forced to a particular value\n")
    return EXIT_OK


COMMANDS = {"solve": cmd_solve, "verify": cmd_verify, "stats": cmd_stats,
            "decouple": cmd_decouple}


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    try:
        args = build_parser().parse_args(argv)
        return COMMANDS[args.command](args, out)
    except _UsageError as exc:
        sys.stderr.write(f"uode: {exc}\n")
        return EXIT_USAGE
    except ParseError as exc:
        sys.stderr.write(f"uode: parse error: {exc}\n")
        return EXIT_PARSE
    except InconsistentError:
        sys.stderr.write("uode: inconsistent\n")
        return EXIT_INCONSISTENT


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
