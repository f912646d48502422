"""Command-line front end.

Exit codes: 0 success, 1 domain error (bad input file, no faithful trace,
obstructed graph, ...), 2 usage error (argparse).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path as FsPath

from . import __version__
from . import algebra as alg
from .expr import ExpressionError, parse_expression
from .graph import GraphError, graph_report, load_graph
from .index import (ROUTES, PairingError, dixmier, index_report, k_theory_ranks, loop_unitary,
                    zeta_residue)
from .module import ModuleError, TruncatedModule
from .traces import (FAITHFUL, GraphTrace, TraceError, check_graph_trace, load_trace,
                     necessary_conditions, solve_graph_traces, tau)

SCHEMA = "graphtriple-report/1"


class DomainError(Exception):
    def __init__(self, message: str, result: dict | None = None):
        super().__init__(message)
        self.result = result


def _sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def _input_record(args) -> dict:
    rec = {"graph": args.graph}
    if args.graph.startswith("@"):
        rec["graph_sha256"] = _sha256(args.graph.encode())
    else:
        try:
            rec["graph_sha256"] = _sha256(FsPath(args.graph).read_bytes())
        except OSError:
            rec["graph_sha256"] = None
    if getattr(args, "trace", None):
        rec["trace"] = args.trace
        try:
            rec["trace_sha256"] = _sha256(FsPath(args.trace).read_bytes())
        except OSError:
            rec["trace_sha256"] = None
    else:
        rec["trace"] = "solve"
    extras = {k: getattr(args, k) for k in ("depth", "N", "route", "vertex", "loop", "expression")
              if getattr(args, k, None) is not None}
    rec.update(extras)
    return rec


def _trace(args, graph) -> GraphTrace:
    if args.trace:
        tr = load_trace(args.trace, graph)
        check = check_graph_trace(graph, tr)
        if not check.valid:
            bad = ", ".join(f"{v.vertex} ({alg.format_rational(v.value)} != "
                            f"{alg.format_rational(v.successor_sum)})" for v in check.violations)
            raise DomainError(f"not a graph trace: {bad}")
        return tr
    sol = solve_graph_traces(graph)
    if sol.status != FAITHFUL:
        raise DomainError(f"no faithful graph trace (status {sol.status}, obstruction: {sol.obstruction})",
                          {"traces": sol.to_json()})
    return sol.witness


# commands ----------------------------------------------------------------------

def cmd_validate(args, graph) -> dict:
    rep = graph_report(graph)
    out = {"vertices": len(graph.vertices), "edges": len(graph.edges), "report": rep.to_json()}
    if args.trace:
        tr = load_trace(args.trace, graph)
        check = check_graph_trace(graph, tr)
        out["trace_valid"] = check.valid
        out["violations"] = [{"vertex": v.vertex, "value": alg.format_rational(v.value),
                              "successor_sum": alg.format_rational(v.successor_sum)}
                             for v in check.violations]
        if not check.valid:
            raise DomainError("trace violates the graph-trace condition", out)
    return out


def cmd_traces(args, graph) -> dict:
    if args.trace:
        tr = load_trace(args.trace, graph)
        check = check_graph_trace(graph, tr)
        cond = necessary_conditions(graph)
        out = {"trace": tr.to_json(), "valid": check.valid, "faithful": tr.faithful,
               "violations": [{"vertex": v.vertex, "value": alg.format_rational(v.value),
                               "successor_sum": alg.format_rational(v.successor_sum)}
                              for v in check.violations],
               "obstructions": cond.to_json()}
        if not check.valid:
            raise DomainError("trace violates the graph-trace condition", out)
        return out
    sol = solve_graph_traces(graph)
    out = sol.to_json()
    if sol.status != FAITHFUL:
        raise DomainError(f"no faithful graph trace (obstruction: {sol.obstruction})", out)
    return out


def cmd_eval(args, graph) -> dict:
    a = parse_expression(args.expression, graph)
    nf = alg.from_terms(graph, alg.normal_form(a).items(), a.unit)
    out = {
        "element": str(a),
        "folded": str(alg.collapse(a)),
        "normal_form": str(nf),
        "adjoint": str(alg.adjoint(a)),
        "components": {str(k): str(v) for k, v in alg.grade(a).items()},
        "is_zero": alg.is_zero_in_algebra(a),
        "is_projection": alg.is_projection(a),
        "is_unitary": alg.is_unitary(a),
    }
    if args.trace or args.solve:
        tr = _trace(args, graph)
        out["tau"] = None if a.unit else alg.format_coeff(tau(a, tr))
    return out


def cmd_module(args, graph) -> dict:
    tr = _trace(args, graph)
    m = TruncatedModule(graph, tr, args.depth)
    out = m.to_json()
    out["trace"] = tr.to_json()
    return out


def cmd_pair(args, graph) -> dict:
    tr = _trace(args, graph)
    lu = loop_unitary(graph, args.loop)
    routes = ROUTES if args.route == "all" else (args.route,)
    m = TruncatedModule(graph, tr, args.depth) if "toeplitz" in routes else None
    rep = index_report(lu, tr, m, routes=routes)
    out = rep.to_json()
    out["trace"] = tr.to_json()
    out["unitary"] = str(lu.element)
    out["k_theory"] = k_theory_ranks(graph).to_json()
    out["normalisation"] = "the pairing is linear in g; the solver witness has minimum value 1"
    if not rep.agreement:
        raise DomainError("index routes disagree", out)
    return out


def cmd_dixmier(args, graph) -> dict:
    tr = _trace(args, graph)
    verts = [args.vertex] if args.vertex else list(graph.vertices)
    for v in verts:
        graph.require_vertex(v)
    results = []
    for v in verts:
        d = dixmier(graph, v, tr, args.N)
        row = d.to_json()
        row["zeta_residue"] = alg.format_rational(zeta_residue(graph, v, tr).value)
        row["no_sinks_downstream"] = d.closed_form == 2 * tr.values[v]
        results.append(row)
    out = {"trace": tr.to_json(), "vertices": results}
    if len(results) == 1:
        out.update({k: results[0][k] for k in ("closed_form", "partial", "zeta_residue")})
    return out


def cmd_ktheory(args, graph) -> dict:
    return k_theory_ranks(graph).to_json()


COMMANDS = {
    "validate": cmd_validate,
    "traces": cmd_traces,
    "eval": cmd_eval,
    "module": cmd_module,
    "pair": cmd_pair,
    "dixmier": cmd_dixmier,
    "ktheory": cmd_ktheory,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="graphtriple",
                                     description="Exact computations for graph C*-algebras.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    def common(p, trace=True):
        p.add_argument("--graph", required=True, help="graph file, @loop:n or @fryingpan:n,t")
        if trace:
            grp = p.add_mutually_exclusive_group()
            grp.add_argument("--trace", help="trace file with 't <vertex> <rational>' lines")
            grp.add_argument("--solve", action="store_true",
                             help="use the solver's faithful witness (the default)")
        p.add_argument("--json", action="store_true", help="emit a JSON report")

    p = sub.add_parser("validate", help="parse a graph and report sinks, sources, loops, ends")
    common(p)
    p = sub.add_parser("traces", help="solve for or check graph traces")
    common(p)
    p = sub.add_parser("eval", help="evaluate an algebra expression")
    common(p)
    p.add_argument("expression")
    p = sub.add_parser("module", help="build the truncated module and dump its Gram blocks")
    common(p)
    p.add_argument("--depth", type=int, default=2)
    p = sub.add_parser("pair", help="index pairing of a loop unitary, three routes")
    common(p)
    p.add_argument("--depth", type=int, default=4)
    p.add_argument("--route", choices=("residue", "closed", "toeplitz", "all"), default="all")
    p.add_argument("--loop", help="edge ids of the loop (default: first exitless loop)")
    p = sub.add_parser("dixmier", help="Dixmier value of p_v (1+D^2)^(-1/2)")
    common(p)
    p.add_argument("--vertex", help="vertex (default: all)")
    p.add_argument("--N", type=int, default=None, help="also compute the partial sum F(N)")
    p = sub.add_parser("ktheory", help="ranks of K0 and K1")
    common(p, trace=False)
    return parser


def _text(value, indent=0) -> list[str]:
    pad = "  " * indent
    lines = []
    if isinstance(value, dict):
        for k, v in value.items():
            if isinstance(v, (dict, list)) and v:
                lines.append(f"{pad}{k}:")
                lines.extend(_text(v, indent + 1))
            else:
                lines.append(f"{pad}{k}: {v}")
    elif isinstance(value, list):
        for v in value:
            if isinstance(v, (dict, list)):
                lines.append(f"{pad}-")
                lines.extend(_text(v, indent + 1))
            else:
                lines.append(f"{pad}- {v}")
    else:
        lines.append(f"{pad}{value}")
    return lines


def _emit(args, payload: dict, out) -> None:
    if args.json:
        out.write(json.dumps(payload, sort_keys=True, indent=2) + "\n")
    else:
        out.write("\n".join(_text(payload)) + "\n")


def run(argv=None, out=None, err=None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    args = build_parser().parse_args(argv)
    if hasattr(args, "N") and args.N is not None and args.N < 0:
        err.write("graphtriple: error: --N must be nonnegative\n")
        return 2
    if hasattr(args, "depth") and args.depth < 1:
        err.write("graphtriple: error: --depth must be at least 1\n")
        return 2
    payload = {"schema": SCHEMA, "tool_version": __version__, "command": args.command,
               "input": _input_record(args)}
    try:
        graph = load_graph(args.graph)
        payload["result"] = COMMANDS[args.command](args, graph)
        payload["status"] = "ok"
        _emit(args, payload, out)
        return 0
    except DomainError as exc:
        payload["status"] = "error"
        payload["error"] = str(exc)
        if exc.result is not None:
            payload["result"] = exc.result
    except (GraphError, TraceError, ExpressionError, PairingError, ModuleError, alg.AlgebraError) as exc:
        payload["status"] = "error"
        payload["error"] = str(exc)
    if args.json:
        _emit(args, payload, out)
    elif "result" in payload:
        _emit(args, payload["result"], out)
    err.write(f"graphtriple: {payload['error']}\n")
    return 1


def main() -> None:
    sys.exit(run())
