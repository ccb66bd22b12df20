"""Command-line surface: generate datasets, solve, self-test, report.

Exit codes: 0 on success, 1 when the solver fails (no feasible point or
iteration caps hit), 2 on usage or input errors.  All output files are
byte-identical across runs with the same inputs and seeds; the only
nondeterministic report field is ``wall_time_ms``.  The environment
variable ``DQOPT_SEED`` overrides ``--seed`` everywhere when set.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .algebra import DualQuaternion, UnitDualQuaternion
from .errors import DqoptError, Infeasible, MaxIterations
from .handeye import (
    HandEyeDataset,
    build_axxb,
    build_axyb,
    evaluate_solution,
    generate_synthetic,
)
from .posegraph import (
    generate_cycle_graph,
    build_pgo,
    parse_graph,
    serialize_graph,
    spanning_tree_guess,
    vertex_errors,
)
from .selftest import run_all
from .solver import SolverConfig, mu_schedule_down_to, solve_eqdqo

__all__ = ["main", "build_parser"]


class _BadInput(Exception):
    """Input file or environment problem; maps to exit code 2."""


# ---------------------------------------------------------------------------
# Parser


def _add_solver_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--restarts", type=int, default=8, help="solver restarts")
    p.add_argument("--seed", type=int, default=0, help="restart seed")
    p.add_argument("--tol-grad", type=float, default=1e-9, help="stationarity tolerance")
    p.add_argument("--tol-feas", type=float, default=1e-9, help="feasibility tolerance")
    p.add_argument(
        "--tau-l",
        type=float,
        default=None,
        help="second-stage band half-width (default: scaled automatically)",
    )
    p.add_argument(
        "--mu-min",
        type=float,
        default=None,
        help="smallest smoothing level (default: 1e-9)",
    )
    p.add_argument("--max-outer", type=int, default=60, help="outer iteration cap")
    p.add_argument("--max-inner", type=int, default=300, help="inner iteration cap")
    p.add_argument("--threads", type=int, default=1, help="restart parallelism")
    p.add_argument("--csv", default=None, metavar="PATH", help="write per-iteration trace")
    p.add_argument("--out", default=None, metavar="PATH", help="report file (default: stdout)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dqopt",
        description="dual quaternion optimization: datasets, solvers, self-tests",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    g = sub.add_parser("gen-handeye", help="generate a synthetic calibration dataset")
    g.add_argument("--model", required=True, choices=("axxb", "axyb"))
    g.add_argument("--motions", type=int, required=True, help="relative motions or pose pairs")
    g.add_argument("--noise-rot", type=float, default=0.0, help="rotation noise (rad)")
    g.add_argument("--noise-trans", type=float, default=0.0, help="translation noise")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True, metavar="PATH")
    g.set_defaults(func=_cmd_gen_handeye)

    s = sub.add_parser("solve-handeye", help="solve a calibration dataset")
    s.add_argument("--in", dest="infile", required=True, metavar="PATH")
    _add_solver_flags(s)
    s.set_defaults(func=_cmd_solve_handeye)

    g = sub.add_parser("gen-pgo", help="generate a synthetic pose graph")
    g.add_argument("--vertices", type=int, required=True)
    g.add_argument("--loop-closures", type=int, default=0, help="extra chord edges")
    g.add_argument("--noise-rot", type=float, default=0.0, help="rotation noise (rad)")
    g.add_argument("--noise-trans", type=float, default=0.0, help="translation noise")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True, metavar="PATH")
    g.set_defaults(func=_cmd_gen_pgo)

    s = sub.add_parser("solve-pgo", help="solve a pose graph file")
    s.add_argument("--in", dest="infile", required=True, metavar="PATH")
    _add_solver_flags(s)
    s.set_defaults(func=_cmd_solve_pgo)

    t = sub.add_parser("selftest", help="run the built-in verification suites")
    t.add_argument("--seed", type=int, default=0)
    t.set_defaults(func=_cmd_selftest)

    r = sub.add_parser("report", help="print a saved solve report")
    r.add_argument("--in", dest="infile", required=True, metavar="PATH")
    r.set_defaults(func=_cmd_report)
    return parser


# ---------------------------------------------------------------------------
# Shared plumbing


def _resolve_seed(args) -> int:
    env = os.environ.get("DQOPT_SEED")
    if env is None:
        return args.seed
    try:
        return int(env)
    except ValueError:
        raise _BadInput(f"DQOPT_SEED must be an integer, got {env!r}")


def _config_from_args(args) -> SolverConfig:
    extra = {}
    try:
        if args.mu_min is not None:
            extra["mu_schedule"] = mu_schedule_down_to(args.mu_min)
        return SolverConfig(
            restarts=args.restarts,
            seed=_resolve_seed(args),
            tol_grad=args.tol_grad,
            tol_feas=args.tol_feas,
            tau_l=args.tau_l,
            max_outer=args.max_outer,
            max_inner=args.max_inner,
            threads=args.threads,
            **extra,
        )
    except ValueError as e:
        raise _BadInput(str(e))


def _read_text(path: str) -> str:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return fh.read()
    except OSError as e:
        raise _BadInput(f"cannot read {path}: {e.strerror or e}")


def _read_json(path: str) -> dict:
    text = _read_text(path)
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise _BadInput(f"{path} is not valid JSON: {e}")
    if not isinstance(data, dict):
        raise _BadInput(f"{path}: expected a JSON object at top level")
    return data


def _write_text(path: str, text: str) -> None:
    try:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    except OSError as e:
        raise _BadInput(f"cannot write {path}: {e.strerror or e}")


def _emit_report(data: dict, path: str | None) -> None:
    text = json.dumps(data, indent=2) + "\n"
    if path is None:
        sys.stdout.write(text)
    else:
        _write_text(path, text)
        print(f"wrote {path}")


def _write_trace_csv(path: str, trace) -> None:
    lines = ["iter,stage,objective_std,objective_dual,feasibility,kkt_residual"]
    for row in trace:
        lines.append(
            f"{row.iteration},{row.stage},{row.objective_std!r},"
            f"{row.objective_dual!r},{row.feasibility!r},{row.kkt_residual!r}"
        )
    _write_text(path, "\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# Commands


def _cmd_gen_handeye(args) -> int:
    ds = generate_synthetic(
        args.model,
        args.motions,
        noise_rot=args.noise_rot,
        noise_trans=args.noise_trans,
        seed=_resolve_seed(args),
    )
    _write_text(args.out, json.dumps(ds.to_json_dict(), indent=2) + "\n")
    print(f"wrote {args.out}")
    return 0


def _cmd_solve_handeye(args) -> int:
    raw = _read_json(args.infile)
    try:
        ds = HandEyeDataset.from_json_dict(raw)
    except (KeyError, TypeError, ValueError, DqoptError) as e:
        raise _BadInput(f"{args.infile}: invalid dataset ({e})")
    problem = build_axxb(ds) if ds.model == "axxb" else build_axyb(ds)
    report = solve_eqdqo(problem, _config_from_args(args))
    out = report.to_json_dict()
    if ds.ground_truth_x is not None:
        sol = list(report.solution)
        y = sol[1] if ds.model == "axyb" else None
        out["errors"] = evaluate_solution(ds, sol[0], y)
    _emit_report(out, args.out)
    if args.csv:
        _write_trace_csv(args.csv, report.trace)
    return 0


def _cmd_gen_pgo(args) -> int:
    graph = generate_cycle_graph(
        args.vertices,
        loop_closures=args.loop_closures,
        noise_rot=args.noise_rot,
        noise_trans=args.noise_trans,
        seed=_resolve_seed(args),
    )
    _write_text(args.out, serialize_graph(graph))
    print(f"wrote {args.out}")
    return 0


def _cmd_solve_pgo(args) -> int:
    graph = parse_graph(_read_text(args.infile))
    problem = build_pgo(graph)
    guess = [DualQuaternion(u.std, u.dual) for u in spanning_tree_guess(graph)]
    report = solve_eqdqo(problem, _config_from_args(args), initial=guess)
    out = report.to_json_dict()
    if len(graph.ground_truth) == graph.n:
        out["errors"] = vertex_errors(graph, list(report.solution))
    _emit_report(out, args.out)
    if args.csv:
        _write_trace_csv(args.csv, report.trace)
    return 0


def _cmd_selftest(args) -> int:
    suites = run_all(_resolve_seed(args))
    total = 0
    passed = 0
    for name, results in suites.items():
        ok = sum(r.passed for r in results)
        print(f"{name}: {ok}/{len(results)} passed")
        for r in results:
            if not r.passed:
                print(f"  FAIL {r.name}: {r.detail}")
        total += len(results)
        passed += ok
    if passed == total:
        print(f"all {total} checks passed")
        return 0
    print(f"{total - passed} of {total} checks failed")
    return 1


def _cmd_report(args) -> int:
    data = _read_json(args.infile)
    try:
        lines = [
            f"objective (std)   {data['stage1_value']}",
            f"objective (dual)  {data['stage2_value']}",
            f"feasibility       std {data['feasibility']['h']}"
            f"  dual {data['feasibility']['h_d']}",
            f"kkt residual      stage1 {data['kkt_residual']['stage1']}"
            f"  stage2 {data['kkt_residual']['stage2']}",
            f"iterations        stage1 {data['iterations']['stage1']}"
            f"  stage2 {data['iterations']['stage2']}",
            f"winning restart   {data['restart_index']}",
            f"wall time (ms)    {data['wall_time_ms']}",
        ]
        cfg = data["config"]
        lines.append(
            "config            "
            + " ".join(f"{k}={cfg[k]}" for k in sorted(cfg) if k != "mu_schedule")
        )
        errors = data.get("errors")
    except (KeyError, TypeError) as e:
        raise _BadInput(f"{args.infile}: not a solve report ({e})")
    if isinstance(errors, dict):
        for k in sorted(errors):
            lines.append(f"{k:<22}{errors[k]}")
    elif isinstance(errors, list):
        for entry in errors:
            lines.append(
                f"vertex {entry['vertex']:<11}rotation {entry['rotation_error']:.3e}"
                f"  translation {entry['translation_error']:.3e}"
            )
    print("\n".join(lines))
    return 0


# ---------------------------------------------------------------------------


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return 0 if e.code in (0, None) else 2
    try:
        return args.func(args)
    except (Infeasible, MaxIterations) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except _BadInput as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except DqoptError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
