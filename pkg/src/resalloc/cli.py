"""Command-line entry point: ``resalloc solve|simulate|regime SCENARIO``.

Exit codes
----------
0  solve converged / every simulation check passed
2  solver stopped before meeting its convergence test
3  infeasible problem (e.g. no allocation pushes the polling bias below the advantage)
4  scenario file unreadable or not valid JSON
5  scenario schema violation (missing field, wrong type)
6  scenario semantic violation (index out of range, uncovered coordinate, ...)
7  a simulation check failed
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from typing import Any, Sequence

import numpy as np

from . import __version__
from .aggregation import optimal_weights_single, optimal_weights_supported
from .assignment import solve_assignment
from .harness import GaussianSources, SimulationSpec, simulate_decision, simulate_mse, simulate_tail
from .halfspace import ElectionProblem, regime_study, solve_direct, solve_indirect
from .linear_design import solve_design
from .scenario import EXIT_SEMANTIC, Scenario, ScenarioError, parse_scenario
from .errors import ResallocError
from .solver_core import DEFAULT_MAX_ITER, DEFAULT_TOL, _jsonable, solve_simplex
from .support_alloc import solve_support

EXIT_OK = 0
EXIT_NOT_CONVERGED = 2
EXIT_INFEASIBLE = 3
EXIT_CHECK_FAILED = 7


def _num(x) -> Any:
    """JSON-safe float; ``repr`` of a Python float round-trips exactly."""
    x = float(x)
    if math.isfinite(x):
        return x
    return "inf" if x > 0 else "-inf" if x < 0 else "nan"


def _nums(xs) -> list:
    return [_num(x) for x in np.ravel(xs)]


def _status(converged: bool) -> tuple[str, int]:
    return ("converged", EXIT_OK) if converged else ("not_converged", EXIT_NOT_CONVERGED)


def _names(sc: Scenario, n: int) -> list[str]:
    p = sc.problem
    if isinstance(p, ElectionProblem) and p.names is not None:
        return list(p.names)
    return [f"source {i + 1}" for i in range(n)]


# -- solve ----------------------------------------------------------------


def solve_scenario(sc: Scenario, tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER) -> tuple[dict, int]:
    """Solve ``sc`` and return ``(result, exit_code)``."""
    p = sc.problem
    out: dict[str, Any] = {"kind": sc.kind}
    if sc.metadata.get("name"):
        out["name"] = sc.metadata["name"]

    if sc.kind == "aggregate":
        if "losses" in p:
            w = optimal_weights_single(p["losses"])
            out.update(weights=_nums(w.vector), total_loss=_num(w.total_loss))
        else:
            w = optimal_weights_supported(p["sources"], p["allocation"], p["d"])
            out.update(
                weights=[_nums(row) for row in w.dense()],
                per_coord_loss=_nums(w.per_coord_loss),
                total_loss=_num(w.total_loss),
            )
        out["status"] = "converged"
        return out, EXIT_OK

    if sc.kind == "simplex_allocation":
        rep = solve_simplex(p["tradeoffs"], p["constraint"], p["method"], tol=tol, max_iter=max_iter)
        return _solver_result(out, rep, "maximize")

    if sc.kind == "assignment":
        res = solve_assignment(p)
        out.update(
            permutation=[int(j) + 1 for j in res.permutation],
            objective=_num(res.objective),
            sense=p.sense,
            status="converged",
        )
        return out, EXIT_OK

    if sc.kind == "support_allocation":
        rep = solve_support(p, tol=tol, max_iter=max_iter)
        out["per_coord_loss"] = _nums(rep.details["per_coord_loss"])
        return _solver_result(out, rep, "minimize")

    if sc.kind == "linear_design":
        rep = solve_design(p, tol=tol, max_iter=max_iter)
        out["objective_kind"] = p.objective_kind
        return _solver_result(out, rep, "minimize")

    if sc.kind == "election_direct":
        return _bound_result(out, solve_direct(p, tol=tol, max_iter=max_iter))

    if sc.kind == "election_indirect":
        out["advantage"] = _num(p.t)
        return _bound_result(out, solve_indirect(p, tol=tol, max_iter=max_iter))

    raise AssertionError(sc.kind)


def _solver_result(out: dict, rep, sense: str) -> tuple[dict, int]:
    status, code = _status(rep.converged)
    out.update(
        status=status,
        sense=sense,
        allocation=_nums(rep.allocation),
        objective=_num(rep.objective),
        iterations=int(rep.iterations),
        kkt_residual=_num(rep.kkt_residual),
        method=rep.details.get("method", "projected_gradient"),
    )
    return out, code


def _bound_result(out: dict, rep) -> tuple[dict, int]:
    if not rep.feasible:
        out.update(
            status="infeasible",
            min_bias=_num(rep.details["min_bias"]),
            bias_minimizing_allocation=_nums(rep.allocation),
        )
        return out, EXIT_INFEASIBLE
    status, code = _status(rep.converged)
    out.update(
        status=status,
        allocation=_nums(rep.allocation),
        bound=_num(rep.bound_value),
        variance_term=_num(rep.variance_term),
        objective=_num(rep.objective),
        iterations=int(rep.solver.iterations),
        kkt_residual=_num(rep.solver.kkt_residual),
    )
    if rep.bias is not None:
        out["bias"] = _num(rep.bias)
    return out, code


# -- simulate -------------------------------------------------------------


def _default_theta(sc: Scenario, d: int) -> np.ndarray:
    p = sc.problem
    if isinstance(p, ElectionProblem):
        if p.mode == "direct":
            return np.full(d, p.b + p.t)
        # heaviest regions first until the true aggregate reaches b + t
        theta = np.zeros(d)
        acc = 0.0
        for i in np.argsort(-p.c, kind="stable"):
            if acc >= p.b + p.t:
                break
            theta[i] = 1.0
            acc += p.c[i]
        return theta
    return np.zeros(d)


def simulate_scenario(
    sc: Scenario,
    trials: int,
    seed: int,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    workers: int = 1,
) -> tuple[dict, int]:
    """Solve ``sc`` (when it has a solve step) and check the result by simulation."""
    p = sc.problem
    theta_raw = sc.body.get("true_theta")
    out: dict[str, Any] = {"kind": sc.kind, "trials": trials, "seed": seed}
    reports = []

    def theta_for(d):
        if theta_raw is None:
            return _default_theta(sc, d)
        th = np.asarray(theta_raw, dtype=float)
        if th.shape != (d,):
            raise ScenarioError(f"expected {d} entries, got {th.size}", "$.true_theta", 6)
        return th

    def spec(model, d):
        return SimulationSpec(model, theta_for(d), trials, seed, workers=workers)

    if sc.kind in ("aggregate", "simplex_allocation", "support_allocation", "assignment"):
        if sc.kind == "aggregate" and "losses" in p:
            d = int(sc.body.get("d", 1))
            model = GaussianSources.shared_support(p["losses"], d)
        elif sc.kind == "aggregate":
            from .support_alloc import SupportProblem
            from .solver_core import SimplexConstraint

            sp = SupportProblem(p["d"], tuple(p["sources"]), SimplexConstraint(1.0))
            model = GaussianSources.from_support_problem(sp, p["allocation"])
        elif sc.kind == "simplex_allocation":
            res, _ = solve_scenario(sc, tol, max_iter)
            out["allocation"] = res["allocation"]
            losses = [f.loss(x) for f, x in zip(p["tradeoffs"], res["allocation"])]
            # sources left without resource carry no information and get zero weight
            losses = [l for l in losses if math.isfinite(l)]
            model = GaussianSources.shared_support(losses, int(sc.body.get("d", 1)))
        elif sc.kind == "support_allocation":
            res, _ = solve_scenario(sc, tol, max_iter)
            out["allocation"] = res["allocation"]
            model = GaussianSources.from_support_problem(p, res["allocation"])
        else:
            res = solve_assignment(p)
            q = p.q_matrix[np.arange(len(res.permutation)), res.permutation]
            if p.sense == "maximize":  # precisions of sources sharing one coordinate
                model = GaussianSources.shared_support(1.0 / q, 1)
            else:  # losses of sources with disjoint coordinates
                n = q.size
                model = GaussianSources(n, tuple((i,) for i in range(n)), tuple(np.array([x]) for x in q))
        rep = simulate_mse(spec(model, model.d), compare_uniform=len(model.supports) > 1)
        reports.append(rep)
    elif sc.kind == "linear_design":
        res, _ = solve_scenario(sc, tol, max_iter)
        out["allocation"] = res["allocation"]
        deltas = sc.body.get("deltas", [0.1, 0.01])
        for delta in deltas:
            reports.append(simulate_tail(spec(p, p.d), res["allocation"], float(delta)))
    else:
        res, code = solve_scenario(sc, tol, max_iter)
        if code == EXIT_INFEASIBLE:
            out.update(res)
            return out, EXIT_INFEASIBLE
        out["allocation"] = res["allocation"]
        reports.append(simulate_decision(spec(p, p.d), res["allocation"]))

    out["reports"] = [_jsonable_report(r) for r in reports]
    out["pass"] = all(r.passed for r in reports)
    return out, EXIT_OK if out["pass"] else EXIT_CHECK_FAILED


def _jsonable_report(r) -> dict:
    d = r.to_dict()
    return {k: (_num(v) if isinstance(v, (float, np.floating)) else v) for k, v in d.items()}


# -- regime ---------------------------------------------------------------


def regime_scenario(
    sc: Scenario, budgets: Sequence[float], tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER
) -> tuple[dict, int]:
    """Solve an indirect election at several budgets and report group shares."""
    if sc.kind != "election_indirect":
        raise ScenarioError("regime studies need an election_indirect scenario", "$.kind", 6)
    groups = {k: [int(i) - 1 for i in v] for k, v in sc.metadata.get("groups", {}).items()}
    budgets = sorted(budgets)
    rows = []
    infeasible = not_converged = False
    for R, rep in zip(budgets, regime_study(sc.problem, budgets, tol=tol, max_iter=max_iter)):
        row: dict[str, Any] = {"budget": _num(R), "feasible": rep.feasible}
        if not rep.feasible:
            row["min_bias"] = _num(rep.details["min_bias"])
            infeasible = True
        else:
            row.update(allocation=_nums(rep.allocation), bound=_num(rep.bound_value), bias=_num(rep.bias))
            row["group_share"] = {k: _num(rep.allocation[idx].sum() / R) for k, idx in groups.items()}
            not_converged |= not rep.converged
        rows.append(row)
    code = EXIT_INFEASIBLE if infeasible else EXIT_NOT_CONVERGED if not_converged else EXIT_OK
    return {"kind": sc.kind, "budgets": rows}, code


# -- output ---------------------------------------------------------------


def _fmt(x) -> str:
    return f"{x:.6g}" if isinstance(x, float) else str(x)


def format_table(sc: Scenario, result: dict) -> str:
    """Human-readable rendering; allocations are ranked from largest to smallest."""
    lines = [f"kind: {result['kind']}"]
    for key in ("name", "status", "sense", "method", "objective_kind", "objective", "total_loss", "bound",
                "bias", "variance_term", "min_bias", "advantage", "iterations", "kkt_residual", "pass"):
        if key in result:
            lines.append(f"{key}: {_fmt(result[key])}")
    alloc = result.get("allocation") or result.get("bias_minimizing_allocation")
    if alloc is not None:
        r = np.asarray(alloc, dtype=float)
        names = _names(sc, r.size)
        total = r.sum()
        lines.append("")
        lines.append(f"{'rank':>4}  {'source':<16} {'allocation':>14} {'share':>8}")
        for rank, i in enumerate(np.argsort(-r, kind="stable"), 1):
            share = r[i] / total if total > 0 else 0.0
            lines.append(f"{rank:>4}  {names[i]:<16} {r[i]:>14.6f} {share:>8.4f}")
    if "weights" in result:
        lines.append("")
        lines.append("weights:")
        w = result["weights"]
        rows = w if w and isinstance(w[0], list) else [w]
        for j, row in enumerate(rows):
            label = f"coord {j + 1}" if len(rows) > 1 else "all"
            lines.append(f"  {label:<9} " + " ".join(f"{x:8.4f}" for x in row))
    if "permutation" in result:
        lines.append("")
        lines.append("source -> resource")
        for i, j in enumerate(result["permutation"], 1):
            lines.append(f"  {i:>3} -> {j}")
    for rep in result.get("reports", []):
        lines.append("")
        lines.append(
            f"{rep['check']}: empirical {_fmt(rep['empirical_risk'])} predicted {_fmt(rep['predicted_risk'])} "
            f"se {_fmt(rep['std_error'])} -> {'PASS' if rep['pass'] else 'FAIL'}"
        )
    for row in result.get("budgets", []):
        if row["feasible"]:
            shares = ", ".join(f"{k}={v:.4f}" for k, v in row["group_share"].items())
            lines.append(f"budget {_fmt(row['budget'])}: bound {_fmt(row['bound'])} bias {_fmt(row['bias'])} {shares}")
        else:
            lines.append(f"budget {_fmt(row['budget'])}: infeasible (min bias {_fmt(row['min_bias'])})")
    return "\n".join(lines)


def emit(sc: Scenario, result: dict, output: str, stream=None) -> None:
    stream = sys.stdout if stream is None else stream
    if output == "json":
        stream.write(json.dumps(_jsonable(result), indent=2) + "\n")
    else:
        stream.write(format_table(sc, result) + "\n")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="resalloc", description="Optimal resource allocation for data acquisition.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("scenario", help="scenario JSON file")
        p.add_argument("--tolerance", type=float, default=DEFAULT_TOL, help="projected-gradient residual tolerance")
        p.add_argument("--max-iters", type=int, default=DEFAULT_MAX_ITER, help="iteration cap")
        p.add_argument("--output", choices=("json", "table"), default="table")
        p.add_argument("--budget", type=float, default=None, help="override the scenario budget")

    common(sub.add_parser("solve", help="solve a scenario"))
    sim = sub.add_parser("simulate", help="solve, then check losses/bounds by Monte Carlo")
    common(sim)
    sim.add_argument("--trials", type=int, default=100_000)
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--workers", type=int, default=1, help="threads running trial blocks")
    reg = sub.add_parser("regime", help="solve an indirect election at several budgets")
    common(reg)
    reg.add_argument("--budgets", type=float, nargs="+", required=True)
    return ap


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        sc = parse_scenario(args.scenario)
        if args.budget is not None:
            sc = sc.with_budget(args.budget)
        if args.command == "solve":
            result, code = solve_scenario(sc, args.tolerance, args.max_iters)
        elif args.command == "simulate":
            if args.trials < 1:
                raise ScenarioError("--trials must be at least 1", "--trials", 5)
            result, code = simulate_scenario(sc, args.trials, args.seed, args.tolerance, args.max_iters, args.workers)
        else:
            result, code = regime_scenario(sc, args.budgets, args.tolerance, args.max_iters)
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except (ResallocError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SEMANTIC
    emit(sc, result, args.output)
    return code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
