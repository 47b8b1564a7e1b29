"""Scenario files: JSON documents with a top-level ``kind`` tag.

Every scenario is validated in three stages, each with its own exit code:

* syntax (:data:`EXIT_SYNTAX`): the file cannot be read or is not JSON;
* schema (:data:`EXIT_SCHEMA`): a field is missing or has the wrong type;
* semantics (:data:`EXIT_SEMANTIC`): the values are individually well formed
  but do not define a valid problem (index out of range, uncovered
  coordinate, rank-deficient design, ...).

Diagnostics name the offending field with a path expression such as
``$.sources[2].support[1]``. Source and coordinate indices are 1-based in
files and 0-based in memory.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

import numpy as np

from .assignment import AssignmentProblem
from .errors import ResallocError
from .halfspace import ElectionProblem, normalize_weights, read_regions_csv
from .linear_design import DesignProblem, block_design, confidence_weight
from .solver_core import SimplexConstraint
from .sources import SourceModel
from .support_alloc import SupportProblem
from .tradeoffs import KINDS as TRADEOFF_KINDS
from .tradeoffs import TradeoffFunction

EXIT_SYNTAX = 4
EXIT_SCHEMA = 5
EXIT_SEMANTIC = 6

SCENARIO_KINDS = (
    "aggregate",
    "simplex_allocation",
    "assignment",
    "support_allocation",
    "linear_design",
    "election_direct",
    "election_indirect",
)
BUDGET_KINDS = ("simplex_allocation", "support_allocation", "linear_design", "election_direct", "election_indirect")


class ScenarioError(ResallocError):
    """Invalid scenario; ``exit_code`` tells which validation stage failed."""

    def __init__(self, message: str, path: str = "$", exit_code: int = EXIT_SCHEMA):
        super().__init__(f"{path}: {message}")
        self.path = path
        self.exit_code = exit_code


@dataclass
class Scenario:
    kind: str
    body: dict[str, Any]
    metadata: dict[str, Any] = field(default_factory=dict)
    base_dir: Path = field(default_factory=Path.cwd)
    problem: Any = field(default=None, compare=False, repr=False)

    def with_budget(self, budget: float) -> "Scenario":
        if self.kind not in BUDGET_KINDS:
            raise ScenarioError(f"kind {self.kind!r} has no budget", "$.budget", EXIT_SEMANTIC)
        body = dict(self.body, budget=budget)
        return build_scenario({"kind": self.kind, **body, "metadata": self.metadata}, self.base_dir)


# -- schema helpers -------------------------------------------------------


def _schema(msg: str, path: str) -> ScenarioError:
    return ScenarioError(msg, path, EXIT_SCHEMA)


def _semantic(msg: str, path: str) -> ScenarioError:
    return ScenarioError(msg, path, EXIT_SEMANTIC)


def _require(obj: dict, key: str, path: str):
    if key not in obj:
        raise _schema(f"missing required field {key!r}", path)
    return obj[key]


def _number(x, path: str, *, positive: bool = False, nonneg: bool = False) -> float:
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        raise _schema(f"expected a number, got {type(x).__name__}", path)
    x = float(x)
    if not math.isfinite(x):
        raise _semantic("must be finite", path)
    if positive and not x > 0:
        raise _semantic(f"must be positive, got {x}", path)
    if nonneg and x < 0:
        raise _semantic(f"must be non-negative, got {x}", path)
    return x


def _integer(x, path: str) -> int:
    if isinstance(x, bool) or not isinstance(x, int):
        raise _schema(f"expected an integer, got {type(x).__name__}", path)
    return x


def _list(x, path: str, *, nonempty: bool = True) -> list:
    if not isinstance(x, list):
        raise _schema(f"expected an array, got {type(x).__name__}", path)
    if nonempty and not x:
        raise _semantic("must not be empty", path)
    return x


def _numbers(x, path: str, **kw) -> list[float]:
    return [_number(v, f"{path}[{k}]", **kw) for k, v in enumerate(_list(x, path))]


def _object(x, path: str) -> dict:
    if not isinstance(x, dict):
        raise _schema(f"expected an object, got {type(x).__name__}", path)
    return x


def _choice(x, options, path: str) -> str:
    if not isinstance(x, str):
        raise _schema(f"expected a string, got {type(x).__name__}", path)
    if x not in options:
        raise _schema(f"must be one of {list(options)}, got {x!r}", path)
    return x


def _index(x, n: int, path: str, what: str) -> int:
    k = _integer(x, path)
    if not 1 <= k <= n:
        raise _semantic(f"{what} index {k} out of range 1..{n}", path)
    return k - 1


def _guard(fn: Callable, path: str):
    """Run ``fn`` and turn library validation errors into semantic diagnostics."""
    try:
        return fn()
    except ScenarioError:
        raise
    except (ResallocError, ValueError) as exc:
        raise _semantic(str(exc), path) from exc


def _tradeoff(x, path: str) -> TradeoffFunction:
    obj = _object(x, path)
    kind = _choice(_require(obj, "kind", path), TRADEOFF_KINDS, f"{path}.kind")
    needed = {
        "linear_precision": ("sigma_sq",),
        "power_precision": ("sigma_sq", "alpha"),
        "log_channel_precision": ("sigma_sq", "a"),
        "exp_margin_loss": ("eta",),
        "custom_convex_loss": ("table",),
    }[kind]
    for key in needed:
        _require(obj, key, path)
        if key != "table":
            _number(obj[key], f"{path}.{key}")
    if kind == "custom_convex_loss":
        for k, row in enumerate(_list(obj["table"], f"{path}.table")):
            rp = f"{path}.table[{k}]"
            if len(_list(row, rp)) != 2:
                raise _schema("table rows are [resource, loss] pairs", rp)
            _numbers(row, rp)
    return _guard(lambda: TradeoffFunction.from_dict(obj), path)


def _tradeoffs(x, path: str) -> list[TradeoffFunction]:
    return [_tradeoff(v, f"{path}[{k}]") for k, v in enumerate(_list(x, path))]


def _constraint(body: dict, n: int) -> SimplexConstraint:
    budget = _number(_require(body, "budget", "$"), "$.budget", positive=True)
    lower = upper = None
    if "lower" in body:
        lower = _numbers(body["lower"], "$.lower", nonneg=True)
        if len(lower) != n:
            raise _semantic(f"expected {n} lower bounds, got {len(lower)}", "$.lower")
    if "upper" in body:
        ul = _list(body["upper"], "$.upper")
        upper = [math.inf if v is None else _number(v, f"$.upper[{k}]", nonneg=True) for k, v in enumerate(ul)]
        if len(upper) != n:
            raise _semantic(f"expected {n} upper bounds, got {len(upper)}", "$.upper")
    return _guard(lambda: SimplexConstraint(budget, lower, upper), "$.budget")


def _sources(body: dict, d: int) -> list[SourceModel]:
    out = []
    for i, s in enumerate(_list(_require(body, "sources", "$"), "$.sources")):
        sp = f"$.sources[{i}]"
        s = _object(s, sp)
        sup_raw = _list(_require(s, "support", sp), f"{sp}.support")
        support = [_index(j, d, f"{sp}.support[{k}]", "coordinate") for k, j in enumerate(sup_raw)]
        if len(set(support)) != len(support):
            raise _semantic("support lists a coordinate twice", f"{sp}.support")
        if "tradeoffs" in s:
            fs = _tradeoffs(s["tradeoffs"], f"{sp}.tradeoffs")
            if len(fs) != len(support):
                raise _semantic(f"expected {len(support)} tradeoffs, got {len(fs)}", f"{sp}.tradeoffs")
        else:
            fs = [_tradeoff(_require(s, "tradeoff", sp), f"{sp}.tradeoff")] * len(support)
        order = np.argsort(support)
        out.append(SourceModel.per_coordinate([support[k] for k in order], [fs[k] for k in order]))
    return out


def _check_coverage(sources: list[SourceModel], d: int) -> None:
    seen = set()
    for s in sources:
        seen.update(s.support)
    for j in range(d):
        if j not in seen:
            raise _semantic(f"coordinate {j + 1} is observed by no source (empty reciprocal set)", "$.sources")


# -- per-kind builders ----------------------------------------------------


def _build_aggregate(body: dict, base: Path):
    if "losses" in body:
        losses = _numbers(body["losses"], "$.losses", positive=True)
        return {"losses": losses}
    d = _integer(_require(body, "d", "$"), "$.d")
    if d < 1:
        raise _semantic("d must be at least 1", "$.d")
    srcs = _sources(body, d)
    _check_coverage(srcs, d)
    r = _numbers(_require(body, "allocation", "$"), "$.allocation", nonneg=True)
    if len(r) != len(srcs):
        raise _semantic(f"expected {len(srcs)} allocations, got {len(r)}", "$.allocation")
    return {"d": d, "sources": srcs, "allocation": np.array(r)}


def _build_simplex(body: dict, base: Path):
    fs = _tradeoffs(_require(body, "tradeoffs", "$"), "$.tradeoffs")
    c = _constraint(body, len(fs))
    method = _choice(body.get("method", "auto"), ("auto", "generic", "closed_form"), "$.method")
    return {"tradeoffs": fs, "constraint": c, "method": method}


def _build_assignment(body: dict, base: Path):
    sense = _choice(body.get("sense", "maximize"), ("maximize", "minimize"), "$.sense")
    if "matrix" in body:
        rows = _list(body["matrix"], "$.matrix")
        q = [_numbers(row, f"$.matrix[{k}]") for k, row in enumerate(rows)]
        if any(len(row) != len(q) for row in q):
            raise _semantic("benefit matrix must be square", "$.matrix")
        return _guard(lambda: AssignmentProblem(np.array(q), sense), "$.matrix")
    fs = _tradeoffs(_require(body, "tradeoffs", "$"), "$.tradeoffs")
    res = _numbers(_require(body, "resources", "$"), "$.resources", nonneg=True)
    if len(res) != len(fs):
        raise _semantic(f"expected {len(fs)} resource amounts, got {len(res)}", "$.resources")
    quantity = _choice(body.get("quantity", "precision"), ("precision", "loss"), "$.quantity")
    return _guard(lambda: AssignmentProblem.from_tradeoffs(fs, res, sense, quantity), "$.resources")


def _build_support(body: dict, base: Path):
    d = _integer(_require(body, "d", "$"), "$.d")
    if d < 1:
        raise _semantic("d must be at least 1", "$.d")
    srcs = _sources(body, d)
    _check_coverage(srcs, d)
    c = _constraint(body, len(srcs))
    return _guard(lambda: SupportProblem(d, tuple(srcs), c), "$.sources")


def _build_design(body: dict, base: Path):
    kind = _choice(body.get("objective", "trace_inverse"), ("trace_inverse", "tail_bound"), "$.objective")
    lam = 0.0
    if kind == "tail_bound":
        delta = _number(_require(body, "delta", "$"), "$.delta")
        lam = _guard(lambda: confidence_weight(delta), "$.delta")
    if "X" not in body:
        d = _integer(_require(body, "d", "$"), "$.d")
        srcs = _sources(body, d)
        _check_coverage(srcs, d)
        c = _constraint(body, len(srcs))
        return _guard(lambda: block_design(srcs, d, c, objective_kind=kind, confidence_weight=lam), "$.sources")
    X_rows = _list(body["X"], "$.X")
    X = [_numbers(row, f"$.X[{k}]") for k, row in enumerate(X_rows)]
    if len({len(row) for row in X}) != 1:
        raise _semantic("rows of X differ in length", "$.X")
    n = _integer(_require(body, "n_sources", "$"), "$.n_sources")
    rows = _list(_require(body, "rows", "$"), "$.rows")
    if len(rows) != len(X):
        raise _semantic(f"expected {len(X)} row descriptions, got {len(rows)}", "$.rows")
    pm = []
    for k, row in enumerate(rows):
        rp = f"$.rows[{k}]"
        row = _object(row, rp)
        i = _index(_require(row, "source", rp), n, f"{rp}.source", "source")
        pm.append((i, _tradeoff(_require(row, "tradeoff", rp), f"{rp}.tradeoff")))
    c = _constraint(body, n)
    return _guard(lambda: DesignProblem(np.array(X), tuple(pm), c, kind, lam, n), "$.X")


def _election_regions(body: dict, base: Path, need_margins: bool):
    if "regions_csv" in body:
        csv_path = base / body["regions_csv"]
        try:
            names, c, margins = read_regions_csv(csv_path)
        except OSError as exc:
            raise ScenarioError(f"cannot read {csv_path}: {exc}", "$.regions_csv", EXIT_SYNTAX) from exc
        except (ValueError, ResallocError) as exc:
            raise _schema(str(exc), "$.regions_csv") from exc
        return names, c, margins
    w = _numbers(_require(body, "weights", "$"), "$.weights", nonneg=True)
    c = _guard(lambda: normalize_weights(w), "$.weights")
    names = body.get("names")
    if names is not None:
        names = [str(x) for x in _list(names, "$.names")]
        if len(names) != len(w):
            raise _semantic(f"expected {len(w)} names, got {len(names)}", "$.names")
    margins = None
    if need_margins:
        margins = _numbers(_require(body, "margins", "$"), "$.margins")
        if len(margins) != len(w):
            raise _semantic(f"expected {len(w)} margins, got {len(margins)}", "$.margins")
    return names, c, margins


def _build_election_direct(body: dict, base: Path):
    names, c, _ = _election_regions(body, base, need_margins=False)
    fs = _tradeoffs(_require(body, "variance_fns", "$"), "$.variance_fns")
    if len(fs) != c.size:
        raise _semantic(f"expected {c.size} variance functions, got {len(fs)}", "$.variance_fns")
    t = _number(_require(body, "advantage", "$"), "$.advantage", positive=True)
    con = _constraint(body, c.size)
    return _guard(lambda: ElectionProblem(c, t, con, "direct", variance_fns=tuple(fs), names=names), "$")


def _build_election_indirect(body: dict, base: Path):
    names, c, margins = _election_regions(body, base, need_margins=True)
    t = _number(_require(body, "advantage", "$"), "$.advantage", positive=True)
    con = _constraint(body, c.size)
    return _guard(lambda: ElectionProblem(c, t, con, "indirect", margins=np.asarray(margins), names=names), "$")


_BUILDERS = {
    "aggregate": _build_aggregate,
    "simplex_allocation": _build_simplex,
    "assignment": _build_assignment,
    "support_allocation": _build_support,
    "linear_design": _build_design,
    "election_direct": _build_election_direct,
    "election_indirect": _build_election_indirect,
}


def build_scenario(doc: Any, base_dir: str | Path = ".") -> Scenario:
    """Validate a decoded JSON document and build the problem it describes."""
    doc = _object(doc, "$")
    kind = _choice(_require(doc, "kind", "$"), SCENARIO_KINDS, "$.kind")
    meta = doc.get("metadata", {})
    meta = _object(meta, "$.metadata")
    body = {k: v for k, v in doc.items() if k not in ("kind", "metadata")}
    base = Path(base_dir)
    problem = _BUILDERS[kind](body, base)
    return Scenario(kind, body, meta, base, problem)


def parse_scenario(path: str | Path) -> Scenario:
    """Read, validate and build the scenario stored at ``path``."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise ScenarioError(f"cannot read {path}: {exc}", "$", EXIT_SYNTAX) from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}", "$", EXIT_SYNTAX) from exc
    return build_scenario(doc, path.parent)
