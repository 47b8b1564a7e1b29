"""Regenerate the scenario files under src/resalloc/fixtures.

The election fixture is synthetic: 51 regions in three groups.

* swing: heavy regions with tiny vote margins (hard to poll accurately);
* safe: heavy regions with comfortable margins (cheap to poll);
* small: 40 light regions with random weights and margins.

The weights and margins are made up; they are tuned only so that the
allocation regimes are visible. At budget 10000 the bias bound can be pushed
just below the advantage and polling goes to the safe group. At budget 150000
most of the budget goes to the swing group.

Usage: python scripts/make_fixtures.py
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

OUT = Path(__file__).resolve().parents[1] / "src" / "resalloc" / "fixtures"

SEED = 2012
SWING_W = [29, 18, 15, 13, 10, 9]
SWING_M = [0.004, 0.015, 0.010, 0.020, 0.028, 0.018]
SAFE_W = [55, 38, 29, 20, 20]
SAFE_M = [0.115, 0.080, 0.140, 0.105, 0.120]
ADVANTAGE = 63 / 538
LOW_BUDGET = 10_000
HIGH_BUDGET = 150_000

# ten coordinates observed by five sources with intrinsic variances 1..5
SUPPORTS = [[3, 5, 7, 10], [5, 8, 10], [2, 7], [1, 2, 4, 6, 7, 9], [3, 4, 7]]


def election_regions():
    rng = np.random.default_rng(SEED)
    n_small = 51 - len(SWING_W) - len(SAFE_W)
    small_w = rng.integers(3, 12, n_small)
    small_m = np.round(rng.uniform(0.10, 0.35, n_small), 3)
    weights = [*SWING_W, *SAFE_W, *small_w.tolist()]
    margins = [*SWING_M, *SAFE_M, *small_m.tolist()]
    names = [f"Swing {k + 1}" for k in range(len(SWING_W))]
    names += [f"Safe {k + 1}" for k in range(len(SAFE_W))]
    names += [f"Small {k + 1:02d}" for k in range(n_small)]
    return names, weights, margins


def support_scenario(kind: str, alpha: float | None) -> dict:
    sources = []
    for i, s in enumerate(SUPPORTS):
        f = {"kind": "linear_precision", "sigma_sq": float(i + 1)}
        if alpha is not None:
            f = {"kind": "power_precision", "sigma_sq": float(i + 1), "alpha": alpha}
        sources.append({"support": s, "tradeoff": f})
    return {
        "kind": "support_allocation",
        "metadata": {"name": f"ten coordinates, five sources, {kind} precision"},
        "d": 10,
        "budget": 1.0,
        "sources": sources,
    }


def write_json(name: str, doc: dict) -> None:
    (OUT / name).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")


def main() -> None:
    OUT.mkdir(parents=True, exist_ok=True)
    write_json("support_linear.json", support_scenario("linear", None))
    write_json("support_power.json", support_scenario("power (alpha = 0.6)", 0.6))

    names, weights, margins = election_regions()
    with open(OUT / "election_synthetic_51.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["region", "weight", "margin"])
        for row in zip(names, weights, margins):
            w.writerow(row)
    write_json(
        "election_synthetic_51.json",
        {
            "kind": "election_indirect",
            "metadata": {
                "name": "synthetic 51-region election",
                "low_budget": LOW_BUDGET,
                "high_budget": HIGH_BUDGET,
                "groups": {
                    "swing": list(range(1, 7)),
                    "safe": list(range(7, 12)),
                    "small": list(range(12, 52)),
                },
            },
            "regions_csv": "election_synthetic_51.csv",
            "advantage": ADVANTAGE,
            "budget": LOW_BUDGET,
        },
    )
    # the smallest achievable bias, 0.5 * exp(-R * 0.01**2 / 2), stays above t
    write_json(
        "election_infeasible.json",
        {
            "kind": "election_indirect",
            "metadata": {"name": "single narrow region, advantage out of reach"},
            "weights": [1.0],
            "margins": [0.01],
            "advantage": 0.05,
            "budget": 100.0,
        },
    )
    write_json(
        "aggregate_two_sources.json",
        {"kind": "aggregate", "metadata": {"name": "two sources, losses 1 and 4"}, "losses": [1.0, 4.0], "d": 2},
    )
    write_json(
        "design_random_6x3.json",
        {
            "kind": "linear_design",
            "metadata": {"name": "six measurements, three unknowns, three sources"},
            "X": np.round(np.random.default_rng(7).normal(size=(6, 3)), 3).tolist(),
            "n_sources": 3,
            "rows": [
                {"source": 1 + k // 2, "tradeoff": {"kind": "linear_precision", "sigma_sq": float(1 + k % 3)}}
                for k in range(6)
            ],
            "objective": "tail_bound",
            "delta": 0.1,
            "budget": 3.0,
            "true_theta": [0.5, -1.0, 2.0],
        },
    )


if __name__ == "__main__":
    main()
