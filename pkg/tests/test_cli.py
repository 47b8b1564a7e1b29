import json
import subprocess
import sys

import numpy as np
import pytest

from resalloc.cli import main
from resalloc.scenario import EXIT_SCHEMA, EXIT_SEMANTIC, EXIT_SYNTAX, ScenarioError, build_scenario, parse_scenario


def run(argv, capsys):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def write(tmp_path, doc, name="s.json"):
    p = tmp_path / name
    p.write_text(doc if isinstance(doc, str) else json.dumps(doc), encoding="utf-8")
    return p


def support_doc(**over):
    doc = json.loads((__import__("conftest").FIXTURES / "support_linear.json").read_text())
    doc.update(over)
    return doc


class TestParsing:
    def test_golden_file(self, fixtures_dir):
        sc = parse_scenario(fixtures_dir / "support_linear.json")
        assert sc.kind == "support_allocation"
        assert len(sc.problem.sources) == 5 and sc.problem.d == 10
        # 1-based in the file, 0-based in memory
        assert sc.problem.sources[0].support == (2, 4, 6, 9)

    def test_out_of_range_index_is_semantic(self):
        doc = support_doc()
        doc["sources"][0]["support"] = [3, 11]
        with pytest.raises(ScenarioError) as e:
            build_scenario(doc)
        assert e.value.exit_code == EXIT_SEMANTIC
        assert "sources[0].support[1]" in str(e.value)

    def test_missing_budget_is_schema(self):
        doc = support_doc()
        del doc["budget"]
        with pytest.raises(ScenarioError) as e:
            build_scenario(doc)
        assert e.value.exit_code == EXIT_SCHEMA and "budget" in str(e.value)

    def test_wrong_type_is_schema(self):
        with pytest.raises(ScenarioError) as e:
            build_scenario(support_doc(budget="lots"))
        assert e.value.exit_code == EXIT_SCHEMA

    def test_unknown_kind(self):
        with pytest.raises(ScenarioError) as e:
            build_scenario({"kind": "nonsense"})
        assert e.value.exit_code == EXIT_SCHEMA

    def test_bad_json_is_syntax(self, tmp_path):
        with pytest.raises(ScenarioError) as e:
            parse_scenario(write(tmp_path, "{not json"))
        assert e.value.exit_code == EXIT_SYNTAX

    def test_missing_file_is_syntax(self, tmp_path):
        with pytest.raises(ScenarioError) as e:
            parse_scenario(tmp_path / "nope.json")
        assert e.value.exit_code == EXIT_SYNTAX

    def test_uncovered_coordinate_is_semantic(self):
        doc = support_doc(d=11)
        with pytest.raises(ScenarioError) as e:
            build_scenario(doc)
        assert e.value.exit_code == EXIT_SEMANTIC


class TestSolve:
    def test_table_output(self, fixtures_dir, capsys):
        code, out, _ = run(["solve", fixtures_dir / "support_linear.json"], capsys)
        assert code == 0
        assert "0.599137" in out and "converged" in out
        lines = [l for l in out.splitlines() if l.strip().startswith("1 ")]
        assert "source 4" in lines[0]

    def test_json_output(self, fixtures_dir, capsys):
        code, out, _ = run(["solve", fixtures_dir / "support_linear.json", "--output", "json"], capsys)
        d = json.loads(out)
        assert code == 0 and d["status"] == "converged"
        np.testing.assert_allclose(d["allocation"], [0.1935, 0.2074, 0, 0.5991, 0], atol=1e-3)
        assert sum(d["allocation"]) == pytest.approx(1.0)

    def test_budget_override(self, fixtures_dir, capsys):
        _, out, _ = run(["solve", fixtures_dir / "support_linear.json", "--output", "json", "--budget", "3"], capsys)
        assert sum(json.loads(out)["allocation"]) == pytest.approx(3.0)

    def test_aggregate(self, fixtures_dir, capsys):
        code, out, _ = run(["solve", fixtures_dir / "aggregate_two_sources.json", "--output", "json"], capsys)
        d = json.loads(out)
        assert code == 0 and d["weights"] == pytest.approx([0.8, 0.2]) and d["total_loss"] == pytest.approx(0.8)

    def test_infeasible_election(self, fixtures_dir, capsys):
        code, out, _ = run(["solve", fixtures_dir / "election_infeasible.json", "--output", "json"], capsys)
        d = json.loads(out)
        assert code == 3 and d["status"] == "infeasible"
        assert d["min_bias"] >= d["advantage"]
        assert d["bias_minimizing_allocation"] == pytest.approx([100.0])

    def test_not_converged(self, fixtures_dir, capsys):
        code, out, _ = run(["solve", fixtures_dir / "support_power.json", "--max-iters", "1", "--output", "json"], capsys)
        assert code == 2 and json.loads(out)["status"] != "converged"

    @pytest.mark.parametrize("name", ["design_random_6x3.json", "election_synthetic_51.json", "support_power.json"])
    def test_all_fixtures_solve(self, fixtures_dir, capsys, name):
        code, out, _ = run(["solve", fixtures_dir / name, "--output", "json"], capsys)
        assert code == 0
        json.loads(out)

    def test_error_exit_codes(self, tmp_path, capsys):
        assert run(["solve", write(tmp_path, "[1,")], capsys)[0] == EXIT_SYNTAX
        doc = support_doc()
        del doc["budget"]
        code, _, err = run(["solve", write(tmp_path, doc)], capsys)
        assert code == EXIT_SCHEMA and "budget" in err
        doc = support_doc()
        doc["sources"][2]["support"] = [11]
        code, _, err = run(["solve", write(tmp_path, doc)], capsys)
        assert code == EXIT_SEMANTIC and "sources[2].support[0]" in err


class TestSimulate:
    def test_report(self, fixtures_dir, capsys):
        code, out, _ = run(
            ["simulate", fixtures_dir / "aggregate_two_sources.json", "--trials", "20000", "--output", "json"], capsys
        )
        d = json.loads(out)
        assert code == 0 and d["pass"]
        rep = d["reports"][0]
        assert rep["predicted_risk"] == pytest.approx(0.8)
        assert abs(rep["empirical_risk"] - 0.8) <= 3 * rep["std_error"]

    def test_seeded_and_worker_independent(self, fixtures_dir, capsys):
        base = ["simulate", fixtures_dir / "support_linear.json", "--trials", "30000", "--output", "json", "--seed", "3"]
        _, a, _ = run(base, capsys)
        _, b, _ = run(base + ["--workers", "3"], capsys)
        assert json.loads(a) == json.loads(b)

    def test_design_tail(self, fixtures_dir, capsys):
        code, out, _ = run(["simulate", fixtures_dir / "design_random_6x3.json", "--trials", "20000", "--output", "json"], capsys)
        d = json.loads(out)
        assert code == 0 and d["pass"]

    def test_infeasible_simulation(self, fixtures_dir, capsys):
        code, _, _ = run(["simulate", fixtures_dir / "election_infeasible.json", "--trials", "100"], capsys)
        assert code == 3

    def test_bad_trials(self, fixtures_dir, capsys):
        assert run(["simulate", fixtures_dir / "aggregate_two_sources.json", "--trials", "0"], capsys)[0] == EXIT_SCHEMA


class TestRegime:
    def test_group_shares(self, fixtures_dir, capsys):
        code, out, _ = run(
            ["regime", fixtures_dir / "election_synthetic_51.json", "--budgets", "10000", "150000", "--output", "json"], capsys
        )
        d = json.loads(out)
        assert code == 0
        lo, hi = d["budgets"]
        assert hi["group_share"]["swing"] > lo["group_share"]["swing"]
        assert hi["group_share"]["swing"] > 0.5

    def test_table(self, fixtures_dir, capsys):
        code, out, _ = run(["regime", fixtures_dir / "election_synthetic_51.json", "--budgets", "10000", "150000"], capsys)
        assert code == 0 and "10000" in out and "swing" in out


def test_json_round_trip(fixtures_dir, capsys):
    _, out, _ = run(["solve", fixtures_dir / "support_power.json", "--output", "json"], capsys)
    d = json.loads(out)
    assert json.loads(json.dumps(d)) == d
    assert all(isinstance(x, float) for x in d["allocation"])


def test_console_entry_point(fixtures_dir):
    proc = subprocess.run(
        [sys.executable, "-m", "resalloc.cli", "solve", str(fixtures_dir / "aggregate_two_sources.json")],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0 and "0.8" in proc.stdout
