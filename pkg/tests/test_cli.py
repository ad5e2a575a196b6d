import csv
import json
from pathlib import Path

import numpy as np
import pytest

from marginbound.cli import (
    main,
    parse_edge_grid,
    parse_epsilons,
    parse_query,
    parse_regime,
    regime_slug,
)
from marginbound.model import Regime


class TestParsing:
    def test_regimes(self):
        assert parse_regime("do()") == Regime.do({})
        assert parse_regime("obs") == Regime.do({})
        assert parse_regime("do(x2=0, x3=1)") == Regime.do({1: 0, 2: 1})
        for bad in ("do(x0=1)", "do(x2=2)", "do(x2=0,x2=1)", "x2=0"):
            with pytest.raises(ValueError):
                parse_regime(bad)

    def test_queries(self):
        q = parse_query("P(x4=1|do(x1=0))")
        assert q.kind == "prob" and q.target == 3 and q.regime == Regime.do({0: 0})
        q = parse_query("ATE(x4~x1|do(x3=0))")
        assert q.kind == "ate" and q.treatment == 0 and q.base_regime == Regime.do({2: 0})
        assert parse_query("ATE(x4~x1)").base_regime == Regime.do({})
        with pytest.raises(ValueError):
            parse_query("P(x4|do())")

    def test_epsilons_and_grids(self):
        assert parse_epsilons("x1->x4=0.06;x1<->x4=0.12") == {"x1->x4": 0.06, "x1<->x4": 0.12}
        label, values = parse_edge_grid("x1<->x4=0.02:0.06:0.02")
        assert label == "x1<->x4" and values == [0.02, 0.04, 0.06]
        assert parse_edge_grid("x1->x4=0.5,0.1")[1] == [0.5, 0.1]

    def test_slugs(self):
        assert regime_slug(Regime.do({})) == "obs"
        assert regime_slug(Regime.do({1: 0, 2: 1})) == "x2-0_x3-1"


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    code = main([
        "simulate", "--n", "4", "--seed", "7", "--confounders", "2",
        "--regimes", "paper-n4", "--out-dir", str(root / "data"),
    ])
    assert code == 0
    return root


class TestSimulate:
    def test_writes_eleven_tables(self, workdir):
        files = sorted((workdir / "data" / "tables").glob("*.json"))
        assert len(files) == 11
        assert (workdir / "data" / "scm.json").exists()
        assert (workdir / "data" / "manifest.json").exists()

    def test_sampled_outputs_are_reproducible(self, tmp_path):
        for d in ("a", "b"):
            code = main([
                "simulate", "--n", "4", "--seed", "1", "--samples", "1000",
                "--regimes", "do();do(x2=0)", "--out-dir", str(tmp_path / d),
            ])
            assert code == 0
        for name in ("obs.json", "x2-0.json"):
            a = (tmp_path / "a" / "tables" / name).read_bytes()
            b = (tmp_path / "b" / "tables" / name).read_bytes()
            assert a == b

    def test_variable_cap(self, tmp_path, capsys):
        code = main(["simulate", "--n", "12", "--out-dir", str(tmp_path / "x")])
        assert code == 1
        assert "error" in capsys.readouterr().err


def read_csv(path: Path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


class TestBound:
    def test_identified_query_has_zero_width(self, workdir):
        out = workdir / "bound_ident.csv"
        code = main([
            "bound", "--model", "paper-n4", "--tables", str(workdir / "data"),
            "--query", "P(x4=1|do(x2=1))", "--out", str(out),
        ])
        assert code == 0
        row = read_csv(out)[0]
        assert float(row["upper"]) - float(row["lower"]) <= 1e-9
        assert row["status"] == "optimal"

    def test_batch_contains_truth_and_is_deterministic(self, workdir):
        out1, out2 = workdir / "all1.csv", workdir / "all2.csv"
        for out in (out1, out2):
            code = main([
                "bound", "--model", "paper-n4", "--tables", str(workdir / "data"),
                "--all-single-double", "--scm", str(workdir / "data" / "scm.json"),
                "--out", str(out),
            ])
            assert code == 0
        assert out1.read_bytes() == out2.read_bytes()
        rows = read_csv(out1)
        assert len(rows) == 72
        for row in rows:
            lo, hi, tv = float(row["lower"]), float(row["upper"]), float(row["true_value"])
            assert -1e-9 <= lo <= hi <= 1 + 1e-9
            assert lo - 1e-7 <= tv <= hi + 1e-7

    def test_falsified_exit_code(self, workdir):
        out = workdir / "falsified.csv"
        code = main([
            "bound", "--model", "paper-n4", "--tables", str(workdir / "data"),
            "--query", "P(x4=1|do(x1=0))", "--epsilon", "x1<->x4=0.01",
            "--out", str(out),
        ])
        assert code == 2
        assert read_csv(out)[0]["status"] == "falsified"

    def test_plot_and_json_outputs(self, workdir):
        svg = workdir / "bounds.svg"
        js = workdir / "bounds.json"
        code = main([
            "bound", "--model", "paper-n4", "--tables", str(workdir / "data"),
            "--query", "P(x4=1|do(x1=0))", "--query", "P(x4=1|do(x1=1))",
            "--plot", str(svg), "--json-out", str(js),
        ])
        assert code == 0
        assert svg.read_text().startswith("<?xml")
        records = json.loads(js.read_text())["results"]
        assert records[0]["margin"] == "M2"

    def test_per_query_errors_do_not_abort(self, workdir):
        out = workdir / "mixed.csv"
        code = main([
            "bound", "--model", "paper-n4", "--tables", str(workdir / "data"),
            "--query", "ATE(x4~x1|do(x2=1,x3=1))",  # references all four variables
            "--query", "ATE(x4~x1|do(x2=1))",
            "--out", str(out),
        ])
        assert code == 0
        rows = read_csv(out)
        assert len(rows) == 2
        assert rows[0]["status"] == "error:NoEligibleMargin"
        assert rows[1]["status"] == "optimal"


class TestSweep:
    def test_single_point_at_one_matches_bound(self, workdir):
        bound_out = workdir / "b.csv"
        sweep_out = workdir / "s.csv"
        assert main([
            "bound", "--model", "paper-n4", "--tables", str(workdir / "data"),
            "--query", "P(x4=1|do(x1=1))", "--out", str(bound_out),
        ]) == 0
        assert main([
            "sweep", "--model", "paper-n4", "--tables", str(workdir / "data"),
            "--edge", "x1<->x4=1.0", "--query", "P(x4=1|do(x1=1))", "--out", str(sweep_out),
        ]) == 0
        b, s = read_csv(bound_out)[0], read_csv(sweep_out)[0]
        assert float(b["lower"]) == pytest.approx(float(s["lower"]), abs=1e-9)
        assert float(b["upper"]) == pytest.approx(float(s["upper"]), abs=1e-9)

    def test_monotone_nesting_and_infeasible_flip(self, workdir):
        out = workdir / "sweep.csv"
        svg = workdir / "sweep.svg"
        code = main([
            "sweep", "--model", "paper-n4", "--tables", str(workdir / "data"),
            "--edge", "x1<->x4=0.02:0.20:0.02", "--query", "P(x4=1|do(x1=1))",
            "--out", str(out), "--plot", str(svg), "--scm", str(workdir / "data" / "scm.json"),
        ])
        assert code == 2  # some grid points are infeasible
        rows = read_csv(out)
        assert len(rows) == 10
        seen_feasible = False
        prev_lo, prev_hi = None, None
        for row in rows:  # epsilon ascending: intervals must widen, and
            if row["status"] == "optimal":  # infeasibility only below the threshold
                lo, hi = float(row["lower"]), float(row["upper"])
                if prev_lo is not None:
                    assert lo <= prev_lo + 1e-9 and hi >= prev_hi - 1e-9
                prev_lo, prev_hi = lo, hi
                seen_feasible = True
            else:
                assert not seen_feasible, "infeasible point above a feasible one"
        assert seen_feasible
        assert svg.exists()

    def test_unknown_edge_rejected(self, workdir, capsys):
        code = main([
            "sweep", "--model", "paper-n4", "--tables", str(workdir / "data"),
            "--edge", "x2->x3=0.1", "--query", "P(x4=1|do(x1=1))",
        ])
        assert code == 1


class TestFalsify:
    def test_consistent_model_is_feasible(self, workdir, capsys):
        code = main(["falsify", "--model", "paper-n4", "--tables", str(workdir / "data")])
        assert code == 0
        assert "feasible" in capsys.readouterr().out

    def test_tight_epsilon_blames_weak_edge(self, workdir, capsys):
        code = main([
            "falsify", "--model", "paper-n4", "--tables", str(workdir / "data"),
            "--epsilon", "x1<->x4=0.01",
        ])
        assert code == 2
        out = capsys.readouterr().out
        assert "falsified" in out
        assert "weak-bidir" in out

    def test_contradictory_tables_blame_bindings(self, tmp_path, capsys):
        from marginbound.model import MarginSpec, ModelSpec, RegimeTable
        from marginbound.model import dump_json

        model = ModelSpec(2, (MarginSpec(id=1, vars=(0, 1)),))
        dump_json(model.to_json_dict(), tmp_path / "model.json")
        t1 = RegimeTable(Regime.do({}), np.array([0.4, 0.1, 0.2, 0.3]))
        t2 = RegimeTable(Regime.do({}), np.array([0.1, 0.4, 0.3, 0.2]))
        (tmp_path / "tables").mkdir()
        dump_json(t1.to_json_dict(), tmp_path / "tables" / "a.json")
        dump_json(t2.to_json_dict(), tmp_path / "tables" / "b.json")
        dump_json(
            {"n_vars": 2, "regimes": [
                {"regime": t1.regime.to_json_dict(), "file": "tables/a.json"},
                {"regime": t2.regime.to_json_dict(), "file": "tables/b.json"},
            ]},
            tmp_path / "manifest.json",
        )
        code = main(["falsify", "--model", str(tmp_path / "model.json"), "--tables", str(tmp_path)])
        assert code == 2
        assert "binding" in capsys.readouterr().out


class TestExportVerify:
    def test_export_then_verify(self, workdir):
        cert = workdir / "cert.json"
        assert main([
            "bound", "--model", "paper-n4", "--tables", str(workdir / "data"),
            "--query", "P(x4=1|do(x1=0))", "--certificate-out", str(cert),
            "--out", str(workdir / "ignored.csv"),
        ]) == 0
        assert main([
            "export-lp", "--model", "paper-n4", "--tables", str(workdir / "data"),
            "--query", "P(x4=1|do(x1=0))", "--format", "mps",
            "--out", str(workdir / "prog.mps"),
        ]) == 0
        assert (workdir / "prog.mps").read_text().startswith("NAME")
        assert main([
            "verify-certificate", "--model", "paper-n4", "--tables", str(workdir / "data"),
            "--query", "P(x4=1|do(x1=0))", "--certificate", str(cert),
        ]) == 0

    def test_perturbed_certificate_fails(self, workdir, capsys):
        cert = json.loads((workdir / "cert.json").read_text())
        cert["theta_lower"][0] += 0.1
        bad = workdir / "bad_cert.json"
        bad.write_text(json.dumps(cert))
        code = main([
            "verify-certificate", "--model", "paper-n4", "--tables", str(workdir / "data"),
            "--query", "P(x4=1|do(x1=0))", "--certificate", str(bad),
        ])
        assert code == 1
        out = capsys.readouterr().out
        assert "INVALID" in out
        assert "1.000e-01" in out  # the +0.1 shows up as the worst violation
        assert "violated:" in out

    def test_malformed_model_file(self, workdir, tmp_path, capsys):
        bad = tmp_path / "model.json"
        bad.write_text("{not json")
        code = main([
            "bound", "--model", str(bad), "--tables", str(workdir / "data"),
            "--query", "P(x4=1|do(x1=0))",
        ])
        assert code == 1
        assert "error" in capsys.readouterr().err

    def test_usage_errors_exit_one(self, capsys):
        assert main(["bound", "--tables", "x"]) == 1  # missing --model
        assert main(["no-such-command"]) == 1
        assert main(["--help"]) == 0
