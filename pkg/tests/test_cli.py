import json
import subprocess
import sys

import pytest

from faircluster import ConfigurationError
from faircluster.cli import main, parse_seeds
from faircluster.io import RECORD_FIELDS

from conftest import FIXTURES

DATA = str(FIXTURES / "synthetic_b_21.csv")


@pytest.mark.parametrize("text,seeds", [("3", (0, 1, 2)), ("4-6", (4, 5, 6)), ("1,5,9", (1, 5, 9))])
def test_parse_seeds(text, seeds):
    assert parse_seeds(text) == seeds


@pytest.mark.parametrize("text", ["0", "a", "1-x"])
def test_parse_seeds_invalid(text):
    with pytest.raises(ConfigurationError):
        parse_seeds(text)


def test_gen_writes_fixture(tmp_path):
    out = tmp_path / "g.csv"
    assert main(["gen", "--out", str(out)]) == 0
    assert out.read_bytes() == (FIXTURES / "synthetic_b_21.csv").read_bytes()


def test_cluster_and_eval(tmp_path, capsys):
    labels, results = tmp_path / "l.csv", tmp_path / "r.json"
    code = main(
        ["cluster", DATA, "--sensitive", "group", "--k", "3", "--lambda", "0", "--seeds", "5",
         "--out", str(labels), "--results", str(results)]
    )
    assert code == 0
    out = capsys.readouterr().out
    assert "balance 0.667" in out and "met=True" in out
    rec = json.loads(results.read_text())["records"][0]
    assert tuple(rec) == RECORD_FIELDS
    assert rec["resolved_targets"] == ["2/3"] and len(rec["per_seed_costs"]) == 5
    assert main(["eval", DATA, "--sensitive", "group", "--labels", str(labels)]) == 0
    assert "clustering balance 0.667" in capsys.readouterr().out


def test_cluster_flow_reports_epsilon(capsys):
    assert main(["cluster", DATA, "--sensitive", "group", "--k", "2", "--algo", "flow", "--target", "0.5"]) == 0
    assert "epsilon adjustments" in capsys.readouterr().out


def test_infeasible_exit_2(capsys):
    code = main(["cluster", DATA, "--sensitive", "group", "--k", "2", "--target", "1", "--algo", "smpfc", "--r", "3"])
    assert code == 2
    assert "feasible_balance" in capsys.readouterr().err


def test_config_error_exit_3(capsys):
    assert main(["cluster", DATA, "--sensitive", "group", "--k", "0", "--lambda", "0"]) == 3
    assert main(["cluster", DATA, "--sensitive", "nope", "--k", "2", "--lambda", "0"]) == 3
    assert main(["cluster", DATA, "--sensitive", "group", "--k", "2"]) == 3
    assert main(["bogus"]) == 3


def test_io_error_exit_4(tmp_path):
    assert main(["cluster", str(tmp_path / "missing.csv"), "--sensitive", "g", "--k", "2", "--lambda", "0"]) == 4


def test_sweep_and_bench(tmp_path, capsys):
    out = tmp_path / "s.csv"
    assert main(["sweep", DATA, "--sensitive", "group", "--k", "3", "--lambdas", "0,1", "--seeds", "2",
                 "--out", str(out), "--format", "csv"]) == 0
    assert len(out.read_text().splitlines()) == 3
    b = tmp_path / "b.json"
    assert main(["bench", DATA, "--sensitive", "group", "--k", "3", "--lambda", "0.5", "--seeds", "2",
                 "--algos", "lloyd,mpfc,flow", "--baseline", "mpfc", "--out", str(b)]) == 0
    recs = json.loads(b.read_text())["records"]
    assert [r["algorithm"] for r in recs] == ["lloyd", "mpfc", "flow"]
    assert all("mpfc" in r["gaps"] for r in recs)


def test_fairlet_params(capsys):
    assert main(["fairlet-params", "0.9"]) == 0
    assert "p=9 q=10" in capsys.readouterr().out


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "faircluster", "fairlet-params", "0.75"], capture_output=True, text=True)
    assert res.returncode == 0 and "p=3 q=4" in res.stdout
