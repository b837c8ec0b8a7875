import csv
import json

import numpy as np
import pytest

from faircluster import ConfigurationError, DatasetError, FairnessSpec, RunConfig, dataset_balance, gen_synthetic, ingest_csv
from faircluster.experiments import bench, gap_percent, make_record, sweep_tradeoff
from faircluster.framework import run_multi
from faircluster.io import RECORD_FIELDS, emit_results, read_labels, write_dataset_csv, write_labels

from conftest import FIXTURES


def _write(path, text):
    path.write_text(text, encoding="utf-8")
    return path


class TestIngest:
    def test_three_rows(self, tmp_path):
        p = _write(tmp_path / "d.csv", "a,b,color\n1,2,red\n3,4,blue\n5,6,red\n")
        ds = ingest_csv(p, ["color"])
        assert (ds.n, ds.d, ds.n_features) == (3, 2, 1)
        assert ds.feature(0).groups == ("blue", "red")
        assert ds.points.tolist() == [[0, 0], [0.5, 0.5], [1, 1]]

    def test_single_group_rejected(self, tmp_path):
        p = _write(tmp_path / "d.csv", "a,color\n1,red\n2,red\n")
        with pytest.raises(DatasetError, match="single group"):
            ingest_csv(p, ["color"])

    def test_non_numeric_cell_reports_row(self, tmp_path):
        p = _write(tmp_path / "d.csv", "a,color\n1,red\nx,blue\n")
        with pytest.raises(DatasetError, match="row 3"):
            ingest_csv(p, ["color"])

    def test_missing_column(self, tmp_path):
        p = _write(tmp_path / "d.csv", "a,color\n1,red\n")
        with pytest.raises(DatasetError, match="not found"):
            ingest_csv(p, ["sex"])

    def test_id_column_ignored(self, tmp_path):
        p = _write(tmp_path / "d.csv", "id,a,color\nu1,1,red\nu2,3,blue\n")
        assert ingest_csv(p, ["color"], id_column="id").d == 1

    def test_bank_shaped(self, tmp_path):
        rng = np.random.default_rng(0)
        n = 40004
        p = tmp_path / "bank.csv"
        with open(p, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow([f"c{i}" for i in range(7)] + ["marital"])
            married = np.r_[np.ones(27214, dtype=bool), np.zeros(n - 27214, dtype=bool)]
            for row, m in zip(rng.integers(0, 100, (n, 7)).tolist(), married):
                w.writerow(row + ["married" if m else "single"])
        ds = ingest_csv(p, ["marital"])
        assert (ds.n, ds.d) == (40004, 7)


class TestSynthetic:
    def test_defaults(self):
        ds = gen_synthetic()
        assert (ds.n, ds.d) == (21, 2)
        assert dataset_balance(ds, 0) == 1

    def test_fixture_regenerates_byte_identical(self, tmp_path):
        write_dataset_csv(gen_synthetic(), tmp_path / "x.csv")
        assert (tmp_path / "x.csv").read_bytes() == (FIXTURES / "synthetic_b_21.csv").read_bytes()

    def test_round_trip(self, tmp_path):
        ds = gen_synthetic("a", 50, 3, 2, seed=4)
        write_dataset_csv(ds, tmp_path / "a.csv")
        back = ingest_csv(tmp_path / "a.csv", ["group"])
        assert (back.n, back.d) == (ds.n, ds.d)
        assert back.feature(0).counts().tolist() == ds.feature(0).counts().tolist()
        assert np.allclose(back.points, ds.points)

    def test_vanilla_on_separated_groups_is_unfair(self):
        ds = gen_synthetic("b", 60, 2, 3, seed=1)
        res = run_multi(ds, RunConfig(k=3, algorithm="lloyd", seeds=tuple(range(5))), FairnessSpec.from_tolerance(1))
        assert res.best.balances[0] == pytest.approx(0.0)

    @pytest.mark.parametrize("kw", [dict(kind="c"), dict(groups=1), dict(n=2, groups=3)])
    def test_invalid(self, kw):
        with pytest.raises(ConfigurationError):
            gen_synthetic(**kw)


class TestLabels:
    def test_round_trip(self, tmp_path):
        write_labels([2, 0, 1], tmp_path / "l.csv")
        assert read_labels(tmp_path / "l.csv", 3).tolist() == [2, 0, 1]

    def test_wrong_length(self, tmp_path):
        write_labels([2, 0, 1], tmp_path / "l.csv")
        with pytest.raises(DatasetError):
            read_labels(tmp_path / "l.csv", 4)


def _record(fixture21, algo="mpfc"):
    cfg = RunConfig(k=3, algorithm=algo, seeds=(0, 1))
    spec = FairnessSpec.from_tolerance(0.5)
    return make_record(fixture21, cfg, spec, run_multi(fixture21, cfg, spec))


class TestEmit:
    def test_json(self, fixture21, tmp_path):
        emit_results([_record(fixture21)], tmp_path / "r.json")
        doc = json.loads((tmp_path / "r.json").read_text())
        rec = doc["records"][0]
        assert doc["schema_version"] == 1
        assert tuple(rec) == RECORD_FIELDS
        assert rec["best_cost"] == min(rec["per_seed_costs"])
        assert rec["resolved_targets"] == ["1/3"]

    def test_csv_one_row_plus_header(self, fixture21, tmp_path):
        emit_results([_record(fixture21)], tmp_path / "r.csv", "csv")
        rows = list(csv.reader(open(tmp_path / "r.csv")))
        assert len(rows) == 2 and tuple(rows[0]) == RECORD_FIELDS

    def test_empty_rejected(self, tmp_path):
        with pytest.raises(ConfigurationError):
            emit_results([], tmp_path / "r.json")

    def test_unknown_format(self, fixture21, tmp_path):
        with pytest.raises(ConfigurationError):
            emit_results([_record(fixture21)], tmp_path / "r.x", "xml")


class TestExperiments:
    def test_gap(self):
        assert gap_percent(110, 100) == pytest.approx(10.0)

    def test_bench_gaps_relative_to_baseline(self, fixture21):
        recs = bench(fixture21, ["lloyd", "mpfc"], 3, FairnessSpec.from_tolerance(0), RunConfig(k=3, seeds=(0, 1)), baseline="lloyd")
        by = {r.algorithm: r for r in recs}
        assert by["lloyd"].gaps["lloyd"] == 0.0
        assert by["mpfc"].gaps["lloyd"] == pytest.approx(gap_percent(by["mpfc"].best_cost, by["lloyd"].best_cost))

    def test_bench_unknown_baseline(self, fixture21):
        with pytest.raises(ConfigurationError):
            bench(fixture21, ["mpfc"], 3, FairnessSpec.from_tolerance(0), baseline="flow")

    def test_sweep_vanilla_point(self, fixture21):
        recs = sweep_tradeoff(fixture21, "mpfc", 3, [1.0], RunConfig(k=3, seeds=(0, 1)))
        assert len(recs) == 1 and recs[0].resolved_targets == ["0"]

    def test_sweep_monotone_targets(self, fixture21):
        recs = sweep_tradeoff(fixture21, "mpfc", 3, [0.0, 0.5, 1.0], RunConfig(k=3, seeds=tuple(range(5))))
        costs = [r.best_cost for r in recs]
        assert costs[0] >= costs[-1]

    def test_best_cost_invariant(self, fixture21):
        rec = _record(fixture21)
        with pytest.raises(ConfigurationError):
            type(rec)(**{**rec.__dict__, "best_cost": rec.best_cost + 1})
