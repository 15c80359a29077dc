import json

import numpy as np
import pytest
import yaml

from mdgan.cli import main
from mdgan.errors import ConfigurationError
from mdgan.experiment import (
    ExperimentConfig,
    emit_report,
    read_metrics_csv,
    run_experiment,
    write_metrics,
)

QUICK = {
    "dataset": {
        "name": "blob-test",
        "synthetic": {"kind": "blob", "n_normal": 150, "n_anomaly": 30,
                      "dim": 5, "separation": 4.0, "seed": 9},
    },
    "train": {"epochs": 2, "batch_size": 32, "warm_ups": [0, 3]},
    "run": {"seeds": [1, 2, 3], "figures": False},
}


def quick_config(tmp_path, **overrides):
    raw = json.loads(json.dumps(QUICK))
    raw["run"]["output_dir"] = str(tmp_path / "out")
    raw["run"].update(overrides)
    return ExperimentConfig.from_dict(raw)


class TestConfigParsing:
    def test_yaml_roundtrip(self, tmp_path):
        path = tmp_path / "config.yaml"
        path.write_text(yaml.safe_dump(QUICK))
        config = ExperimentConfig.from_yaml(path)
        assert config.dataset_name == "blob-test"
        assert config.warm_ups == [0, 3]
        assert config.seeds == [1, 2, 3]

    def test_duplicate_seeds_rejected(self, tmp_path):
        with pytest.raises(ConfigurationError):
            quick_config(tmp_path, seeds=[1, 1])

    def test_empty_warm_ups_rejected(self):
        raw = json.loads(json.dumps(QUICK))
        raw["train"]["warm_ups"] = []
        with pytest.raises(ConfigurationError):
            ExperimentConfig.from_dict(raw)

    def test_config_id_stable(self, tmp_path):
        assert quick_config(tmp_path).config_id() == quick_config(tmp_path).config_id()


class TestRunExperiment:
    def test_record_counting_contract(self, tmp_path):
        config = quick_config(tmp_path)
        manifest = run_experiment(config)
        records = read_metrics_csv(tmp_path / "out" / "metrics.csv")
        # 3 seeds x (1 baseline + 2 warm-ups) = 9 records
        assert len(records) == 9
        assert sum(r["config"] == "baseline" for r in records) == 3
        assert len(manifest["runs"]) == 9
        assert manifest["status"] == "completed"

    def test_outputs_exist(self, tmp_path):
        config = quick_config(tmp_path)
        run_experiment(config)
        out = tmp_path / "out"
        for name in ("manifest.json", "metrics.csv", "metrics.json",
                     "aggregate_report.csv", "aggregate_report.md",
                     "aggregate_report.json"):
            assert (out / name).exists(), name
        traces = list((out / "traces").glob("*.csv"))
        assert len(traces) == 9
        header = traces[0].read_text().splitlines()[0]
        assert header == "epoch,loss_name,value"

    def test_rerun_is_byte_identical(self, tmp_path):
        config = quick_config(tmp_path)
        run_experiment(config, tmp_path / "a")
        run_experiment(config, tmp_path / "b")
        for name in ("metrics.csv", "aggregate_report.csv", "aggregate_report.md"):
            assert (tmp_path / "a" / name).read_bytes() == \
                (tmp_path / "b" / name).read_bytes()

    def test_parallel_matches_serial(self, tmp_path):
        serial = quick_config(tmp_path)
        run_experiment(serial, tmp_path / "serial")
        parallel = quick_config(tmp_path, jobs=2)
        run_experiment(parallel, tmp_path / "parallel")
        assert (tmp_path / "serial" / "metrics.csv").read_bytes() == \
            (tmp_path / "parallel" / "metrics.csv").read_bytes()

    def test_figures_rendered(self, tmp_path):
        config = quick_config(tmp_path, figures=True, seeds=[1])
        run_experiment(config)
        figures = list((tmp_path / "out" / "figures").glob("*.png"))
        assert any(f.name == "improvement.png" for f in figures)
        assert len(figures) == 4  # 3 runs + the improvement chart


class TestEmitReport:
    @staticmethod
    def synthetic_records():
        rng = np.random.default_rng(0)
        records = []
        for seed in range(6):
            base = 0.7 + 0.02 * rng.standard_normal()
            records.append({"dataset": "synth", "config": "baseline", "seed": seed,
                            "auc_roc": base, "auc_pr": base, "eer": 1 - base})
        for w in (0, 1, 3, 6):
            for seed in range(6):
                v = 0.75 + 0.02 * rng.standard_normal()
                records.append({"dataset": "synth", "config": f"warmup{w}",
                                "seed": seed, "warm_up": w,
                                "auc_roc": v, "auc_pr": v, "eer": 1 - v})
        return records

    def test_column_structure(self, tmp_path):
        emit_report(self.synthetic_records(), tmp_path)
        lines = (tmp_path / "aggregate_report.csv").read_text().splitlines()
        header = lines[0].split(",")
        assert header[3:] == ["warmup0", "warmup1", "warmup3", "warmup6"]
        assert len(lines) == 1 + 3  # one dataset x three metrics

    def test_markdown_and_csv_agree(self, tmp_path):
        emit_report(self.synthetic_records(), tmp_path)
        csv_cells = [
            line.split(",")[3:]
            for line in (tmp_path / "aggregate_report.csv").read_text().splitlines()[1:]
        ]
        md_cells = [
            [c.strip() for c in line.strip("|").split("|")[3:]]
            for line in (tmp_path / "aggregate_report.md").read_text().splitlines()[2:]
        ]
        assert csv_cells == md_cells

    def test_cell_format(self, tmp_path):
        import re

        emit_report(self.synthetic_records(), tmp_path)
        body = (tmp_path / "aggregate_report.csv").read_text().splitlines()[1:]
        for line in body:
            for cell in line.split(",")[3:]:
                assert re.fullmatch(r"-?\d+\.\d{2}%\*?", cell), cell

    def test_empty_records_rejected(self, tmp_path):
        with pytest.raises(ConfigurationError):
            emit_report([], tmp_path)


class TestCliEntry:
    def test_run_verb(self, tmp_path, capsys):
        config_path = tmp_path / "config.yaml"
        raw = json.loads(json.dumps(QUICK))
        raw["run"]["figures"] = False
        config_path.write_text(yaml.safe_dump(raw))
        code = main(["run", str(config_path), "-o", str(tmp_path / "out")])
        assert code == 0
        assert "artifacts" in capsys.readouterr().out
        assert (tmp_path / "out" / "metrics.csv").exists()

    def test_report_verb(self, tmp_path, capsys):
        config = quick_config(tmp_path)
        run_experiment(config)
        code = main(["report", str(tmp_path / "out" / "manifest.json")])
        assert code == 0
        assert "aggregate_report" in capsys.readouterr().out

    def test_synth_verb_smoke(self, tmp_path):
        code = main(["synth", "quick", "-o", str(tmp_path / "synth-out")])
        assert code == 0
        report = (tmp_path / "synth-out" / "aggregate_report.csv").read_text()
        assert len(report.splitlines()) > 1

    def test_unknown_preset_errors(self, tmp_path, capsys):
        code = main(["synth", "nope", "-o", str(tmp_path)])
        assert code == 2
        assert "unknown preset" in capsys.readouterr().err

    def test_metrics_roundtrip(self, tmp_path):
        records = TestEmitReport.synthetic_records()
        write_metrics(records, tmp_path)
        loaded = read_metrics_csv(tmp_path / "metrics.csv")
        assert len(loaded) == len(records)
        by_key = {(r["config"], r["seed"]): r for r in loaded}
        for r in records:
            assert by_key[(r["config"], r["seed"])]["auc_roc"] == pytest.approx(
                r["auc_roc"]
            )
