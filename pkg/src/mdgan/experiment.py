"""Experiment orchestration: config parsing, multi-seed sweeps, and reports.

A run manifest (JSON) is written before any training starts and finalized
once every run has completed or failed; metric CSVs and aggregate reports
are byte-identical across re-executions of the same config.
"""

from __future__ import annotations

import concurrent.futures
import hashlib
import json
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .data import (
    DatasetSchema,
    DatasetSplit,
    RawDataset,
    drop_wide_categoricals,
    fit_and_apply_normalization,
    load_csv,
    make_synthetic,
    partition,
)
from .errors import ConfigurationError, TrainingDiverged
from .metrics import METRIC_NAMES, aggregate_improvement, score_test_set
from .training import LossTrace, TrainConfig, train_baseline, train_mdgan

METRIC_COLUMNS = ("dataset", "config", "seed", "auc_roc", "auc_pr", "eer")
BASELINE = "baseline"


@dataclass
class ExperimentConfig:
    dataset_name: str
    synthetic: dict | None = None
    csv_path: str | None = None
    schema: DatasetSchema | None = None
    train_size: int | None = None
    train_fraction: float | None = None
    use_predefined: bool = False
    model: dict = field(default_factory=dict)
    epochs: int = 30
    batch_size: int = 64
    warm_ups: list[int] = field(default_factory=lambda: [0, 1, 3, 6])
    g_loss_mode: str = "non_saturating"
    seeds: list[int] = field(default_factory=lambda: list(range(5)))
    jobs: int = 1
    figures: bool = True
    output_dir: str = "mdgan-out"

    def __post_init__(self):
        if not self.warm_ups:
            raise ConfigurationError("warm_ups must be nonempty")
        if len(set(self.seeds)) != len(self.seeds):
            raise ConfigurationError("seeds must be distinct")
        if (self.synthetic is None) == (self.csv_path is None):
            raise ConfigurationError("configure exactly one of synthetic or csv dataset")

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        ds = raw.get("dataset", {})
        model = raw.get("model", {})
        train = raw.get("train", {})
        run = raw.get("run", {})
        schema = None
        csv_path = None
        if "csv" in ds:
            c = ds["csv"]
            csv_path = c["path"]
            schema = DatasetSchema(
                label_column=c["label_column"],
                positive_label=c.get("positive_label"),
                partition_column=c.get("partition_column"),
            )
        seeds = run.get("seeds")
        if seeds is None:
            seeds = list(range(int(run.get("seed_count", 5))))
        return cls(
            dataset_name=ds.get("name", "dataset"),
            synthetic=ds.get("synthetic"),
            csv_path=csv_path,
            schema=schema,
            train_size=ds.get("csv", {}).get("train_size"),
            train_fraction=ds.get("csv", {}).get("train_fraction"),
            use_predefined=bool(ds.get("csv", {}).get("use_predefined", False)),
            model=model,
            epochs=int(train.get("epochs", 30)),
            batch_size=int(train.get("batch_size", 64)),
            warm_ups=list(train.get("warm_ups", [0, 1, 3, 6])),
            g_loss_mode=train.get("g_loss_mode", "non_saturating"),
            seeds=[int(s) for s in seeds],
            jobs=int(run.get("jobs", 1)),
            figures=bool(run.get("figures", True)),
            output_dir=run.get("output_dir", "mdgan-out"),
        )

    @classmethod
    def from_yaml(cls, path) -> "ExperimentConfig":
        with open(path) as fh:
            raw = yaml.safe_load(fh)
        if not isinstance(raw, dict):
            raise ConfigurationError(f"config file is not a mapping: {path}")
        return cls.from_dict(raw)

    def resolved(self) -> dict:
        out = asdict(self)
        return out

    def config_id(self) -> str:
        canonical = json.dumps(self.resolved(), sort_keys=True, default=str)
        return hashlib.sha256(canonical.encode()).hexdigest()[:16]


def load_raw_dataset(config: ExperimentConfig) -> RawDataset:
    if config.synthetic is not None:
        spec = dict(config.synthetic)
        return make_synthetic(
            kind=spec.get("kind", "blob"),
            n_normal=int(spec.get("n_normal", 900)),
            n_anomaly=int(spec.get("n_anomaly", 100)),
            dim=int(spec.get("dim", 8)),
            separation=float(spec.get("separation", 4.0)),
            seed=int(spec.get("seed", 0)),
        )
    raw = load_csv(config.csv_path, config.schema)
    return drop_wide_categoricals(raw)


def split_for_seed(raw: RawDataset, config: ExperimentConfig, seed: int) -> DatasetSplit:
    split = partition(
        raw,
        seed=seed,
        train_size=config.train_size,
        train_fraction=config.train_fraction
        if (config.train_size or config.train_fraction)
        else 0.8,
        use_predefined=config.use_predefined,
    )
    return fit_and_apply_normalization(split)


def _train_config(config: ExperimentConfig, seed: int, warm_up: int) -> TrainConfig:
    m = config.model
    return TrainConfig(
        epochs=config.epochs,
        batch_size=config.batch_size,
        warm_up=warm_up,
        seed=seed,
        g_loss_mode=config.g_loss_mode,
        latent_dim=m.get("latent_dim"),
        g_hidden=m.get("g_hidden"),
        d1_hidden=m.get("d1_hidden"),
        g_batch_norm=bool(m.get("g_batch_norm", True)),
        dropout_rate=float(m.get("dropout_rate", 0.10)),
    )


def run_seed(raw: RawDataset, config: ExperimentConfig, seed: int) -> dict:
    """Baseline plus one GAN run per warm-up value, all on this seed's split.

    The baseline is trained once and compared against every warm-up
    configuration.  A diverged run is recorded and the rest continue.
    """
    split = split_for_seed(raw, config, seed)
    records: list[dict] = []
    traces: dict[str, LossTrace] = {}
    statuses: list[dict] = []

    def _one(name: str, fn):
        started = time.perf_counter()
        try:
            model, trace = fn()
            traces[name] = trace
            statuses.append({
                "seed": seed, "config": name, "status": "completed",
                "best_epoch": trace.best_epoch,
                "seconds": round(time.perf_counter() - started, 3),
            })
            return model
        except TrainingDiverged as exc:
            statuses.append({
                "seed": seed, "config": name, "status": f"diverged: {exc}",
                "seconds": round(time.perf_counter() - started, 3),
            })
            return None

    base = _one(BASELINE, lambda: train_baseline(split, _train_config(config, seed, 0)))
    if base is not None:
        records.append({"dataset": config.dataset_name, "config": BASELINE,
                        "seed": seed, **score_test_set(base, split)})
    for w in config.warm_ups:
        model = _one(f"warmup{w}",
                     lambda w=w: train_mdgan(split, _train_config(config, seed, w)))
        if model is not None:
            records.append({"dataset": config.dataset_name, "config": f"warmup{w}",
                            "seed": seed, "warm_up": w,
                            **score_test_set(model, split)})
    return {"seed": seed, "records": records, "traces": traces, "statuses": statuses}


def _format_cell(row: dict) -> str:
    return f"{row['improvement_pct']:.2f}%" + ("*" if row["significant_at_95"] else "")


def emit_report(records: list[dict], out_dir: Path, formats=("csv", "json", "markdown")) -> list[Path]:
    """Aggregate improvement-over-baseline table: one row per (dataset, metric),
    one column per warm-up value, significance stars from the paired t-test."""
    if not records:
        raise ConfigurationError("no metric records to report")
    baseline = [r for r in records if r["config"] == BASELINE]
    gan = [r for r in records if r["config"] != BASELINE]
    if not baseline or not gan:
        raise ConfigurationError("need both baseline and GAN records to report")
    rows = aggregate_improvement(gan, baseline)
    warm_ups = sorted({r["warm_up"] for r in rows})
    cell = {(r["dataset"], r["metric"], r["warm_up"]): r for r in rows}
    datasets = sorted({r["dataset"] for r in rows})

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    header = ["dataset", "metric", "orientation"] + [f"warmup{w}" for w in warm_ups]
    table = []
    for dataset in datasets:
        for metric in METRIC_NAMES:
            orientation = "lower_is_better" if metric == "eer" else "higher_is_better"
            table.append(
                [dataset, metric, orientation]
                + [_format_cell(cell[(dataset, metric, w)]) for w in warm_ups]
            )

    if "csv" in formats:
        path = out_dir / "aggregate_report.csv"
        with open(path, "w", newline="") as fh:
            fh.write(",".join(header) + "\n")
            for row in table:
                fh.write(",".join(row) + "\n")
        written.append(path)
    if "markdown" in formats:
        path = out_dir / "aggregate_report.md"
        with open(path, "w") as fh:
            fh.write("| " + " | ".join(header) + " |\n")
            fh.write("|" + "|".join("---" for _ in header) + "|\n")
            for row in table:
                fh.write("| " + " | ".join(row) + " |\n")
        written.append(path)
    if "json" in formats:
        path = out_dir / "aggregate_report.json"
        with open(path, "w") as fh:
            json.dump(rows, fh, indent=2, sort_keys=True)
            fh.write("\n")
        written.append(path)
    return written


def write_metrics(records: list[dict], out_dir: Path) -> list[Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    records = sorted(records, key=lambda r: (r["dataset"], r["config"], r["seed"]))
    csv_path = out_dir / "metrics.csv"
    with open(csv_path, "w", newline="") as fh:
        fh.write(",".join(METRIC_COLUMNS) + "\n")
        for r in records:
            fh.write(",".join([
                r["dataset"], r["config"], str(r["seed"]),
                *(repr(float(r[m])) for m in METRIC_NAMES),
            ]) + "\n")
    json_path = out_dir / "metrics.json"
    with open(json_path, "w") as fh:
        json.dump([{k: r[k] for k in METRIC_COLUMNS if k in r} for r in records],
                  fh, indent=2)
        fh.write("\n")
    return [csv_path, json_path]


def read_metrics_csv(path) -> list[dict]:
    records = []
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        if header != list(METRIC_COLUMNS):
            raise ConfigurationError(f"unexpected metrics header in {path}")
        for line in fh:
            parts = line.strip().split(",")
            rec = {
                "dataset": parts[0], "config": parts[1], "seed": int(parts[2]),
                **{m: float(v) for m, v in zip(METRIC_NAMES, parts[3:])},
            }
            if rec["config"].startswith("warmup"):
                rec["warm_up"] = int(rec["config"][len("warmup"):])
            records.append(rec)
    return records


def write_traces(traces: dict[tuple[int, str], LossTrace], out_dir: Path) -> list[Path]:
    trace_dir = Path(out_dir) / "traces"
    trace_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for (seed, name), trace in sorted(traces.items()):
        path = trace_dir / f"seed{seed}_{name}.csv"
        with open(path, "w", newline="") as fh:
            fh.write("epoch,loss_name,value\n")
            for epoch, loss_name, value in trace.rows():
                fh.write(f"{epoch},{loss_name},{repr(float(value))}\n")
        written.append(path)
    return written


def _sha256(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def run_experiment(config: ExperimentConfig, output_dir=None) -> dict:
    """Execute the full sweep and emit the manifest, metrics, traces, report,
    and figures.  Returns the finalized manifest."""
    out_dir = Path(output_dir or config.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    raw = load_raw_dataset(config)

    manifest = {
        "config": config.resolved(),
        "config_id": config.config_id(),
        "dataset_fingerprint": hashlib.sha256(
            raw.feature_matrix().tobytes() + raw.labels.tobytes()
        ).hexdigest()[:16],
        "runs": [],
        "artifacts": {},
        "status": "running",
    }
    manifest_path = out_dir / "manifest.json"
    manifest_path.write_text(json.dumps(manifest, indent=2, default=str) + "\n")

    started = time.perf_counter()
    if config.jobs > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=config.jobs) as pool:
            results = list(pool.map(run_seed, [raw] * len(config.seeds),
                                    [config] * len(config.seeds), config.seeds))
    else:
        results = [run_seed(raw, config, seed) for seed in config.seeds]

    records: list[dict] = []
    traces: dict[tuple[int, str], LossTrace] = {}
    for res in sorted(results, key=lambda r: r["seed"]):
        records.extend(res["records"])
        manifest["runs"].extend(res["statuses"])
        for name, trace in res["traces"].items():
            traces[(res["seed"], name)] = trace

    artifacts = write_metrics(records, out_dir)
    artifacts += write_traces(traces, out_dir)
    try:
        artifacts += emit_report(records, out_dir)
    except ConfigurationError:
        pass  # all runs of one side diverged; metrics are still on disk
    if config.figures:
        from .figures import render_figures

        artifacts += render_figures(traces, records, out_dir)

    all_completed = all(r["status"] == "completed" for r in manifest["runs"])
    manifest["status"] = "completed" if all_completed else "had_failures"
    manifest["total_seconds"] = round(time.perf_counter() - started, 3)
    manifest["artifacts"] = {
        str(p.relative_to(out_dir)): _sha256(p) for p in artifacts
    }
    manifest_path.write_text(json.dumps(manifest, indent=2, default=str) + "\n")
    return manifest
