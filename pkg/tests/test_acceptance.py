"""Acceptance gate: one test per criterion, each printing a pass/fail line.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the per-criterion
lines alongside the pytest output.
"""

import functools
import os
import time

import numpy as np
import pytest

from mdgan.data import fit_and_apply_normalization, make_synthetic, partition
from mdgan.experiment import (
    ExperimentConfig,
    emit_report,
    run_experiment,
    split_for_seed,
)
from mdgan.metrics import auc_pr, auc_roc, auc_roc as _auc, eer, t_critical_95
from mdgan.models import D1Spec, GeneratorSpec, build_d1, build_d2, build_generator
from mdgan.nn import (
    Affine,
    BatchNorm,
    Dropout,
    LayerStack,
    LeakyReLU,
    ReLU,
    Sigmoid,
    Tanh,
    bce_loss,
    mse_loss,
)
from mdgan.training import TrainConfig, train_baseline, train_mdgan

from gradcheck import check_stack_gradients, numerical_grad, relative_error
from test_metrics import brute_force_auc


def criterion(number, description):
    def decorate(fn):
        @functools.wraps(fn)
        def wrapper(*args, **kwargs):
            try:
                result = fn(*args, **kwargs)
            except BaseException as exc:
                outcome = "SKIP" if exc.__class__.__name__ == "Skipped" else "FAIL"
                print(f"[ACCEPTANCE] {outcome} criterion {number}: {description}")
                raise
            print(f"[ACCEPTANCE] PASS criterion {number}: {description}")
            return result

        return wrapper

    return decorate


@criterion(1, "gradient correctness for every layer type and both losses")
def test_criterion_1_gradients():
    started = time.perf_counter()
    rng = np.random.default_rng
    for seed in range(10):
        n, din, dout = 2 + seed % 4, 2 + seed % 3, 2 + (seed + 1) % 3
        x = rng(seed).standard_normal((n, din))
        cases = [
            (LayerStack([Affine(din, dout, rng(seed))], din), None),
            (LayerStack([Affine(din, dout, rng(seed)), LeakyReLU(0.2)], din), None),
            (LayerStack([Affine(din, dout, rng(seed)), ReLU()], din), None),
            (LayerStack([Affine(din, dout, rng(seed)), Tanh()], din), None),
            (LayerStack([Affine(din, dout, rng(seed)), Sigmoid()], din), None),
            (LayerStack([Affine(din, dout, rng(seed)), Dropout(0.3)], din), rng(seed)),
            (LayerStack([BatchNorm(din)], din), None),
        ]
        for stack, drop_rng in cases:
            check_stack_gradients(stack, x.copy(), drop_rng, tol=1e-4)

        p = rng(seed).uniform(0.05, 0.95, (n, 1))
        t = rng(seed + 1).integers(0, 2, (n, 1)).astype(float)
        _, grad = bce_loss(p, t)
        assert relative_error(grad, numerical_grad(lambda: bce_loss(p, t)[0], p)) < 1e-4

        a = rng(seed).standard_normal((n, din))
        b = rng(seed + 1).standard_normal((n, din))
        _, grad = mse_loss(a, b)
        assert relative_error(grad, numerical_grad(lambda: mse_loss(a, b)[0], b)) < 1e-4
    elapsed = time.perf_counter() - started
    assert elapsed < 10, f"gradient checks took {elapsed:.1f}s"


@criterion(2, "metric implementations match their independent oracles")
def test_criterion_2_metric_oracles():
    started = time.perf_counter()
    rng = np.random.default_rng(42)
    checked = 0
    while checked < 200:
        n = int(rng.integers(4, 51))
        labels = (rng.random(n) < 0.4).astype(int)
        if labels.min() == labels.max():
            continue
        scores = np.round(rng.standard_normal(n), 1)
        assert abs(auc_roc(scores, labels) - brute_force_auc(scores, labels)) < 1e-9
        checked += 1

    assert eer(np.array([1, 2, 8, 9.0]), np.array([0, 0, 1, 1])) == 0.0
    n = 10**4
    labels = (rng.random(n) < 0.5).astype(int)
    scores = rng.standard_normal(n)
    assert abs(eer(scores, labels) - 0.5) < 0.05

    for rate in (0.1, 0.3):
        labels = (rng.random(n) < rate).astype(int)
        scores = rng.standard_normal(n)
        assert abs(auc_pr(scores, labels) - labels.mean()) < 0.05
    elapsed = time.perf_counter() - started
    assert elapsed < 10, f"metric oracles took {elapsed:.1f}s"


@criterion(3, "warm-up >= epochs makes the GAN's D2 match the baseline")
def test_criterion_3_warm_up_equivalence():
    started = time.perf_counter()
    raw = make_synthetic("blob", 500, 60, 8, 4.0, seed=21)
    split = fit_and_apply_normalization(partition(raw, seed=5, train_size=400))
    cfg = dict(epochs=5, batch_size=64, seed=17)
    gan_d2, _ = train_mdgan(split, TrainConfig(warm_up=5, **cfg))
    base_d2, _ = train_baseline(split, TrainConfig(**cfg))
    for a, b in zip(gan_d2.get_state(), base_d2.get_state()):
        np.testing.assert_allclose(a, b, atol=1e-12)
    elapsed = time.perf_counter() - started
    assert elapsed < 30, f"equivalence run took {elapsed:.1f}s"


@criterion(4, "frozen discriminators are bit-identical across generator steps")
def test_criterion_4_freezing():
    raw = make_synthetic("blob", 300, 40, 6, 4.0, seed=8)
    split = fit_and_apply_normalization(partition(raw, seed=2, train_size=250))
    snapshots = {}
    counts = {"d1": 0, "d2": 0}

    def hook(event, models):
        which = "d1" if event.endswith("g_d1") else "d2"
        net = models.d1 if which == "d1" else models.d2
        if event.startswith("pre"):
            snapshots[which] = [p.copy() for p in net.state_arrays()]
        else:
            for before, after in zip(snapshots[which], net.state_arrays()):
                np.testing.assert_array_equal(before, after)
            counts[which] += 1

    train_mdgan(split, TrainConfig(epochs=3, batch_size=64, seed=4), step_hook=hook)
    assert counts["d1"] > 0 and counts["d1"] == counts["d2"]


@criterion(5, "blob end-to-end: baseline AUC >= 0.90, GAN within 0.02 of it")
def test_criterion_5_end_to_end_detection():
    started = time.perf_counter()
    # 900 normals: 800 go to the training pool, 100 join the 100 anomalies in test
    raw = make_synthetic("blob", 900, 100, 8, 4.0, seed=33)
    base_aucs, gan_aucs = [], []
    for seed in range(5):
        split = fit_and_apply_normalization(partition(raw, seed=seed, train_size=800))
        cfg = dict(epochs=30, batch_size=64, seed=seed)
        base, _ = train_baseline(split, TrainConfig(**cfg))
        gan, _ = train_mdgan(split, TrainConfig(warm_up=0, **cfg))
        from mdgan.metrics import rmse_score

        base_aucs.append(_auc(rmse_score(base, split.test), split.test_labels))
        gan_aucs.append(_auc(rmse_score(gan, split.test), split.test_labels))
    base_mean, gan_mean = np.mean(base_aucs), np.mean(gan_aucs)
    print(f"  baseline mean AUC {base_mean:.4f}, GAN mean AUC {gan_mean:.4f}")
    assert base_mean >= 0.90
    assert gan_mean >= base_mean - 0.02
    elapsed = time.perf_counter() - started
    assert elapsed < 180, f"end-to-end run took {elapsed:.1f}s"


@criterion(6, "breast cancer direction check (advisory, needs user CSV)")
def test_criterion_6_breast_cancer_advisory():
    path = os.environ.get("MDGAN_BREAST_CANCER_CSV", "data/breast_cancer.csv")
    if not os.path.exists(path):
        pytest.skip(f"breast cancer CSV not supplied at {path}")
    config = ExperimentConfig.from_dict({
        "dataset": {
            "name": "breast-cancer",
            "csv": {"path": path, "label_column": os.environ.get(
                "MDGAN_BREAST_CANCER_LABEL", "label"), "train_size": 200},
        },
        "train": {"epochs": 30, "batch_size": 64, "warm_ups": [0]},
        "run": {"seeds": list(range(10)), "figures": False},
    })
    raw = __import__("mdgan.experiment", fromlist=["load_raw_dataset"]).load_raw_dataset(config)
    from mdgan.metrics import rmse_score

    base_aucs, gan_aucs = [], []
    for seed in config.seeds:
        split = split_for_seed(raw, config, seed)
        cfg = dict(epochs=30, batch_size=64, seed=seed)
        base, _ = train_baseline(split, TrainConfig(**cfg))
        gan, _ = train_mdgan(split, TrainConfig(warm_up=0, **cfg))
        base_aucs.append(_auc(rmse_score(base, split.test), split.test_labels))
        gan_aucs.append(_auc(rmse_score(gan, split.test), split.test_labels))
    improvement = 100 * (np.mean(gan_aucs) - np.mean(base_aucs)) / np.mean(base_aucs)
    print(f"  mean AUC improvement over baseline: {improvement:+.2f}%")
    if improvement < 0:
        # Advisory criterion: a negative result warrants investigation, not
        # rejection (preprocessing details of the reference protocol differ).
        import warnings

        warnings.warn(f"advisory: negative improvement {improvement:.2f}%")


@criterion(7, "aggregate report mirrors the warm-up column structure with stars")
def test_criterion_7_report_fidelity(tmp_path):
    rng = np.random.default_rng(1)
    records = []
    for seed in range(30):
        v = 0.70 + 0.01 * rng.standard_normal()
        records.append({"dataset": "synth", "config": "baseline", "seed": seed,
                        "auc_roc": v, "auc_pr": v, "eer": 1 - v})
    for w in (0, 1, 3, 6):
        for seed in range(30):
            lift = 0.05 if w == 0 else 0.0  # warm-up 0 clearly significant
            v = 0.70 + lift + 0.01 * rng.standard_normal()
            records.append({"dataset": "synth", "config": f"warmup{w}", "seed": seed,
                            "warm_up": w, "auc_roc": v, "auc_pr": v, "eer": 1 - v})
    emit_report(records, tmp_path)

    assert abs(t_critical_95(29) - 2.045) < 1e-3
    lines = (tmp_path / "aggregate_report.csv").read_text().splitlines()
    assert lines[0].split(",")[3:] == ["warmup0", "warmup1", "warmup3", "warmup6"]
    auc_row = next(l for l in lines if l.startswith("synth,auc_roc"))
    cells = auc_row.split(",")[3:]
    assert cells[0].endswith("*"), "strong effect must carry a significance star"
    assert all("." in c and "%" in c for c in cells)


@criterion(8, "re-running a config reproduces byte-identical reports")
def test_criterion_8_determinism(tmp_path):
    config_dict = {
        "dataset": {
            "name": "blob-det",
            "synthetic": {"kind": "blob", "n_normal": 200, "n_anomaly": 40,
                          "dim": 6, "separation": 4.0, "seed": 3},
        },
        "train": {"epochs": 2, "batch_size": 32, "warm_ups": [0, 1]},
        "run": {"seeds": [0, 1], "figures": False},
    }
    run_experiment(ExperimentConfig.from_dict(config_dict), tmp_path / "first")
    run_experiment(ExperimentConfig.from_dict(config_dict), tmp_path / "second")
    for name in ("metrics.csv", "metrics.json",
                 "aggregate_report.csv", "aggregate_report.md"):
        assert (tmp_path / "first" / name).read_bytes() == \
            (tmp_path / "second" / name).read_bytes(), name
