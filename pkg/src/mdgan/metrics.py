"""Anomaly scoring, threshold-free detection metrics, and significance tests.

Scores are oriented so that higher means more anomalous; labels are 1 for
anomalies.  All metrics are rank statistics: invariant under strictly
increasing transforms of the scores.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

from .errors import ConfigurationError
from .nn import LayerStack


@dataclass
class SignificanceResult:
    mean_difference: float
    t_statistic: float
    degrees_of_freedom: int
    significant_at_95: bool


def rmse_score(model: LayerStack, samples: np.ndarray) -> np.ndarray:
    """Per-sample reconstruction RMSE: sqrt(mean over features of squared error).

    Zero iff the reconstruction is perfect.  Eval-mode forward, so batching
    does not affect individual scores.
    """
    samples = np.atleast_2d(samples)
    if samples.shape[1] != model.in_dim:
        raise ConfigurationError(
            f"sample dim {samples.shape[1]} != model dim {model.in_dim}"
        )
    recon = model.forward(samples, mode="eval")
    return np.sqrt(np.mean((samples - recon) ** 2, axis=1))


def _check_scored(scores, labels, need_both=True):
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels)
    if scores.shape != labels.shape:
        raise ConfigurationError("scores and labels differ in length")
    if need_both and (labels.min() == labels.max()):
        raise ConfigurationError("both classes must be present")
    return scores, labels


def auc_roc(scores, labels) -> float:
    """Area under the ROC curve via the rank (Mann-Whitney) formulation:
    P(score_pos > score_neg) + 0.5 * P(tie)."""
    scores, labels = _check_scored(scores, labels)
    pos = labels == 1
    n_pos = int(pos.sum())
    n_neg = len(labels) - n_pos
    ranks = stats.rankdata(scores)
    return float((ranks[pos].sum() - n_pos * (n_pos + 1) / 2) / (n_pos * n_neg))


def auc_pr(scores, labels) -> float:
    """Area under the precision-recall curve by step summation over distinct
    thresholds (average-precision style, ties grouped)."""
    scores, labels = _check_scored(scores, labels, need_both=False)
    n_pos = int((labels == 1).sum())
    if n_pos == 0:
        raise ConfigurationError("auc_pr needs at least one positive")
    order = np.argsort(-scores, kind="stable")
    s = scores[order]
    y = labels[order]
    tp = np.cumsum(y == 1)
    fp = np.cumsum(y == 0)
    # keep only the last index of each tied score block
    distinct = np.flatnonzero(np.r_[s[1:] != s[:-1], True])
    tp, fp = tp[distinct], fp[distinct]
    precision = tp / (tp + fp)
    recall = tp / n_pos
    prev_recall = np.r_[0.0, recall[:-1]]
    return float(np.sum((recall - prev_recall) * precision))


def _error_rates(scores, labels):
    """FPR and FNR when flagging score >= threshold, over descending distinct
    thresholds, padded with the trivial all-negative / all-positive endpoints."""
    order = np.argsort(-scores, kind="stable")
    s = scores[order]
    y = labels[order]
    n_pos = int((y == 1).sum())
    n_neg = len(y) - n_pos
    tp = np.cumsum(y == 1)
    fp = np.cumsum(y == 0)
    distinct = np.flatnonzero(np.r_[s[1:] != s[:-1], True])
    fpr = np.r_[0.0, fp[distinct] / n_neg]
    fnr = np.r_[1.0, 1.0 - tp[distinct] / n_pos]
    return fpr, fnr


def eer(scores, labels) -> float:
    """Equal error rate: the FPR (= FNR) where the two error rates cross,
    linearly interpolated between adjacent thresholds."""
    scores, labels = _check_scored(scores, labels)
    fpr, fnr = _error_rates(scores, labels)
    d = fpr - fnr
    i = int(np.argmin(np.abs(d)))
    if d[i] == 0.0:
        return float(fpr[i])
    # interpolate across the sign change adjacent to the minimizing threshold
    for j, k in ((i, i + 1), (i - 1, i)):
        if 0 <= j and k < len(d) and np.sign(d[j]) != np.sign(d[k]):
            alpha = d[j] / (d[j] - d[k])
            return float(fpr[j] + alpha * (fpr[k] - fpr[j]))
    return float((fpr[i] + fnr[i]) / 2.0)


def paired_t_test(a, b, two_tailed: bool = True) -> SignificanceResult:
    """Paired t-test on a - b at the 95% confidence level."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise ConfigurationError("paired t-test needs two equal-length vectors")
    n = len(a)
    if n < 2:
        raise ConfigurationError("paired t-test needs n >= 2")
    d = a - b
    mean = float(d.mean())
    sd = float(d.std(ddof=1))
    df = n - 1
    if sd == 0.0:
        if mean == 0.0:
            return SignificanceResult(0.0, 0.0, df, False)
        return SignificanceResult(mean, float(np.sign(mean)) * np.inf, df, True)
    t = mean / (sd / np.sqrt(n))
    quantile = 0.975 if two_tailed else 0.95
    critical = float(stats.t.ppf(quantile, df))
    return SignificanceResult(mean, float(t), df, bool(abs(t) > critical))


def t_critical_95(df: int, two_tailed: bool = True) -> float:
    return float(stats.t.ppf(0.975 if two_tailed else 0.95, df))


METRIC_NAMES = ("auc_roc", "auc_pr", "eer")
LOWER_IS_BETTER = {"eer"}


def score_test_set(model: LayerStack, split) -> dict[str, float]:
    """All three measures of an autoencoder's RMSE scores on the test split."""
    scores = rmse_score(model, split.test)
    return {
        "auc_roc": auc_roc(scores, split.test_labels),
        "auc_pr": auc_pr(scores, split.test_labels),
        "eer": eer(scores, split.test_labels),
    }


def aggregate_improvement(
    mdgan_records: list[dict],
    baseline_records: list[dict],
) -> list[dict]:
    """Percentage improvement of seed-averaged metrics over the baseline.

    Records are dicts with keys: dataset, seed, warm_up (mdgan only), and the
    three metric values.  Pairing is by seed; a missing pair is an error.
    Output: one row per (dataset, metric, warm_up) with the improvement
    percentage and its paired-t significance.  EER rows keep the raw signed
    percentage; lower is better for that metric.
    """
    base_by_seed = {(r["dataset"], r["seed"]): r for r in baseline_records}
    groups: dict[tuple, list[dict]] = {}
    for r in mdgan_records:
        groups.setdefault((r["dataset"], r["warm_up"]), []).append(r)

    rows = []
    for (dataset, warm_up), recs in sorted(groups.items()):
        recs = sorted(recs, key=lambda r: r["seed"])
        for r in recs:
            if (dataset, r["seed"]) not in base_by_seed:
                raise ConfigurationError(
                    f"no baseline record for dataset={dataset} seed={r['seed']}"
                )
        for metric in METRIC_NAMES:
            ours = np.array([r[metric] for r in recs])
            base = np.array([base_by_seed[(dataset, r["seed"])][metric] for r in recs])
            if len(ours) >= 2:
                test = paired_t_test(ours, base)
            else:  # a single seed cannot carry significance
                test = SignificanceResult(float(ours[0] - base[0]), float("nan"), 0, False)
            base_mean = float(base.mean())
            if base_mean == 0.0:
                pct = 0.0 if float(ours.mean()) == 0.0 else float("inf")
            else:
                pct = 100.0 * (float(ours.mean()) - base_mean) / base_mean
            rows.append({
                "dataset": dataset,
                "metric": metric,
                "warm_up": warm_up,
                "improvement_pct": pct,
                "mdgan_mean": float(ours.mean()),
                "baseline_mean": base_mean,
                "t_statistic": test.t_statistic,
                "significant_at_95": test.significant_at_95,
                "lower_is_better": metric in LOWER_IS_BETTER,
            })
    return rows
