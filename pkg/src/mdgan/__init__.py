"""Two-discriminator GAN anomaly detection with an autoencoder baseline."""

from .data import (
    DatasetSchema,
    DatasetSplit,
    drop_wide_categoricals,
    fit_and_apply_normalization,
    load_csv,
    make_synthetic,
    partition,
)
from .errors import ConfigurationError, StateError, TrainingDiverged
from .experiment import ExperimentConfig, emit_report, run_experiment
from .metrics import (
    aggregate_improvement,
    auc_pr,
    auc_roc,
    eer,
    paired_t_test,
    rmse_score,
)
from .models import build_d1, build_d2, build_generator
from .training import (
    TrainConfig,
    sample_noise,
    train_baseline,
    train_mdgan,
    validation_score,
)

__all__ = [
    "ConfigurationError",
    "DatasetSchema",
    "DatasetSplit",
    "ExperimentConfig",
    "StateError",
    "TrainConfig",
    "TrainingDiverged",
    "aggregate_improvement",
    "auc_pr",
    "auc_roc",
    "build_d1",
    "build_d2",
    "build_generator",
    "drop_wide_categoricals",
    "eer",
    "emit_report",
    "fit_and_apply_normalization",
    "load_csv",
    "make_synthetic",
    "paired_t_test",
    "partition",
    "rmse_score",
    "run_experiment",
    "sample_noise",
    "train_baseline",
    "train_mdgan",
    "validation_score",
]
