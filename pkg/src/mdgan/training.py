"""Training loops: the two-discriminator GAN and the baseline autoencoder.

Per iteration the GAN loop runs, in order:
  1. optimize D1 on a real batch (target = real)
  2. sample z ~ N(0, 1) and produce the generated batch G(z)
  3. optimize D1 on the generated batch (target = fake)
  4. optimize G against D1 (D1 frozen: gradients flow through it, its
     parameters and running statistics are untouched)
  5. optimize D2 on the real batch (reconstruction MSE)
  6. if the warm-up period is over, optimize D2 on the generated batch
  7. optimize G against D2 (D2 frozen, shared reconstruction loss)

After each epoch the D2 snapshot with the best validation score is kept;
that checkpoint is what gets returned.

Randomness is split into independent per-purpose streams derived from the
run seed, so the baseline autoencoder and the GAN's D2 see exactly the same
initialization and batch order.  With a warm-up at least as long as the
run, the two trajectories are bit-identical.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .data import DatasetSplit
from .errors import ConfigurationError, TrainingDiverged
from .models import (
    D1Spec,
    DROPOUT_RATE,
    GeneratorSpec,
    build_d1,
    build_d2,
    build_generator,
)
from .nn import Adam, LayerStack, SGD, bce_loss, mse_loss

# Stable stream codes: deriving each purpose independently of the others
# keeps e.g. the batch order identical whether or not G/D1 exist at all.
_STREAMS = {
    "init_g": 1,
    "init_d1": 2,
    "init_d2": 3,
    "batch": 4,
    "dropout": 5,
    "noise": 6,
}


def derive_rng(seed: int, purpose: str) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), _STREAMS[purpose]]))


@dataclass
class TrainConfig:
    epochs: int = 30
    batch_size: int = 64
    warm_up: int = 0
    warm_up_unit: str = "epoch"  # or "iteration"
    seed: int = 0
    g_loss_mode: str = "non_saturating"  # or "saturating"
    latent_dim: int | None = None  # default: the feature dimension
    g_hidden: list[int] | None = None
    d1_hidden: list[int] | None = None
    g_batch_norm: bool = True
    dropout_rate: float = DROPOUT_RATE
    d1_lr: float = 0.01
    g_lr: float = 0.001
    d2_lr: float = 0.001

    def __post_init__(self):
        if self.epochs < 1:
            raise ConfigurationError("epochs must be >= 1")
        if self.batch_size < 2:
            raise ConfigurationError("batch_size must be >= 2 (batch norm)")
        if self.warm_up < 0:
            raise ConfigurationError("warm_up must be >= 0")
        if self.warm_up_unit not in ("epoch", "iteration"):
            raise ConfigurationError(f"bad warm_up_unit: {self.warm_up_unit}")
        if self.g_loss_mode not in ("non_saturating", "saturating"):
            raise ConfigurationError(f"bad g_loss_mode: {self.g_loss_mode}")


@dataclass
class ModelTriple:
    g: LayerStack
    d1: LayerStack
    d2: LayerStack
    g_opt: Adam
    d1_opt: SGD
    d2_opt: Adam


@dataclass
class EpochRecord:
    epoch: int
    d1_loss_real: float
    d1_loss_fake: float
    g_loss_d1: float
    d2_loss_real: float
    d2_loss_fake: float  # nan while warm-up gates step 6
    g_loss_d2: float
    validation_score: float


@dataclass
class LossTrace:
    records: list[EpochRecord] = field(default_factory=list)
    best_epoch: int = -1

    def rows(self) -> list[tuple[int, str, float]]:
        out = []
        for r in self.records:
            for name in (
                "d1_loss_real", "d1_loss_fake", "g_loss_d1",
                "d2_loss_real", "d2_loss_fake", "g_loss_d2",
                "validation_score",
            ):
                out.append((r.epoch, name, getattr(r, name)))
        return out


def build_models(dim: int, config: TrainConfig) -> ModelTriple:
    latent = config.latent_dim or dim
    g_spec = GeneratorSpec(
        latent_dim=latent,
        output_dim=dim,
        hidden_dims=list(config.g_hidden or []),
        dropout_rate=config.dropout_rate,
        batch_norm=config.g_batch_norm,
    )
    d1_spec = D1Spec(
        input_dim=dim,
        hidden_dims=list(config.d1_hidden or []),
        dropout_rate=config.dropout_rate,
    )
    return ModelTriple(
        g=build_generator(g_spec, derive_rng(config.seed, "init_g")),
        d1=build_d1(d1_spec, derive_rng(config.seed, "init_d1")),
        d2=build_d2(dim, derive_rng(config.seed, "init_d2")),
        g_opt=Adam(config.g_lr),
        d1_opt=SGD(config.d1_lr),
        d2_opt=Adam(config.d2_lr),
    )


def sample_noise(batch: int, latent_dim: int, rng: np.random.Generator) -> np.ndarray:
    if batch < 1:
        raise ConfigurationError("noise batch must be >= 1")
    return rng.standard_normal((batch, latent_dim))


def validation_score(model: LayerStack, validation: np.ndarray) -> float:
    """Negative mean reconstruction RMSE on held-out normal data; higher is
    better, perfect reconstruction scores 0."""
    if len(validation) == 0:
        raise ConfigurationError("validation set is empty")
    recon = model.forward(validation, mode="eval")
    return float(-np.mean(np.sqrt(np.mean((validation - recon) ** 2, axis=1))))


def _batches(n: int, batch_size: int, rng: np.random.Generator):
    """Shuffled index batches; a trailing batch of size 1 is dropped
    (batch norm needs at least two samples)."""
    perm = rng.permutation(n)
    for start in range(0, n, batch_size):
        idx = perm[start:start + batch_size]
        if len(idx) >= 2:
            yield idx


def iterations_per_epoch(n: int, batch_size: int) -> int:
    full = math.ceil(n / batch_size)
    return full - 1 if (n % batch_size == 1 and full > 1) else full


def _check_finite(loss: float, step: str, epoch: int) -> float:
    if not np.isfinite(loss):
        raise TrainingDiverged(step, epoch, loss)
    return loss


def _generator_d1_loss(p: np.ndarray, mode: str) -> tuple[float, np.ndarray]:
    """G's objective against D1.

    non_saturating: minimize -log(p); saturating: minimize log(1 - p).
    Returns the loss and its gradient w.r.t. the (clamped) probabilities.
    """
    pc = np.clip(p, 1e-7, 1.0 - 1e-7)
    n = pc.size
    if mode == "non_saturating":
        return float(-np.sum(np.log(pc)) / n), -1.0 / (pc * n)
    return float(np.sum(np.log(1.0 - pc)) / n), -1.0 / ((1.0 - pc) * n)


def train_mdgan(
    data: DatasetSplit,
    config: TrainConfig,
    step_hook=None,
) -> tuple[LayerStack, LossTrace]:
    """Run the full GAN loop and return the checkpointed D2 plus loss traces.

    ``step_hook(event, models)`` fires around the frozen-discriminator steps
    ("pre_g_d1", "post_g_d1", "pre_g_d2", "post_g_d2"); used by tests to
    verify freezing.
    """
    models = build_models(data.dim, config)
    batch_rng = derive_rng(config.seed, "batch")
    dropout_rng = derive_rng(config.seed, "dropout")
    noise_rng = derive_rng(config.seed, "noise")
    latent = config.latent_dim or data.dim

    trace = LossTrace()
    best_score = -np.inf
    best_state = models.d2.get_state()
    best_epoch = -1
    global_iter = 0

    for epoch in range(config.epochs):
        sums = np.zeros(6)
        fake_updates = 0
        n_iter = 0
        for idx in _batches(len(data.train), config.batch_size, batch_rng):
            real = data.train[idx]
            b = len(real)

            # (1) D1 on real
            p_real = models.d1.forward(real, mode="train", rng=dropout_rng)
            loss_d1_real, grad = bce_loss(p_real, np.ones_like(p_real))
            models.d1.backward(grad)
            models.d1_opt.step(models.d1.parameters(), models.d1.gradients())

            # (2) generate
            z = sample_noise(b, latent, noise_rng)
            fake = models.g.forward(z, mode="train", rng=dropout_rng)

            # (3) D1 on generated
            p_fake = models.d1.forward(fake, mode="train", rng=dropout_rng)
            loss_d1_fake, grad = bce_loss(p_fake, np.zeros_like(p_fake))
            models.d1.backward(grad)
            models.d1_opt.step(models.d1.parameters(), models.d1.gradients())

            # (4) G against D1 (D1 frozen, stats untouched)
            if step_hook:
                step_hook("pre_g_d1", models)
            p = models.d1.forward(fake, mode="train", rng=dropout_rng,
                                  update_stats=False)
            loss_g_d1, grad_p = _generator_d1_loss(p, config.g_loss_mode)
            grad_fake = models.d1.backward(grad_p)
            models.g.backward(grad_fake)
            models.g_opt.step(models.g.parameters(), models.g.gradients())
            if step_hook:
                step_hook("post_g_d1", models)

            # (5) D2 on real
            recon = models.d2.forward(real, mode="train")
            loss_d2_real, grad = mse_loss(real, recon)
            models.d2.backward(grad)
            models.d2_opt.step(models.d2.parameters(), models.d2.gradients())

            # (6) D2 on generated, once the warm-up is over
            past_warm_up = (
                global_iter >= config.warm_up
                if config.warm_up_unit == "iteration"
                else epoch >= config.warm_up
            )
            loss_d2_fake = np.nan
            if past_warm_up:
                recon = models.d2.forward(fake, mode="train")
                loss_d2_fake, grad = mse_loss(fake, recon)
                models.d2.backward(grad)
                models.d2_opt.step(models.d2.parameters(), models.d2.gradients())
                _check_finite(loss_d2_fake, "d2_on_generated", epoch)
                fake_updates += 1

            # (7) G against D2 (D2 frozen, shared reconstruction loss).
            # The loss depends on the generated batch both directly and
            # through D2, so both gradient paths feed back into G.
            if step_hook:
                step_hook("pre_g_d2", models)
            fake2 = models.g.forward(z, mode="train", rng=dropout_rng)
            recon = models.d2.forward(fake2, mode="train")
            loss_g_d2, grad_recon = mse_loss(fake2, recon)
            grad_fake2 = models.d2.backward(grad_recon) - grad_recon
            models.g.backward(grad_fake2)
            models.g_opt.step(models.g.parameters(), models.g.gradients())
            if step_hook:
                step_hook("post_g_d2", models)

            for name, value in (
                ("d1_on_real", loss_d1_real),
                ("d1_on_generated", loss_d1_fake),
                ("g_on_d1", loss_g_d1),
                ("d2_on_real", loss_d2_real),
                ("g_on_d2", loss_g_d2),
            ):
                _check_finite(value, name, epoch)
            sums += np.array([
                loss_d1_real, loss_d1_fake, loss_g_d1,
                loss_d2_real, 0.0 if np.isnan(loss_d2_fake) else loss_d2_fake,
                loss_g_d2,
            ])
            n_iter += 1
            global_iter += 1

        means = sums / n_iter
        score = validation_score(models.d2, data.validation)
        _check_finite(score, "validation", epoch)
        trace.records.append(EpochRecord(
            epoch=epoch,
            d1_loss_real=means[0],
            d1_loss_fake=means[1],
            g_loss_d1=means[2],
            d2_loss_real=means[3],
            d2_loss_fake=(sums[4] / fake_updates if fake_updates else float("nan")),
            g_loss_d2=means[5],
            validation_score=score,
        ))
        if score > best_score:
            best_score = score
            best_state = models.d2.get_state()
            best_epoch = epoch

    models.d2.set_state(best_state)
    trace.best_epoch = best_epoch
    return models.d2, trace


def train_baseline(data: DatasetSplit, config: TrainConfig) -> tuple[LayerStack, LossTrace]:
    """Autoencoder with D2's architecture, trained on real batches only, with
    the same epoch budget, batch order, and validation-based selection."""
    d2 = build_d2(data.dim, derive_rng(config.seed, "init_d2"))
    opt = Adam(config.d2_lr)
    batch_rng = derive_rng(config.seed, "batch")

    trace = LossTrace()
    best_score = -np.inf
    best_state = d2.get_state()
    best_epoch = -1

    for epoch in range(config.epochs):
        total = 0.0
        n_iter = 0
        for idx in _batches(len(data.train), config.batch_size, batch_rng):
            real = data.train[idx]
            recon = d2.forward(real, mode="train")
            loss, grad = mse_loss(real, recon)
            d2.backward(grad)
            opt.step(d2.parameters(), d2.gradients())
            _check_finite(loss, "baseline_on_real", epoch)
            total += loss
            n_iter += 1
        score = validation_score(d2, data.validation)
        _check_finite(score, "validation", epoch)
        trace.records.append(EpochRecord(
            epoch=epoch,
            d1_loss_real=float("nan"),
            d1_loss_fake=float("nan"),
            g_loss_d1=float("nan"),
            d2_loss_real=total / n_iter,
            d2_loss_fake=float("nan"),
            g_loss_d2=float("nan"),
            validation_score=score,
        ))
        if score > best_score:
            best_score = score
            best_state = d2.get_state()
            best_epoch = epoch

    d2.set_state(best_state)
    trace.best_epoch = best_epoch
    return d2, trace
