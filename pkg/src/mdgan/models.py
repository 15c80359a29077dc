"""Builders for the three networks: generator G, classifier D1, autoencoder D2.

All builders are pure functions of (spec, seed): the same seed produces
bit-identical parameters.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError
from .nn import Affine, BatchNorm, Dropout, LayerStack, LeakyReLU, ReLU, Sigmoid, Tanh

LEAKY_ALPHA = 0.2
DROPOUT_RATE = 0.10


def _as_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def default_g_hidden(dim: int) -> list[int]:
    return [2 * dim, 2 * dim, dim]


def default_d1_hidden(dim: int) -> list[int]:
    return [2 * dim, dim, max(1, -(-dim // 2))]


def autoencoder_widths(input_dim: int) -> list[int]:
    """Encoder narrows to 70% then 50% of the input width; decoder mirrors back.

    Fractional widths round half to even and floor at 1.
    """
    if input_dim < 2:
        raise ConfigurationError(f"autoencoder needs input_dim >= 2, got {input_dim}")
    h70 = max(1, round(0.7 * input_dim))
    h50 = max(1, round(0.5 * input_dim))
    return [input_dim, h70, h50, h70, input_dim]


@dataclass
class GeneratorSpec:
    latent_dim: int
    output_dim: int
    hidden_dims: list[int] = field(default_factory=list)
    dropout_rate: float = DROPOUT_RATE
    batch_norm: bool = True

    def __post_init__(self):
        if not self.hidden_dims:
            self.hidden_dims = default_g_hidden(self.output_dim)
        if len(self.hidden_dims) != 3:
            raise ConfigurationError("generator uses three hidden layers")


@dataclass
class D1Spec:
    input_dim: int
    hidden_dims: list[int] = field(default_factory=list)
    dropout_rate: float = DROPOUT_RATE

    def __post_init__(self):
        if not self.hidden_dims:
            self.hidden_dims = default_d1_hidden(self.input_dim)
        if len(self.hidden_dims) != 3:
            raise ConfigurationError("D1 uses three hidden layers")


def build_generator(spec: GeneratorSpec, seed) -> LayerStack:
    """Four affine layers; hidden blocks are affine -> BN -> leaky ReLU -> dropout,
    output is tanh so samples land in (-1, 1) like the normalized data."""
    if min([spec.latent_dim, spec.output_dim, *spec.hidden_dims]) < 1:
        raise ConfigurationError("generator dims must be >= 1")
    rng = _as_rng(seed)
    layers: list = []
    dim = spec.latent_dim
    for h in spec.hidden_dims:
        layers.append(Affine(dim, h, rng, init="he"))
        if spec.batch_norm:
            layers.append(BatchNorm(h))
        layers.append(LeakyReLU(LEAKY_ALPHA))
        layers.append(Dropout(spec.dropout_rate))
        dim = h
    layers.append(Affine(dim, spec.output_dim, rng, init="xavier"))
    layers.append(Tanh())
    return LayerStack(layers, spec.latent_dim)


def build_d1(spec: D1Spec, seed) -> LayerStack:
    """Four affine layers ending in a scalar sigmoid: P(sample is real)."""
    if min([spec.input_dim, *spec.hidden_dims]) < 1:
        raise ConfigurationError("D1 dims must be >= 1")
    rng = _as_rng(seed)
    layers: list = []
    dim = spec.input_dim
    for h in spec.hidden_dims:
        layers.append(Affine(dim, h, rng, init="he"))
        layers.append(BatchNorm(h))
        layers.append(LeakyReLU(LEAKY_ALPHA))
        layers.append(Dropout(spec.dropout_rate))
        dim = h
    layers.append(Affine(dim, 1, rng, init="xavier"))
    layers.append(Sigmoid())
    return LayerStack(layers, spec.input_dim)


def build_d2(input_dim: int, seed) -> LayerStack:
    """Autoencoder: ReLU after each hidden layer, tanh after the output."""
    widths = autoencoder_widths(input_dim)
    rng = _as_rng(seed)
    layers: list = []
    for i, (a, b) in enumerate(zip(widths[:-1], widths[1:])):
        last = i == len(widths) - 2
        layers.append(Affine(a, b, rng, init="xavier" if last else "he"))
        layers.append(Tanh() if last else ReLU())
    return LayerStack(layers, input_dim)
