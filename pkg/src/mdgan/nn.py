"""Minimal dense neural-network engine.

Layers carry their own parameters and gradient buffers; a ``LayerStack``
chains them and exposes forward/backward over 2-D float64 batches
(row = sample).  Everything is numpy, everything is float64, and every
gradient is analytic (checked against finite differences in the tests).
"""

from __future__ import annotations

import json

import numpy as np

from .errors import ConfigurationError, StateError

CHECKPOINT_MAGIC = "mdgan-params-v1"


def he_uniform(fan_in: int, fan_out: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform init scaled for ReLU-family activations: limit sqrt(6/fan_in)."""
    limit = np.sqrt(6.0 / fan_in)
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


def xavier_uniform(fan_in: int, fan_out: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform init balanced for saturating outputs: limit sqrt(6/(fan_in+fan_out))."""
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


_INITIALIZERS = {"he": he_uniform, "xavier": xavier_uniform}


class Layer:
    """Base layer: forward caches whatever backward needs."""

    def forward(self, x: np.ndarray, mode: str, rng=None, update_stats: bool = True) -> np.ndarray:
        raise NotImplementedError

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def parameters(self) -> list[np.ndarray]:
        return []

    def gradients(self) -> list[np.ndarray]:
        return []

    def state_arrays(self) -> list[np.ndarray]:
        """Parameters plus non-trainable state (e.g. running statistics)."""
        return self.parameters()

    def out_dim(self, in_dim: int) -> int:
        return in_dim


class Affine(Layer):
    """Fully connected layer y = xW + b."""

    def __init__(self, in_dim: int, out_dim: int, rng: np.random.Generator, init: str = "he"):
        if in_dim < 1 or out_dim < 1:
            raise ConfigurationError(f"affine dims must be >= 1, got {in_dim}x{out_dim}")
        self.W = _INITIALIZERS[init](in_dim, out_dim, rng)
        self.b = np.zeros(out_dim)
        self.dW = np.zeros_like(self.W)
        self.db = np.zeros_like(self.b)
        self.x = None

    def forward(self, x, mode, rng=None, update_stats=True):
        if x.shape[1] != self.W.shape[0]:
            raise ConfigurationError(
                f"affine expects {self.W.shape[0]} input features, got {x.shape[1]}"
            )
        self.x = x if mode == "train" else None
        return x @ self.W + self.b

    def backward(self, grad_out):
        self.dW = self.x.T @ grad_out
        self.db = grad_out.sum(axis=0)
        return grad_out @ self.W.T

    def parameters(self):
        return [self.W, self.b]

    def gradients(self):
        return [self.dW, self.db]

    def out_dim(self, in_dim):
        return self.W.shape[1]


class LeakyReLU(Layer):
    def __init__(self, alpha: float = 0.2):
        self.alpha = alpha
        self.x = None

    def forward(self, x, mode, rng=None, update_stats=True):
        self.x = x if mode == "train" else None
        return np.where(x > 0, x, self.alpha * x)

    def backward(self, grad_out):
        return grad_out * np.where(self.x > 0, 1.0, self.alpha)


class ReLU(LeakyReLU):
    def __init__(self):
        super().__init__(alpha=0.0)


class Tanh(Layer):
    def __init__(self):
        self.y = None

    def forward(self, x, mode, rng=None, update_stats=True):
        y = np.tanh(x)
        self.y = y if mode == "train" else None
        return y

    def backward(self, grad_out):
        return grad_out * (1.0 - self.y**2)


class Sigmoid(Layer):
    def __init__(self):
        self.y = None

    def forward(self, x, mode, rng=None, update_stats=True):
        y = 1.0 / (1.0 + np.exp(-x))
        self.y = y if mode == "train" else None
        return y

    def backward(self, grad_out):
        return grad_out * self.y * (1.0 - self.y)


class Dropout(Layer):
    """Inverted dropout: eval mode is the identity, train mode scales by 1/(1-rate)."""

    def __init__(self, rate: float):
        if not 0.0 <= rate < 1.0:
            raise ConfigurationError(f"dropout rate must be in [0, 1), got {rate}")
        self.rate = rate
        self.mask = None

    def forward(self, x, mode, rng=None, update_stats=True):
        if mode != "train" or self.rate == 0.0:
            return x
        if self.mask is None or self.mask.shape != x.shape:
            if rng is None:
                raise StateError("train-mode dropout forward needs an rng")
            self.mask = (rng.random(x.shape) >= self.rate) / (1.0 - self.rate)
        elif rng is not None:
            self.mask = (rng.random(x.shape) >= self.rate) / (1.0 - self.rate)
        return x * self.mask

    def backward(self, grad_out):
        if self.mask is None:
            return grad_out
        return grad_out * self.mask


class BatchNorm(Layer):
    """Batch normalization over the batch axis for (N, C) inputs."""

    def __init__(self, dim: int, momentum: float = 0.9, eps: float = 1e-5):
        self.gamma = np.ones(dim)
        self.beta = np.zeros(dim)
        self.running_mean = np.zeros(dim)
        self.running_var = np.ones(dim)
        self.momentum = momentum
        self.eps = eps
        self.dgamma = np.zeros_like(self.gamma)
        self.dbeta = np.zeros_like(self.beta)
        self.cache = None

    def forward(self, x, mode, rng=None, update_stats=True):
        if mode == "train":
            mean = x.mean(axis=0)
            var = x.var(axis=0)
            if update_stats:
                self.running_mean = self.momentum * self.running_mean + (1 - self.momentum) * mean
                self.running_var = self.momentum * self.running_var + (1 - self.momentum) * var
            inv_std = 1.0 / np.sqrt(var + self.eps)
            x_hat = (x - mean) * inv_std
            self.cache = (x_hat, inv_std)
        else:
            x_hat = (x - self.running_mean) / np.sqrt(self.running_var + self.eps)
            self.cache = None
        return self.gamma * x_hat + self.beta

    def backward(self, grad_out):
        x_hat, inv_std = self.cache
        n = grad_out.shape[0]
        self.dgamma = (grad_out * x_hat).sum(axis=0)
        self.dbeta = grad_out.sum(axis=0)
        dxhat = grad_out * self.gamma
        # Standard batch-norm input gradient with batch statistics.
        return (inv_std / n) * (
            n * dxhat - dxhat.sum(axis=0) - x_hat * (dxhat * x_hat).sum(axis=0)
        )

    def parameters(self):
        return [self.gamma, self.beta]

    def gradients(self):
        return [self.dgamma, self.dbeta]

    def state_arrays(self):
        return [self.gamma, self.beta, self.running_mean, self.running_var]


class LayerStack:
    """An ordered sequence of layers with a joint forward/backward."""

    def __init__(self, layers: list[Layer], in_dim: int):
        self.layers = layers
        self.in_dim = in_dim
        dim = in_dim
        for layer in layers:
            dim = layer.out_dim(dim)
        self.out_dim = dim
        self._trained_forward = False

    def forward(self, x: np.ndarray, mode: str = "train", rng=None,
                update_stats: bool | None = None) -> np.ndarray:
        if x.ndim != 2 or x.shape[1] != self.in_dim:
            raise ConfigurationError(
                f"expected input of shape (n, {self.in_dim}), got {x.shape}"
            )
        if not np.all(np.isfinite(x)):
            raise ConfigurationError("non-finite values in network input")
        if update_stats is None:
            update_stats = mode == "train"
        for layer in self.layers:
            x = layer.forward(x, mode, rng=rng, update_stats=update_stats)
        self._trained_forward = mode == "train"
        return x

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        if not self._trained_forward:
            raise StateError("backward requires a preceding train-mode forward")
        for layer in reversed(self.layers):
            grad_out = layer.backward(grad_out)
        return grad_out

    def parameters(self) -> list[np.ndarray]:
        return [p for layer in self.layers for p in layer.parameters()]

    def gradients(self) -> list[np.ndarray]:
        return [g for layer in self.layers for g in layer.gradients()]

    def state_arrays(self) -> list[np.ndarray]:
        return [a for layer in self.layers for a in layer.state_arrays()]

    def get_state(self) -> list[np.ndarray]:
        return [a.copy() for a in self.state_arrays()]

    def set_state(self, state: list[np.ndarray]) -> None:
        arrays = self.state_arrays()
        if len(arrays) != len(state):
            raise ConfigurationError("checkpoint does not match network structure")
        for dst, src in zip(arrays, state):
            if dst.shape != src.shape:
                raise ConfigurationError("checkpoint array shape mismatch")
            dst[...] = src


def bce_loss(predictions: np.ndarray, targets: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean binary cross-entropy and its gradient w.r.t. the predictions.

    Predictions are clamped to [1e-7, 1-1e-7] so log never sees 0.
    """
    p = np.clip(predictions, 1e-7, 1.0 - 1e-7)
    n = p.size
    loss = float(-np.sum(targets * np.log(p) + (1 - targets) * np.log(1 - p)) / n)
    grad = (-(targets / p) + (1 - targets) / (1 - p)) / n
    return loss, grad


def mse_loss(x: np.ndarray, x_prime: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean squared error over batch and features; gradient w.r.t. ``x_prime``."""
    if x.shape != x_prime.shape:
        raise ConfigurationError(f"mse shapes differ: {x.shape} vs {x_prime.shape}")
    diff = x_prime - x
    loss = float(np.mean(diff**2))
    grad = 2.0 * diff / diff.size
    return loss, grad


class SGD:
    def __init__(self, lr: float):
        self.lr = lr
        self.t = 0

    def step(self, params: list[np.ndarray], grads: list[np.ndarray]) -> None:
        self.t += 1
        for p, g in zip(params, grads, strict=True):
            if p.shape != g.shape:
                raise ConfigurationError("parameter/gradient shape mismatch")
            p -= self.lr * g


class Adam:
    """Adam with bias correction; defaults beta1=0.9, beta2=0.999, eps=1e-8."""

    def __init__(self, lr: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m: list[np.ndarray] | None = None
        self.v: list[np.ndarray] | None = None

    def step(self, params: list[np.ndarray], grads: list[np.ndarray]) -> None:
        if self.m is None:
            self.m = [np.zeros_like(p) for p in params]
            self.v = [np.zeros_like(p) for p in params]
        self.t += 1
        bc1 = 1.0 - self.beta1**self.t
        bc2 = 1.0 - self.beta2**self.t
        for p, g, m, v in zip(params, grads, self.m, self.v, strict=True):
            if p.shape != g.shape:
                raise ConfigurationError("parameter/gradient shape mismatch")
            m *= self.beta1
            m += (1 - self.beta1) * g
            v *= self.beta2
            v += (1 - self.beta2) * g**2
            p -= self.lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)


def save_params(stack: LayerStack, path) -> None:
    """Serialize stack state (parameters + running stats) as versioned JSON."""
    payload = {
        "magic": CHECKPOINT_MAGIC,
        "arrays": [{"shape": list(a.shape), "data": a.ravel().tolist()}
                   for a in stack.state_arrays()],
    }
    with open(path, "w") as fh:
        json.dump(payload, fh)


def load_params(stack: LayerStack, path) -> None:
    with open(path) as fh:
        payload = json.load(fh)
    if payload.get("magic") != CHECKPOINT_MAGIC:
        raise ConfigurationError(f"not a {CHECKPOINT_MAGIC} checkpoint: {path}")
    state = [np.asarray(a["data"], dtype=float).reshape(a["shape"])
             for a in payload["arrays"]]
    stack.set_state(state)
