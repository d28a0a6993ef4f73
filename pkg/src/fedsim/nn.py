"""Multilayer perceptron substrate for the federated simulator.

All parameters of a network live in one flat float64 vector (per layer:
weight matrix in row-major order, then bias), so aggregation, interpolation,
and eigen-analysis can treat a model as a point in R^p. Everything here is a
pure function of its inputs plus an explicit RNG, and all numerics are done
in double precision.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .errors import ConfigurationError

ACTIVATIONS = ("relu", "tanh")


@dataclass(frozen=True)
class MlpArchitecture:
    """Layer widths (input dim, hidden dims..., class count) plus hidden activation."""

    layer_sizes: tuple[int, ...]
    activation: str = "relu"

    def __post_init__(self) -> None:
        sizes = tuple(int(s) for s in self.layer_sizes)
        object.__setattr__(self, "layer_sizes", sizes)
        if len(sizes) < 2:
            raise ConfigurationError("architecture needs at least an input and an output layer")
        if any(s < 1 for s in sizes):
            raise ConfigurationError(f"all layer sizes must be >= 1, got {sizes}")
        if self.activation not in ACTIVATIONS:
            raise ConfigurationError(f"unknown activation {self.activation!r}, expected one of {ACTIVATIONS}")

    @property
    def input_dim(self) -> int:
        return self.layer_sizes[0]

    @property
    def class_count(self) -> int:
        return self.layer_sizes[-1]

    @property
    def param_count(self) -> int:
        return sum((fi + 1) * fo for fi, fo in zip(self.layer_sizes, self.layer_sizes[1:]))


@dataclass
class Batch:
    """A design matrix (n_samples x input_dim) with integer class labels."""

    features: np.ndarray
    labels: np.ndarray

    def __post_init__(self) -> None:
        self.features = np.asarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.features.ndim != 2:
            raise ConfigurationError("features must be a 2-d matrix")
        if self.features.shape[0] < 1:
            raise ConfigurationError("a batch must contain at least one sample")
        if self.labels.shape != (self.features.shape[0],):
            raise ConfigurationError("labels must be a vector aligned with feature rows")
        if not np.all(np.isfinite(self.features)):
            raise ConfigurationError("features contain non-finite entries")
        if np.any(self.labels < 0):
            raise ConfigurationError("labels must be non-negative class indices")

    @property
    def n_samples(self) -> int:
        return int(self.features.shape[0])

    def subset(self, idx) -> "Batch":
        return Batch(self.features[idx], self.labels[idx])


def merge_batches(batches: list[Batch]) -> Batch:
    if not batches:
        raise ConfigurationError("cannot merge an empty list of batches")
    return Batch(
        np.concatenate([b.features for b in batches], axis=0),
        np.concatenate([b.labels for b in batches]),
    )


def init_params(arch: MlpArchitecture, rng: np.random.Generator) -> np.ndarray:
    """Per-layer uniform init in [-1/sqrt(fan_in), +1/sqrt(fan_in)], weights then bias."""
    chunks = []
    for fan_in, fan_out in zip(arch.layer_sizes, arch.layer_sizes[1:]):
        bound = 1.0 / np.sqrt(fan_in)
        chunks.append(rng.uniform(-bound, bound, size=fan_in * fan_out))
        chunks.append(rng.uniform(-bound, bound, size=fan_out))
    return np.concatenate(chunks)


def _unpack(arch: MlpArchitecture, params: np.ndarray) -> list[tuple[np.ndarray, np.ndarray]]:
    layers = []
    offset = 0
    for fan_in, fan_out in zip(arch.layer_sizes, arch.layer_sizes[1:]):
        w = params[offset : offset + fan_in * fan_out].reshape(fan_in, fan_out)
        offset += fan_in * fan_out
        b = params[offset : offset + fan_out]
        offset += fan_out
        layers.append((w, b))
    return layers


def _check_model_inputs(arch: MlpArchitecture, params: np.ndarray, batch: Batch) -> np.ndarray:
    params = np.asarray(params, dtype=np.float64)
    if params.shape != (arch.param_count,):
        raise ConfigurationError(
            f"parameter vector has length {params.shape}, architecture requires ({arch.param_count},)"
        )
    if batch.features.shape[1] != arch.input_dim:
        raise ConfigurationError(
            f"batch has input dim {batch.features.shape[1]}, architecture expects {arch.input_dim}"
        )
    if np.any(batch.labels >= arch.class_count):
        raise ConfigurationError("labels exceed the architecture's class count")
    return params


def _activate(z: np.ndarray, kind: str) -> np.ndarray:
    if kind == "relu":
        return np.maximum(z, 0.0)
    return np.tanh(z)


def _activation_deriv_from_output(h: np.ndarray, kind: str) -> np.ndarray:
    # relu' from its output: 1 where h > 0 (0 at the kink); tanh' = 1 - tanh^2.
    if kind == "relu":
        return (h > 0.0).astype(np.float64)
    return 1.0 - h * h


def _forward_raw(arch: MlpArchitecture, params: np.ndarray, x: np.ndarray) -> np.ndarray:
    layers = _unpack(arch, params)
    h = x
    for i, (w, b) in enumerate(layers):
        z = h @ w + b
        h = _activate(z, arch.activation) if i < len(layers) - 1 else z
    return h


def forward(arch: MlpArchitecture, params: np.ndarray, batch: Batch) -> np.ndarray:
    """Logits (n_samples x class_count) for the batch. Deterministic in its inputs."""
    params = _check_model_inputs(arch, params, batch)
    return _forward_raw(arch, params, batch.features)


def _softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def loss_ce(logits: np.ndarray, labels: np.ndarray) -> float:
    """Mean softmax cross-entropy, computed via a stable log-sum-exp."""
    logits = np.asarray(logits, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    n = logits.shape[0]
    m = logits.max(axis=1)
    lse = m + np.log(np.exp(logits - m[:, None]).sum(axis=1))
    return float(np.mean(lse - logits[np.arange(n), labels]))


def _backprop(arch: MlpArchitecture, params: np.ndarray, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    layers = _unpack(arch, params)
    n = x.shape[0]

    inputs = [x]  # input to each layer
    h = x
    for i, (w, b) in enumerate(layers[:-1]):
        h = _activate(h @ w + b, arch.activation)
        inputs.append(h)
    logits = inputs[-1] @ layers[-1][0] + layers[-1][1]

    delta = _softmax(logits)
    delta[np.arange(n), y] -= 1.0
    delta /= n

    g = np.empty_like(params)
    offset = params.shape[0]
    for i in range(len(layers) - 1, -1, -1):
        w, _ = layers[i]
        gw = inputs[i].T @ delta
        gb = delta.sum(axis=0)
        offset -= gb.shape[0]
        g[offset : offset + gb.shape[0]] = gb
        offset -= gw.size
        g[offset : offset + gw.size] = gw.ravel()
        if i > 0:
            delta = (delta @ w.T) * _activation_deriv_from_output(inputs[i], arch.activation)
    return g


def grad(arch: MlpArchitecture, params: np.ndarray, batch: Batch) -> np.ndarray:
    """Gradient of the mean cross-entropy with respect to the flat parameter vector."""
    params = _check_model_inputs(arch, params, batch)
    return _backprop(arch, params, batch.features, batch.labels)


def fd_gradient(loss_fn: Callable[[np.ndarray], float], params: np.ndarray, eps: float) -> np.ndarray:
    """Central-difference gradient of an arbitrary scalar loss, one coordinate at a time."""
    if eps <= 0.0:
        raise ConfigurationError("eps must be positive")
    params = np.asarray(params, dtype=np.float64)
    g = np.empty_like(params)
    for i in range(params.shape[0]):
        up = params.copy()
        up[i] += eps
        down = params.copy()
        down[i] -= eps
        g[i] = (loss_fn(up) - loss_fn(down)) / (2.0 * eps)
    return g


def grad_fd(arch: MlpArchitecture, params: np.ndarray, batch: Batch, eps: float = 1e-6) -> np.ndarray:
    """Finite-difference oracle for ``grad``; independent of the backprop path."""
    params = _check_model_inputs(arch, params, batch)
    x, y = batch.features, batch.labels
    return fd_gradient(lambda p: loss_ce(_forward_raw(arch, p, x), y), params, eps)


OPTIMIZER_KINDS = ("sgd", "adam")


@dataclass
class OptimizerState:
    """First-order optimizer state; ``m``/``v`` are Adam moment accumulators."""

    kind: str
    learning_rate: float
    beta1: float = 0.9
    beta2: float = 0.99
    epsilon: float = 1e-8
    m: np.ndarray | None = None
    v: np.ndarray | None = None
    step_count: int = 0

    @classmethod
    def create(
        cls,
        kind: str,
        learning_rate: float,
        param_count: int,
        beta1: float = 0.9,
        beta2: float = 0.99,
    ) -> "OptimizerState":
        if kind not in OPTIMIZER_KINDS:
            raise ConfigurationError(f"unknown optimizer {kind!r}, expected one of {OPTIMIZER_KINDS}")
        if learning_rate <= 0.0:
            raise ConfigurationError("learning_rate must be positive")
        if not (0.0 < beta1 < 1.0 and 0.0 < beta2 < 1.0):
            raise ConfigurationError("beta1 and beta2 must lie in (0, 1)")
        m = np.zeros(param_count) if kind == "adam" else None
        v = np.zeros(param_count) if kind == "adam" else None
        return cls(kind=kind, learning_rate=learning_rate, beta1=beta1, beta2=beta2, m=m, v=v)


def optimizer_step(
    state: OptimizerState, params: np.ndarray, g: np.ndarray
) -> tuple[np.ndarray, OptimizerState]:
    """Apply one SGD or Adam step; returns new params and state, inputs untouched."""
    if params.shape != g.shape:
        raise ConfigurationError("parameter and gradient vectors must have the same length")
    t = state.step_count + 1
    if state.kind == "sgd":
        return params - state.learning_rate * g, replace(state, step_count=t)
    m = state.beta1 * state.m + (1.0 - state.beta1) * g
    v = state.beta2 * state.v + (1.0 - state.beta2) * (g * g)
    m_hat = m / (1.0 - state.beta1**t)
    v_hat = v / (1.0 - state.beta2**t)
    new_params = params - state.learning_rate * m_hat / (np.sqrt(v_hat) + state.epsilon)
    return new_params, replace(state, m=m, v=v, step_count=t)


def train_local(
    arch: MlpArchitecture,
    params: np.ndarray,
    dataset: Batch,
    epochs: int,
    batch_size: int,
    opt: OptimizerState,
    rng: np.random.Generator,
    prox_mu: float = 0.0,
    prox_ref: np.ndarray | None = None,
) -> tuple[np.ndarray, OptimizerState]:
    """Run `epochs` passes of shuffled minibatch steps; deterministic given `rng`.

    When ``prox_mu`` is nonzero, every gradient step adds mu * (params - prox_ref),
    the gradient of a quadratic penalty tying the iterate to a reference vector.
    """
    params = _check_model_inputs(arch, params, dataset)
    if epochs < 0:
        raise ConfigurationError("epochs must be >= 0")
    if batch_size < 1:
        raise ConfigurationError("batch_size must be >= 1")
    if prox_mu != 0.0 and prox_ref is None:
        raise ConfigurationError("prox_mu set without a reference vector")
    x, y = dataset.features, dataset.labels
    n = dataset.n_samples
    params = params.copy()
    for _ in range(epochs):
        order = rng.permutation(n)
        for start in range(0, n, batch_size):
            idx = order[start : start + batch_size]
            g = _backprop(arch, params, x[idx], y[idx])
            if prox_mu != 0.0:
                g = g + prox_mu * (params - prox_ref)
            params, opt = optimizer_step(opt, params, g)
    return params, opt
