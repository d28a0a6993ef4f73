"""Loss-landscape curvature estimation.

The dominant Hessian eigenvalue of the training loss is estimated per batch
by power iteration on Hessian-vector products, and summarized as the median
over all full batches of the training set. Hessian-vector products are formed
by central differences of the gradient along the (normalized) probe
direction, so only first-order differentiation is required; a dense
finite-difference Hessian is provided as an oracle for small models.

Conventions, fixed for cross-run stability:
  * the probe step is taken along v / ||v|| and rescaled by ||v||, so the
    product is accurate regardless of the probe's magnitude;
  * the eigenvalue estimate is the Rayleigh quotient, so the sign of a
    dominant negative-curvature direction is preserved;
  * the median of an even count is the lower of the two middle values.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ConfigurationError
from .nn import Batch, MlpArchitecture, _backprop, _check_model_inputs
from .seeding import NS_SHARPNESS, rng_stream

GradFn = Callable[[np.ndarray], np.ndarray]

DENSE_HESSIAN_MAX_PARAMS = 200


@dataclass(frozen=True)
class SharpnessConfig:
    max_iters: int = 100
    tol: float = 1e-6
    hvp_eps: float = 1e-4
    seed: int = 0

    def __post_init__(self) -> None:
        if self.max_iters < 1:
            raise ConfigurationError("max_iters must be >= 1")
        if self.tol <= 0.0:
            raise ConfigurationError("tol must be positive")
        if self.hvp_eps <= 0.0:
            raise ConfigurationError("hvp_eps must be positive")


@dataclass(frozen=True)
class SharpnessResult:
    per_batch_eigenvalues: tuple[float, ...]
    median_eigenvalue: float
    iterations_used: tuple[int, ...]
    converged_flags: tuple[bool, ...]

    def to_json(self) -> dict:
        return {
            "per_batch_eigenvalues": list(self.per_batch_eigenvalues),
            "median_eigenvalue": self.median_eigenvalue,
            "iterations_used": list(self.iterations_used),
            "converged_flags": list(self.converged_flags),
        }


def median_lower(values: list[float]) -> float:
    """Median with the lower-of-two convention for even counts."""
    if not values:
        raise ConfigurationError("median of an empty list is undefined")
    ordered = sorted(values)
    return ordered[(len(ordered) - 1) // 2]


def hvp_from_grad(grad_fn: GradFn, params: np.ndarray, v: np.ndarray, eps: float) -> np.ndarray:
    """Hessian-vector product via central differences of an arbitrary gradient map."""
    if eps <= 0.0:
        raise ConfigurationError("eps must be positive")
    norm = float(np.linalg.norm(v))
    if norm == 0.0:
        raise ConfigurationError("hvp direction must be a non-zero vector")
    unit = v / norm
    plus = grad_fn(params + eps * unit)
    minus = grad_fn(params - eps * unit)
    return (plus - minus) / (2.0 * eps) * norm


def hvp(
    arch: MlpArchitecture,
    params: np.ndarray,
    batch: Batch,
    v: np.ndarray,
    eps: float = 1e-4,
) -> np.ndarray:
    """Hessian-vector product of the batch cross-entropy at ``params``."""
    params = _check_model_inputs(arch, params, batch)
    x, y = batch.features, batch.labels
    return hvp_from_grad(lambda p: _backprop(arch, p, x, y), params, v, eps)


def power_iteration_from_grad(
    grad_fn: GradFn,
    params: np.ndarray,
    max_iters: int = 100,
    tol: float = 1e-6,
    rng: np.random.Generator | None = None,
    eps: float = 1e-4,
) -> tuple[float, np.ndarray, int, bool]:
    """Dominant-in-magnitude eigenvalue of the Hessian behind ``grad_fn``.

    Iterates v <- Hv / ||Hv|| from a random unit start; the eigenvalue
    estimate is the Rayleigh quotient v.Hv. Stops once successive estimates
    agree to ``tol`` relative (with an absolute floor of 1), or at
    ``max_iters``.
    """
    if max_iters < 1:
        raise ConfigurationError("max_iters must be >= 1")
    if tol <= 0.0:
        raise ConfigurationError("tol must be positive")
    if rng is None:
        rng = np.random.default_rng(0)
    v = rng.standard_normal(params.shape[0])
    v /= np.linalg.norm(v)
    eigenvalue = np.inf
    iterations = 0
    converged = False
    for iterations in range(1, max_iters + 1):
        hv = hvp_from_grad(grad_fn, params, v, eps)
        new_eigenvalue = float(v @ hv)
        hv_norm = float(np.linalg.norm(hv))
        if hv_norm == 0.0:
            # The probe landed in the Hessian's null space; curvature is zero there.
            eigenvalue = 0.0
            converged = True
            break
        new_v = hv / hv_norm
        if abs(new_eigenvalue - eigenvalue) <= tol * max(1.0, abs(new_eigenvalue)):
            eigenvalue = new_eigenvalue
            v = new_v
            converged = True
            break
        eigenvalue = new_eigenvalue
        v = new_v
    return eigenvalue, v, iterations, converged


def power_iteration(
    arch: MlpArchitecture,
    params: np.ndarray,
    batch: Batch,
    max_iters: int = 100,
    tol: float = 1e-6,
    rng: np.random.Generator | None = None,
    eps: float = 1e-4,
) -> tuple[float, np.ndarray, int, bool]:
    """Power iteration on the batch-loss Hessian at ``params``."""
    params = _check_model_inputs(arch, params, batch)
    x, y = batch.features, batch.labels
    return power_iteration_from_grad(
        lambda p: _backprop(arch, p, x, y), params, max_iters=max_iters, tol=tol, rng=rng, eps=eps
    )


def dense_hessian_from_grad(grad_fn: GradFn, params: np.ndarray, eps: float = 1e-4) -> np.ndarray:
    """Full finite-difference Hessian, symmetrized as (H + H^T) / 2. Oracle use only."""
    p = params.shape[0]
    if p > DENSE_HESSIAN_MAX_PARAMS:
        raise ConfigurationError(
            f"dense Hessian limited to {DENSE_HESSIAN_MAX_PARAMS} parameters, got {p}"
        )
    if eps <= 0.0:
        raise ConfigurationError("eps must be positive")
    h = np.empty((p, p))
    for i in range(p):
        up = params.copy()
        up[i] += eps
        down = params.copy()
        down[i] -= eps
        h[:, i] = (grad_fn(up) - grad_fn(down)) / (2.0 * eps)
    return (h + h.T) / 2.0


def dense_hessian(
    arch: MlpArchitecture, params: np.ndarray, batch: Batch, eps: float = 1e-4
) -> np.ndarray:
    params = _check_model_inputs(arch, params, batch)
    x, y = batch.features, batch.labels
    return dense_hessian_from_grad(lambda p: _backprop(arch, p, x, y), params, eps)


def sharpness_metric(
    arch: MlpArchitecture,
    params: np.ndarray,
    dataset: Batch,
    batch_size: int,
    cfg: SharpnessConfig = SharpnessConfig(),
) -> SharpnessResult:
    """Median dominant Hessian eigenvalue over consecutive full batches.

    The dataset is scanned in stored order; a trailing partial batch is
    dropped. Each batch gets its own seeded probe start, so the result is a
    pure function of (params, dataset, batch_size, cfg).
    """
    if batch_size < 1:
        raise ConfigurationError("batch_size must be >= 1")
    n_batches = dataset.n_samples // batch_size
    if n_batches < 1:
        raise ConfigurationError("dataset holds fewer samples than one full batch")
    eigenvalues: list[float] = []
    iterations: list[int] = []
    converged: list[bool] = []
    for b in range(n_batches):
        batch = dataset.subset(slice(b * batch_size, (b + 1) * batch_size))
        lam, _, iters, ok = power_iteration(
            arch,
            params,
            batch,
            max_iters=cfg.max_iters,
            tol=cfg.tol,
            rng=rng_stream(cfg.seed, NS_SHARPNESS, b),
            eps=cfg.hvp_eps,
        )
        eigenvalues.append(lam)
        iterations.append(iters)
        converged.append(ok)
    return SharpnessResult(
        per_batch_eigenvalues=tuple(eigenvalues),
        median_eigenvalue=median_lower(eigenvalues),
        iterations_used=tuple(iterations),
        converged_flags=tuple(converged),
    )
