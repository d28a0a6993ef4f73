"""Synthetic heterogeneous client data with an ordered, controllable shift.

Each client draws its samples from per-class Gaussian clusters. Client ``i``'s
cluster layout is the base layout rotated by ``i * rotation_step`` (in the
plane of the first two feature axes) and translated by ``i * mean_shift_step``
along the diagonal direction, so distribution shift grows monotonically with
the client index. Labels are flipped with a small probability so that perfect
accuracy is not trivially reachable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError
from .nn import Batch, merge_batches
from .seeding import NS_DATA_GLOBAL, NS_DATA_POOL, NS_DATA_SPLIT, rng_stream

# Pool partition: the first two splits together form the 75% training share,
# the remainder is the local test set.
DEFAULT_SPLIT_FRACTIONS = (0.60, 0.15, 0.25)

# Cluster geometry before per-client rotation/translation: class centers sit
# at CLASS_OFFSET along per-class directions; noise is anisotropic so rotation
# changes the covariance axes, not only the means.
CLASS_OFFSET = 1.5
AXIS_STDS = (1.0, 1.5)


@dataclass(frozen=True)
class ShiftSpec:
    """Knobs of the synthetic federation generator."""

    n_clients: int = 4
    samples_per_client: int = 200
    input_dim: int = 2
    class_count: int = 2
    rotation_step: float = 0.5
    mean_shift_step: float = 1.0
    label_noise: float = 0.05

    def __post_init__(self) -> None:
        if self.n_clients < 2:
            raise ConfigurationError("n_clients must be >= 2")
        if self.samples_per_client < 16:
            raise ConfigurationError("samples_per_client must be >= 16")
        if self.input_dim < 2:
            raise ConfigurationError("input_dim must be >= 2")
        if self.class_count < 2:
            raise ConfigurationError("class_count must be >= 2")
        if not (0.0 <= self.label_noise < 0.5):
            raise ConfigurationError("label_noise must lie in [0, 0.5)")


@dataclass(frozen=True)
class SourceParams:
    """Shift descriptor of one client's source distribution."""

    mean_offset: tuple[float, ...]
    rotation: float
    noise_scale: float


@dataclass
class ClientDataset:
    """One silo: disjoint train/val/local-test splits plus its shift descriptor."""

    client_id: int
    train: Batch
    val: Batch
    local_test: Batch
    source_params: SourceParams

    def full_pool(self) -> Batch:
        """The client's entire pool (its three splits partition it)."""
        return merge_batches([self.train, self.val, self.local_test])


@dataclass
class FederationData:
    """Participating clients, the shared balanced test set, and an optional holdout."""

    clients: list[ClientDataset]
    global_test: Batch
    global_test_per_source: int
    unseen_client: ClientDataset | None = None


def _rotation_matrix(dim: int, angle: float) -> np.ndarray:
    r = np.eye(dim)
    c, s = math.cos(angle), math.sin(angle)
    r[0, 0] = c
    r[0, 1] = -s
    r[1, 0] = s
    r[1, 1] = c
    return r


def _class_directions(dim: int, class_count: int) -> np.ndarray:
    """Unit direction per class, spread evenly on the circle of the first two axes."""
    dirs = np.zeros((class_count, dim))
    for c in range(class_count):
        a = 2.0 * math.pi * c / class_count
        dirs[c, 0] = math.cos(a)
        dirs[c, 1] = math.sin(a)
    return dirs


def sample_source(spec: ShiftSpec, client_id: int, n: int, rng: np.random.Generator) -> Batch:
    """Draw ``n`` fresh samples from client ``client_id``'s source distribution."""
    dim = spec.input_dim
    stds = np.ones(dim)
    stds[0] = AXIS_STDS[0]
    stds[1] = AXIS_STDS[1]
    rot = _rotation_matrix(dim, client_id * spec.rotation_step)
    center = client_id * spec.mean_shift_step * np.ones(dim) / math.sqrt(dim)
    dirs = _class_directions(dim, spec.class_count)

    labels = rng.integers(0, spec.class_count, size=n)
    noise = rng.standard_normal((n, dim)) * stds
    features = (CLASS_OFFSET * dirs[labels] + noise) @ rot.T + center

    if spec.label_noise > 0.0:
        flip = rng.random(n) < spec.label_noise
        if spec.class_count == 2:
            labels = np.where(flip, 1 - labels, labels)
        else:
            shift = rng.integers(1, spec.class_count, size=n)
            labels = np.where(flip, (labels + shift) % spec.class_count, labels)
    return Batch(features, labels)


def source_params_for(spec: ShiftSpec, client_id: int) -> SourceParams:
    center = client_id * spec.mean_shift_step * np.ones(spec.input_dim) / math.sqrt(spec.input_dim)
    return SourceParams(
        mean_offset=tuple(float(v) for v in center),
        rotation=client_id * spec.rotation_step,
        noise_scale=float(AXIS_STDS[1]),
    )


def _apportion(n: int, fractions: tuple[float, ...]) -> list[int]:
    """Largest-remainder apportionment; every size is within 1 of fraction*n."""
    exact = [f * n for f in fractions]
    sizes = [int(math.floor(e)) for e in exact]
    remainder = n - sum(sizes)
    by_frac = sorted(range(len(fractions)), key=lambda i: (-(exact[i] - sizes[i]), i))
    for i in by_frac[:remainder]:
        sizes[i] += 1
    return sizes


def split_client_pool(
    pool: Batch,
    fractions: tuple[float, float, float] = DEFAULT_SPLIT_FRACTIONS,
    seed: int | np.random.Generator = 0,
) -> tuple[Batch, Batch, Batch]:
    """Disjoint (train, val, local_test) partition of a pool by shuffled indices."""
    fractions = tuple(float(f) for f in fractions)
    if len(fractions) != 3 or any(f <= 0.0 for f in fractions):
        raise ConfigurationError("fractions must be three positive numbers")
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise ConfigurationError("fractions must sum to 1")
    sizes = _apportion(pool.n_samples, fractions)
    if any(s < 1 for s in sizes):
        raise ConfigurationError(f"pool of {pool.n_samples} samples is too small for non-empty splits")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    perm = rng.permutation(pool.n_samples)
    a, b = sizes[0], sizes[0] + sizes[1]
    return pool.subset(perm[:a]), pool.subset(perm[a:b]), pool.subset(perm[b:])


def global_test_size_per_source(spec: ShiftSpec, fractions=DEFAULT_SPLIT_FRACTIONS) -> int:
    """Per-source sample count of the shared test set.

    Sized so the whole set roughly matches one client's local test split, and
    independent of how many clients actually participate, which keeps each
    source's contribution stable under holdouts.
    """
    return max(1, round(fractions[2] * spec.samples_per_client / spec.n_clients))


def generate_federation(
    spec: ShiftSpec,
    holdout_client: int | None = None,
    seed: int = 0,
    fractions: tuple[float, float, float] = DEFAULT_SPLIT_FRACTIONS,
) -> FederationData:
    """Build all client datasets, the balanced global test set, and the optional holdout.

    Every client's pool and split depend only on (seed, client index), so the
    same seed reproduces identical silos regardless of which client (if any)
    is held out. The held-out client contributes nothing to the global test
    set or to any training artifact.
    """
    if holdout_client is not None and not (0 <= holdout_client < spec.n_clients):
        raise ConfigurationError(
            f"holdout_client {holdout_client} out of range for {spec.n_clients} clients"
        )
    clients = []
    for i in range(spec.n_clients):
        pool = sample_source(spec, i, spec.samples_per_client, rng_stream(seed, NS_DATA_POOL, i))
        train, val, local_test = split_client_pool(pool, fractions, rng_stream(seed, NS_DATA_SPLIT, i))
        clients.append(ClientDataset(i, train, val, local_test, source_params_for(spec, i)))

    participants = [c for c in clients if c.client_id != holdout_client]
    per_source = global_test_size_per_source(spec, fractions)
    parts = [
        sample_source(spec, c.client_id, per_source, rng_stream(seed, NS_DATA_GLOBAL, c.client_id))
        for c in participants
    ]
    unseen = clients[holdout_client] if holdout_client is not None else None
    return FederationData(
        clients=participants,
        global_test=merge_batches(parts),
        global_test_per_source=per_source,
        unseen_client=unseen,
    )


def _batch_to_json(batch: Batch) -> dict:
    return {
        "features": [[float(v) for v in row] for row in batch.features],
        "labels": [int(v) for v in batch.labels],
    }


def _client_to_json(client: ClientDataset) -> dict:
    return {
        "client_id": client.client_id,
        "source": {
            "mean_offset": list(client.source_params.mean_offset),
            "rotation": client.source_params.rotation,
            "noise_scale": client.source_params.noise_scale,
        },
        "train": _batch_to_json(client.train),
        "val": _batch_to_json(client.val),
        "local_test": _batch_to_json(client.local_test),
    }


def federation_to_json(
    fed: FederationData,
    spec: ShiftSpec,
    seed: int,
    fractions: tuple[float, float, float] = DEFAULT_SPLIT_FRACTIONS,
) -> dict:
    """One self-contained JSON document describing a generated federation."""
    return {
        "schema_version": 1,
        "spec": {
            "n_clients": spec.n_clients,
            "samples_per_client": spec.samples_per_client,
            "input_dim": spec.input_dim,
            "class_count": spec.class_count,
            "rotation_step": spec.rotation_step,
            "mean_shift_step": spec.mean_shift_step,
            "label_noise": spec.label_noise,
        },
        "seed": seed,
        "split_fractions": list(fractions),
        "global_test_per_source": fed.global_test_per_source,
        "clients": [_client_to_json(c) for c in fed.clients],
        "global_test": _batch_to_json(fed.global_test),
        "unseen_client": _client_to_json(fed.unseen_client) if fed.unseen_client else None,
    }
