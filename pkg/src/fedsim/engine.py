"""Communication-round orchestration for the federated methods.

One round is: aggregate every client's previous upload into the global model,
then let each client train locally from it. The soup method additionally
runs checkpoint selection and patching on the client after local training
(once the configured fraction of rounds has passed); the patched model is
what the client uploads next round and what it keeps as its personalized
model. All clients participate every round with uniform aggregation weights;
client pools are equal-sized by construction, so uniform equals
sample-weighted averaging.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field, replace
from typing import IO

import numpy as np

from .data import ClientDataset, FederationData
from .errors import ConfigurationError
from .nn import MlpArchitecture, OptimizerState, init_params, train_local
from .seeding import NS_FINE_TUNE, NS_INIT, NS_TRAIN, rng_stream
from .soup import SoupSet, maybe_select, patch
from .metrics import accuracy

METHODS = ("fedavg", "fedprox", "fedsoup", "local_only")

# Methods whose final per-client models differ; the others deploy the global model.
PERSONALIZED_METHODS = ("fedsoup", "local_only")


@dataclass(frozen=True)
class FederatedConfig:
    """Full training-side description of one experiment."""

    method: str = "fedavg"
    rounds: int = 200
    local_epochs: int = 1
    batch_size: int = 16
    learning_rate: float = 1e-3
    optimizer: str = "adam"
    beta1: float = 0.9
    beta2: float = 0.99
    fedprox_mu: float = 0.01
    interpolation_start_fraction: float = 0.75
    soup_mode: str = "accumulate"
    seed: int = 0
    fine_tune_iters: tuple[int, ...] = (1, 7, 15)

    def __post_init__(self) -> None:
        if self.method not in METHODS:
            raise ConfigurationError(f"unknown method {self.method!r}, expected one of {METHODS}")
        if self.rounds < 0:
            raise ConfigurationError("rounds must be >= 0")
        if self.local_epochs < 0:
            raise ConfigurationError("local_epochs must be >= 0")
        if self.batch_size < 1:
            raise ConfigurationError("batch_size must be >= 1")
        if self.learning_rate <= 0.0:
            raise ConfigurationError("learning_rate must be positive")
        if self.optimizer not in ("sgd", "adam"):
            raise ConfigurationError(f"unknown optimizer {self.optimizer!r}")
        if self.fedprox_mu < 0.0:
            raise ConfigurationError("fedprox_mu must be >= 0")
        if not (0.0 <= self.interpolation_start_fraction <= 1.0):
            raise ConfigurationError("interpolation_start_fraction must lie in [0, 1]")
        if self.soup_mode not in ("accumulate", "replace"):
            raise ConfigurationError(f"unknown soup_mode {self.soup_mode!r}")
        if self.seed < 0:
            raise ConfigurationError("seed must be non-negative")
        if any(i < 0 for i in self.fine_tune_iters):
            raise ConfigurationError("fine_tune_iters must be non-negative")
        if self.method == "fedsoup" and self.interpolation_start_fraction * self.rounds < 1:
            raise ConfigurationError("fedsoup requires interpolation_start_fraction * rounds >= 1")
        object.__setattr__(self, "fine_tune_iters", tuple(int(i) for i in self.fine_tune_iters))


@dataclass
class ClientState:
    """One client's mutable training state across rounds."""

    client_id: int
    data: ClientDataset
    local_params: np.ndarray
    soup: SoupSet
    optimizer_state: OptimizerState


@dataclass(frozen=True)
class RoundRecord:
    """Audit record emitted after every completed round."""

    round: int
    val_accuracy: tuple[float, ...]
    soup_sizes: tuple[int, ...]
    global_checksum: str

    def to_json(self) -> dict:
        return {
            "round": self.round,
            "val_accuracy": list(self.val_accuracy),
            "soup_sizes": list(self.soup_sizes),
            "global_checksum": self.global_checksum,
        }


def parameter_checksum(params: np.ndarray) -> str:
    return hashlib.sha256(np.ascontiguousarray(params).tobytes()).hexdigest()[:16]


def soup_start_round(cfg: FederatedConfig) -> int:
    """First round index at which selection/patching runs (may be >= rounds)."""
    # The small slack keeps e.g. 0.1 * 30 from landing above its exact value.
    return math.ceil(cfg.interpolation_start_fraction * cfg.rounds - 1e-9)


def aggregate(param_list: list[np.ndarray], weights: list[float]) -> np.ndarray:
    """Weighted mean of parameter vectors; uniform weights give plain averaging."""
    if not param_list:
        raise ConfigurationError("cannot aggregate an empty list of parameter vectors")
    if len(weights) != len(param_list):
        raise ConfigurationError("weights must align with parameter vectors")
    shape = param_list[0].shape
    if any(p.shape != shape for p in param_list):
        raise ConfigurationError("parameter vectors must all share one length")
    w = np.asarray(weights, dtype=np.float64)
    if np.any(w < 0.0):
        raise ConfigurationError("weights must be non-negative")
    total = float(w.sum())
    if total <= 0.0:
        raise ConfigurationError("weights must sum to a positive value")
    if not all(np.all(np.isfinite(p)) for p in param_list):
        raise ConfigurationError("parameter vectors contain non-finite entries")
    return (np.stack(param_list) * w[:, None]).sum(axis=0) / total


def _fresh_optimizer(cfg: FederatedConfig, param_count: int) -> OptimizerState:
    return OptimizerState.create(
        cfg.optimizer, cfg.learning_rate, param_count, beta1=cfg.beta1, beta2=cfg.beta2
    )


def client_update(
    arch: MlpArchitecture,
    state: ClientState,
    global_params: np.ndarray,
    cfg: FederatedConfig,
    round_index: int,
) -> tuple[np.ndarray, OptimizerState]:
    """One client's local training for a round.

    fedavg/fedsoup start from the broadcast global model; local_only ignores
    it and continues from the client's own parameters; fedprox starts from
    the global model and adds mu * (theta - theta_global) to every gradient.
    The RNG stream is keyed by (seed, round, client), so client execution
    order can never change results.
    """
    start = state.local_params if cfg.method == "local_only" else global_params
    prox_mu = cfg.fedprox_mu if cfg.method == "fedprox" else 0.0
    rng = rng_stream(cfg.seed, NS_TRAIN, round_index, state.client_id)
    return train_local(
        arch,
        start,
        state.data.train,
        cfg.local_epochs,
        cfg.batch_size,
        state.optimizer_state,
        rng,
        prox_mu=prox_mu,
        prox_ref=global_params if prox_mu != 0.0 else None,
    )


def run_training(
    fed: FederationData,
    arch: MlpArchitecture,
    cfg: FederatedConfig,
    trace: IO[str] | None = None,
    trace_label: str | None = None,
) -> tuple[list[ClientState], np.ndarray, list[RoundRecord]]:
    """Run the configured number of communication rounds.

    Returns the final client states, the last broadcast global model, and one
    record per round. Exactly ``cfg.rounds`` aggregations happen; round 0
    aggregates identical copies of the shared initialization, which is the
    same as broadcasting it.
    """
    if len(fed.clients) < 2:
        raise ConfigurationError("training requires at least 2 participating clients")
    init = init_params(arch, rng_stream(cfg.seed, NS_INIT))
    states = [
        ClientState(
            client_id=c.client_id,
            data=c,
            local_params=init.copy(),
            soup=SoupSet(),
            optimizer_state=_fresh_optimizer(cfg, arch.param_count),
        )
        for c in fed.clients
    ]
    start_round = soup_start_round(cfg)
    uniform = [1.0] * len(states)
    records: list[RoundRecord] = []
    global_params = init
    for rnd in range(cfg.rounds):
        global_params = aggregate([s.local_params for s in states], uniform)
        for s in states:
            new_params, new_opt = client_update(arch, s, global_params, cfg, rnd)
            if cfg.method == "fedsoup" and rnd >= start_round:
                decision = maybe_select(
                    s.soup,
                    global_params,
                    new_params,
                    arch,
                    s.data.val,
                    mode=cfg.soup_mode,
                    round_index=rnd,
                )
                s.soup = decision.soup
                new_params = patch(s.soup, new_params)
            s.local_params = new_params
            s.optimizer_state = new_opt
        record = RoundRecord(
            round=rnd,
            val_accuracy=tuple(accuracy(arch, s.local_params, s.data.val) for s in states),
            soup_sizes=tuple(len(s.soup) for s in states),
            global_checksum=parameter_checksum(global_params),
        )
        records.append(record)
        if trace is not None:
            line = record.to_json()
            if trace_label is not None:
                line = {"method": trace_label, **line}
            trace.write(json.dumps(line) + "\n")
    return states, global_params, records


def fine_tune(
    arch: MlpArchitecture,
    params: np.ndarray,
    client: ClientDataset,
    iters: int,
    cfg: FederatedConfig,
) -> np.ndarray:
    """Run ``iters`` epochs of local training on the client's train split.

    Starts from a fresh optimizer and a dedicated RNG stream; ``iters=0``
    returns the parameters unchanged. Never mutates its inputs.
    """
    if iters < 0:
        raise ConfigurationError("fine-tune iterations must be >= 0")
    if iters == 0:
        return params.copy()
    rng = rng_stream(cfg.seed, NS_FINE_TUNE, client.client_id)
    tuned, _ = train_local(
        arch,
        params,
        client.train,
        iters,
        cfg.batch_size,
        _fresh_optimizer(cfg, arch.param_count),
        rng,
    )
    return tuned
