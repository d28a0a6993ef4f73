"""The three evaluation axes: local, global, and unseen-domain performance.

Personalized methods (the soup method and the local-only baseline) are
evaluated through each client's final local model and the per-client results
are averaged; the consensus baselines deploy one shared global model, which
is evaluated once per client for a uniform report shape.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .data import FederationData, ShiftSpec, generate_federation
from .engine import (
    PERSONALIZED_METHODS,
    ClientState,
    FederatedConfig,
    fine_tune,
    run_training,
)
from .errors import ConfigurationError
from .metrics import accuracy, auc_binary, positive_scores
from .nn import Batch, MlpArchitecture


@dataclass(frozen=True)
class ClientMetrics:
    client_id: int
    local_accuracy: float
    local_auc: float | None
    global_accuracy: float
    global_auc: float | None


@dataclass(frozen=True)
class TradeoffRow:
    fine_tune_iters: int
    local_accuracy: float
    global_accuracy: float


@dataclass(frozen=True)
class HoldoutResult:
    """Unseen-domain metrics for one leave-one-out fold.

    The headline numbers average the remaining clients' personalized models
    on the held-out pool; the ``global_model_*`` pair always evaluates the
    final broadcast model (the two coincide for non-personalized methods).
    """

    holdout_client: int
    unseen_accuracy: float
    unseen_auc: float | None
    global_model_accuracy: float
    global_model_auc: float | None


@dataclass
class MetricsReport:
    method: str
    clients: list[ClientMetrics]
    local_accuracy_mean: float
    local_auc_mean: float | None
    global_accuracy_mean: float
    global_auc_mean: float | None
    unseen: dict | None = None
    sharpness: dict | None = None
    tradeoff: list[TradeoffRow] | None = None
    soup_rounds: dict[int, list[int]] | None = None
    seeds: tuple[int, ...] = ()

    def to_json(self) -> dict:
        return {
            "method": self.method,
            "clients": [
                {
                    "client_id": c.client_id,
                    "local_accuracy": c.local_accuracy,
                    "local_auc": c.local_auc,
                    "global_accuracy": c.global_accuracy,
                    "global_auc": c.global_auc,
                }
                for c in self.clients
            ],
            "local_accuracy_mean": self.local_accuracy_mean,
            "local_auc_mean": self.local_auc_mean,
            "global_accuracy_mean": self.global_accuracy_mean,
            "global_auc_mean": self.global_auc_mean,
            "unseen": self.unseen,
            "sharpness": self.sharpness,
            "tradeoff": [
                {
                    "fine_tune_iters": r.fine_tune_iters,
                    "local_accuracy": r.local_accuracy,
                    "global_accuracy": r.global_accuracy,
                }
                for r in self.tradeoff
            ]
            if self.tradeoff is not None
            else None,
            "soup_rounds": {str(k): v for k, v in self.soup_rounds.items()}
            if self.soup_rounds is not None
            else None,
            "seeds": list(self.seeds),
        }


def model_for_client(method: str, state: ClientState, global_params: np.ndarray) -> np.ndarray:
    return state.local_params if method in PERSONALIZED_METHODS else global_params


def _batch_metrics(
    arch: MlpArchitecture, params: np.ndarray, batch: Batch
) -> tuple[float, float | None]:
    acc = accuracy(arch, params, batch)
    if arch.class_count != 2:
        return acc, None
    return acc, auc_binary(positive_scores(arch, params, batch), batch.labels)


def _mean_optional(values: list[float | None]) -> float | None:
    if any(v is None for v in values):
        return None
    return float(np.mean([float(v) for v in values]))


def evaluate_federation(
    states: list[ClientState],
    global_params: np.ndarray,
    fed: FederationData,
    arch: MlpArchitecture,
    cfg: FederatedConfig,
) -> MetricsReport:
    """Local metrics on each client's own test split, global metrics on the shared set."""
    rows: list[ClientMetrics] = []
    for st in states:
        model = model_for_client(cfg.method, st, global_params)
        local_acc, local_auc = _batch_metrics(arch, model, st.data.local_test)
        global_acc, global_auc = _batch_metrics(arch, model, fed.global_test)
        rows.append(ClientMetrics(st.client_id, local_acc, local_auc, global_acc, global_auc))
    soup_rounds = None
    if cfg.method == "fedsoup":
        soup_rounds = {st.client_id: st.soup.round_indices for st in states}
    return MetricsReport(
        method=cfg.method,
        clients=rows,
        local_accuracy_mean=float(np.mean([r.local_accuracy for r in rows])),
        local_auc_mean=_mean_optional([r.local_auc for r in rows]),
        global_accuracy_mean=float(np.mean([r.global_accuracy for r in rows])),
        global_auc_mean=_mean_optional([r.global_auc for r in rows]),
        soup_rounds=soup_rounds,
        seeds=(cfg.seed,),
    )


def tradeoff_sweep(
    states: list[ClientState],
    global_params: np.ndarray,
    fed: FederationData,
    arch: MlpArchitecture,
    cfg: FederatedConfig,
) -> list[TradeoffRow]:
    """Mean local/global accuracy after each configured fine-tuning depth.

    Every depth starts again from the trained models; stored states are never
    mutated, so the sweep can be re-run or reordered freely.
    """
    if not cfg.fine_tune_iters:
        raise ConfigurationError("fine_tune_iters must be non-empty for a trade-off sweep")
    rows: list[TradeoffRow] = []
    for iters in cfg.fine_tune_iters:
        local_accs: list[float] = []
        global_accs: list[float] = []
        for st in states:
            start = model_for_client(cfg.method, st, global_params)
            tuned = fine_tune(arch, start, st.data, iters, cfg)
            local_accs.append(accuracy(arch, tuned, st.data.local_test))
            global_accs.append(accuracy(arch, tuned, fed.global_test))
        rows.append(TradeoffRow(iters, float(np.mean(local_accs)), float(np.mean(global_accs))))
    return rows


def _unseen_metrics(
    states: list[ClientState],
    global_params: np.ndarray,
    pool: Batch,
    arch: MlpArchitecture,
    method: str,
) -> tuple[float, float | None]:
    if method in PERSONALIZED_METHODS:
        accs = []
        aucs: list[float | None] = []
        for st in states:
            acc, auc = _batch_metrics(arch, st.local_params, pool)
            accs.append(acc)
            aucs.append(auc)
        return float(np.mean(accs)), _mean_optional(aucs)
    return _batch_metrics(arch, global_params, pool)


def leave_one_out_run(
    spec: ShiftSpec, arch: MlpArchitecture, cfg: FederatedConfig
) -> list[HoldoutResult]:
    """Hold out each client in turn, train on the rest, evaluate on its full pool."""
    if spec.n_clients < 3:
        raise ConfigurationError("leave-one-out needs at least 3 clients")
    results: list[HoldoutResult] = []
    for holdout in range(spec.n_clients):
        fed = generate_federation(spec, holdout_client=holdout, seed=cfg.seed)
        states, global_params, _ = run_training(fed, arch, cfg)
        pool = fed.unseen_client.full_pool()
        acc, auc = _unseen_metrics(states, global_params, pool, arch, cfg.method)
        g_acc, g_auc = _batch_metrics(arch, global_params, pool)
        results.append(HoldoutResult(holdout, acc, auc, g_acc, g_auc))
    return results


def loo_summary(results: list[HoldoutResult]) -> dict:
    return {
        "unseen_accuracy_mean": float(np.mean([r.unseen_accuracy for r in results])),
        "unseen_auc_mean": _mean_optional([r.unseen_auc for r in results]),
        "global_model_accuracy_mean": float(np.mean([r.global_model_accuracy for r in results])),
        "global_model_auc_mean": _mean_optional([r.global_model_auc for r in results]),
    }
