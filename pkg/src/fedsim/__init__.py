"""Desk-scale federated learning simulator with checkpoint-soup interpolation."""

from .config import ExperimentSpec, OutputSpec, parse_config, spec_from_dict
from .data import (
    ClientDataset,
    FederationData,
    ShiftSpec,
    generate_federation,
    split_client_pool,
)
from .engine import (
    METHODS,
    ClientState,
    FederatedConfig,
    RoundRecord,
    aggregate,
    client_update,
    fine_tune,
    run_training,
)
from .errors import ConfigurationError, UndefinedMetricError
from .evaluation import (
    HoldoutResult,
    MetricsReport,
    TradeoffRow,
    evaluate_federation,
    leave_one_out_run,
    tradeoff_sweep,
)
from .metrics import accuracy, auc_binary, positive_scores
from .nn import (
    Batch,
    MlpArchitecture,
    OptimizerState,
    forward,
    grad,
    grad_fd,
    init_params,
    loss_ce,
    optimizer_step,
    train_local,
)
from .sharpness import (
    SharpnessConfig,
    SharpnessResult,
    dense_hessian,
    hvp,
    power_iteration,
    sharpness_metric,
)
from .soup import SelectionResult, SoupSet, maybe_select, patch, soup_average, val_acc

__version__ = "0.1.0"

__all__ = [
    "Batch",
    "ClientDataset",
    "ClientState",
    "ConfigurationError",
    "ExperimentSpec",
    "FederatedConfig",
    "FederationData",
    "HoldoutResult",
    "METHODS",
    "MetricsReport",
    "MlpArchitecture",
    "OptimizerState",
    "OutputSpec",
    "RoundRecord",
    "SelectionResult",
    "SharpnessConfig",
    "SharpnessResult",
    "ShiftSpec",
    "SoupSet",
    "TradeoffRow",
    "UndefinedMetricError",
    "accuracy",
    "aggregate",
    "auc_binary",
    "client_update",
    "dense_hessian",
    "evaluate_federation",
    "fine_tune",
    "forward",
    "generate_federation",
    "grad",
    "grad_fd",
    "hvp",
    "init_params",
    "leave_one_out_run",
    "loss_ce",
    "maybe_select",
    "optimizer_step",
    "parse_config",
    "patch",
    "positive_scores",
    "power_iteration",
    "run_training",
    "sharpness_metric",
    "soup_average",
    "spec_from_dict",
    "split_client_pool",
    "train_local",
    "val_acc",
]
