"""Classification metrics: argmax accuracy and rank-based binary AUC."""

from __future__ import annotations

import numpy as np

from .errors import ConfigurationError, UndefinedMetricError
from .nn import Batch, MlpArchitecture, _softmax, forward


def predict_classes(arch: MlpArchitecture, params: np.ndarray, batch: Batch) -> np.ndarray:
    """Argmax class per sample; ties break toward the lowest class index."""
    return np.argmax(forward(arch, params, batch), axis=1)


def accuracy(arch: MlpArchitecture, params: np.ndarray, batch: Batch) -> float:
    return float(np.mean(predict_classes(arch, params, batch) == batch.labels))


def positive_scores(arch: MlpArchitecture, params: np.ndarray, batch: Batch) -> np.ndarray:
    """Softmax probability of class 1; defined for binary architectures only."""
    if arch.class_count != 2:
        raise ConfigurationError("positive-class scores require exactly 2 classes")
    return _softmax(forward(arch, params, batch))[:, 1]


def _midranks(values: np.ndarray) -> np.ndarray:
    """1-based ranks with tied values sharing their average rank."""
    order = np.argsort(values, kind="stable")
    ranks = np.empty(values.shape[0], dtype=np.float64)
    i = 0
    while i < values.shape[0]:
        j = i
        while j + 1 < values.shape[0] and values[order[j + 1]] == values[order[i]]:
            j += 1
        # positions i..j (0-based) share the average of ranks i+1..j+1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def auc_binary(scores, labels) -> float:
    """Mann-Whitney AUC: P(score_pos > score_neg) with ties counted as 1/2.

    Computed via midranks, which matches exhaustive pair counting exactly,
    including the tie convention.
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if scores.shape != labels.shape or scores.ndim != 1:
        raise ConfigurationError("scores and labels must be aligned vectors")
    if not np.all((labels == 0) | (labels == 1)):
        raise ConfigurationError("labels must be 0/1 for binary AUC")
    n_pos = int(np.sum(labels == 1))
    n_neg = labels.shape[0] - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetricError("AUC is undefined when only one class is present")
    ranks = _midranks(scores)
    rank_sum = float(np.sum(ranks[labels == 1]))
    return (rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)
