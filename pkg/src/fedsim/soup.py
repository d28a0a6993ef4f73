"""Per-client checkpoint soups: validation-gated selection and weight patching.

A soup is an ordered set of historical global checkpoints a client has
accepted. Selection is greedy: a new global checkpoint joins the soup only if
averaging it in does not hurt accuracy on the client's own validation split.
Patching replaces the client's local model with the uniform average of the
soup and the local model, pulling the personalized model toward the
consensus region without discarding local training.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError
from .metrics import accuracy
from .nn import Batch, MlpArchitecture

SOUP_MODES = ("accumulate", "replace")


@dataclass
class SoupSet:
    """Ordered (round_index, params) entries; rounds strictly increasing."""

    entries: list[tuple[int, np.ndarray]] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def round_indices(self) -> list[int]:
        return [r for r, _ in self.entries]

    def vectors(self) -> list[np.ndarray]:
        return [p for _, p in self.entries]

    def _check_entry(self, round_index: int, params: np.ndarray) -> None:
        if self.entries:
            if round_index <= self.entries[-1][0]:
                raise ConfigurationError("soup round indices must be strictly increasing")
            if params.shape != self.entries[-1][1].shape:
                raise ConfigurationError("all soup entries must share one parameter length")

    def appended(self, round_index: int, params: np.ndarray) -> "SoupSet":
        self._check_entry(round_index, params)
        return SoupSet(self.entries + [(round_index, params.copy())])

    def replaced(self, round_index: int, params: np.ndarray) -> "SoupSet":
        return SoupSet([(round_index, params.copy())])


def soup_average(soup: SoupSet, extras: list[np.ndarray]) -> np.ndarray:
    """Uniform (unweighted) mean over all soup entries plus the extra vectors."""
    vectors = soup.vectors() + list(extras)
    if not vectors:
        raise ConfigurationError("cannot average an empty collection of parameter vectors")
    length = vectors[0].shape
    if any(v.shape != length for v in vectors):
        raise ConfigurationError("parameter vectors must all share one length")
    return np.mean(np.stack(vectors), axis=0)


def val_acc(arch: MlpArchitecture, params: np.ndarray, val: Batch) -> float:
    """Fraction of argmax-correct predictions; argmax ties go to the lowest class."""
    return accuracy(arch, params, val)


def patch(soup: SoupSet, theta_local: np.ndarray) -> np.ndarray:
    """Average the soup with the local model; an empty soup leaves it unchanged."""
    if len(soup) == 0:
        return theta_local.copy()
    return soup_average(soup, [theta_local])


@dataclass(frozen=True)
class SelectionResult:
    """Outcome of one selection decision, with both scores kept for audit."""

    soup: SoupSet
    acc_with_candidate: float
    acc_without_candidate: float
    selected: bool


def maybe_select(
    soup: SoupSet,
    theta_global: np.ndarray,
    theta_local: np.ndarray,
    arch: MlpArchitecture,
    val: Batch,
    mode: str = "accumulate",
    round_index: int = 0,
) -> SelectionResult:
    """Admit the current global checkpoint into the soup if it does not hurt.

    Compares validation accuracy of average(soup + local + global) against
    average(soup + local). The comparison is inclusive: on equality the
    candidate is admitted. ``accumulate`` appends to the soup, so later
    patching averages every accepted checkpoint; ``replace`` keeps only the
    most recently accepted one.
    """
    if mode not in SOUP_MODES:
        raise ConfigurationError(f"unknown soup mode {mode!r}, expected one of {SOUP_MODES}")
    acc_with = val_acc(arch, soup_average(soup, [theta_local, theta_global]), val)
    acc_without = val_acc(arch, soup_average(soup, [theta_local]), val)
    selected = acc_with >= acc_without
    if not selected:
        return SelectionResult(soup, acc_with, acc_without, False)
    if mode == "accumulate":
        new_soup = soup.appended(round_index, theta_global)
    else:
        new_soup = soup.replaced(round_index, theta_global)
    return SelectionResult(new_soup, acc_with, acc_without, True)
