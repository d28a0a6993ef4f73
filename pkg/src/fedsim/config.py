"""Experiment configuration: strict JSON parsing with defaults in one place.

The config document has five top-level sections: ``data``, ``model``,
``training``, ``methods``, ``outputs``. Every key is optional; defaults are
the dataclass defaults of :class:`~fedsim.data.ShiftSpec` and
:class:`~fedsim.engine.FederatedConfig` plus the model/output defaults below.
Unknown keys are fatal, naming the offending key, so a typo can never
silently fall back to a default.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from .data import ShiftSpec
from .engine import METHODS, FederatedConfig
from .errors import ConfigurationError
from .nn import ACTIVATIONS, MlpArchitecture

DEFAULT_HIDDEN_SIZES = (16,)
DEFAULT_ACTIVATION = "relu"
DEFAULT_OUTPUT_DIR = "out"

_TOP_KEYS = ("data", "model", "training", "methods", "outputs")
_MODEL_KEYS = ("hidden_sizes", "activation")
_OUTPUT_KEYS = ("dir", "trace")
_DATA_KEYS = tuple(f.name for f in fields(ShiftSpec))
_TRAINING_KEYS = tuple(f.name for f in fields(FederatedConfig) if f.name != "method")


@dataclass(frozen=True)
class OutputSpec:
    directory: Path = Path(DEFAULT_OUTPUT_DIR)
    trace: Path | None = None


@dataclass(frozen=True)
class ExperimentSpec:
    """Fully resolved description of one experiment invocation."""

    data: ShiftSpec = field(default_factory=ShiftSpec)
    hidden_sizes: tuple[int, ...] = DEFAULT_HIDDEN_SIZES
    activation: str = DEFAULT_ACTIVATION
    training: FederatedConfig = field(default_factory=FederatedConfig)
    methods: tuple[str, ...] = METHODS
    outputs: OutputSpec = field(default_factory=OutputSpec)

    def __post_init__(self) -> None:
        if not self.methods:
            raise ConfigurationError("methods must be non-empty")
        for m in self.methods:
            if m not in METHODS:
                raise ConfigurationError(f"unknown method {m!r}, expected one of {METHODS}")
        if self.activation not in ACTIVATIONS:
            raise ConfigurationError(f"unknown activation {self.activation!r}")
        if not self.hidden_sizes or any(h < 1 for h in self.hidden_sizes):
            raise ConfigurationError("hidden_sizes must be a non-empty list of positive ints")

    def architecture(self) -> MlpArchitecture:
        sizes = (self.data.input_dim, *self.hidden_sizes, self.data.class_count)
        return MlpArchitecture(sizes, self.activation)

    def to_dict(self) -> dict:
        """Echo of the spec with every default expanded; parses back to itself."""
        return {
            "data": {k: getattr(self.data, k) for k in _DATA_KEYS},
            "model": {"hidden_sizes": list(self.hidden_sizes), "activation": self.activation},
            "training": {
                k: (list(v) if isinstance(v := getattr(self.training, k), tuple) else v)
                for k in _TRAINING_KEYS
            },
            "methods": list(self.methods),
            "outputs": {
                "dir": str(self.outputs.directory),
                "trace": str(self.outputs.trace) if self.outputs.trace else None,
            },
        }


def _require_mapping(value, section: str) -> dict:
    if not isinstance(value, dict):
        raise ConfigurationError(f"section '{section}' must be a JSON object")
    return value


def _reject_unknown(doc: dict, allowed: tuple[str, ...], section: str) -> None:
    for key in doc:
        if key not in allowed:
            where = f" in section '{section}'" if section else ""
            raise ConfigurationError(f"unknown key '{key}'{where}")


def spec_from_dict(doc: dict) -> ExperimentSpec:
    _require_mapping(doc, "top level")
    _reject_unknown(doc, _TOP_KEYS, "")

    data_doc = _require_mapping(doc.get("data", {}), "data")
    _reject_unknown(data_doc, _DATA_KEYS, "data")
    data = ShiftSpec(**data_doc)

    model_doc = _require_mapping(doc.get("model", {}), "model")
    _reject_unknown(model_doc, _MODEL_KEYS, "model")
    hidden = tuple(int(h) for h in model_doc.get("hidden_sizes", DEFAULT_HIDDEN_SIZES))
    activation = model_doc.get("activation", DEFAULT_ACTIVATION)

    training_doc = _require_mapping(doc.get("training", {}), "training")
    _reject_unknown(training_doc, _TRAINING_KEYS, "training")
    if "fine_tune_iters" in training_doc:
        training_doc = {**training_doc, "fine_tune_iters": tuple(training_doc["fine_tune_iters"])}
    training = FederatedConfig(**training_doc)

    methods = doc.get("methods", list(METHODS))
    if not isinstance(methods, list):
        raise ConfigurationError("section 'methods' must be a JSON list")

    outputs_doc = _require_mapping(doc.get("outputs", {}), "outputs")
    _reject_unknown(outputs_doc, _OUTPUT_KEYS, "outputs")
    trace = outputs_doc.get("trace")
    outputs = OutputSpec(
        directory=Path(outputs_doc.get("dir", DEFAULT_OUTPUT_DIR)),
        trace=Path(trace) if trace else None,
    )

    return ExperimentSpec(
        data=data,
        hidden_sizes=hidden,
        activation=activation,
        training=training,
        methods=tuple(methods),
        outputs=outputs,
    )


def parse_config(path: str | Path) -> ExperimentSpec:
    path = Path(path)
    if not path.exists():
        raise ConfigurationError(f"config file not found: {path}")
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"malformed JSON in {path}: {exc}") from exc
    return spec_from_dict(doc)


def with_overrides(
    spec: ExperimentSpec, seed: int | None = None, trace: str | Path | None = None
) -> ExperimentSpec:
    if seed is not None:
        spec = replace(spec, training=replace(spec.training, seed=seed))
    if trace is not None:
        spec = replace(spec, outputs=replace(spec.outputs, trace=Path(trace)))
    return spec
