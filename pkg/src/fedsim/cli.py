"""Experiment runner CLI.

Subcommands: ``run`` (method comparison on one federation), ``sharpness``
(curvature of the final models), ``tradeoff`` (fine-tuning depth sweep),
``loo`` (leave-one-out unseen-domain study), ``export-data`` (dump the
generated federation as JSON). Without ``--config`` every subcommand runs the
built-in default experiment.

Exit codes: 0 success, 1 usage or configuration error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import sys
from contextlib import nullcontext
from dataclasses import replace
from pathlib import Path
from time import perf_counter

from .config import ExperimentSpec, parse_config, with_overrides
from .data import federation_to_json, generate_federation
from .engine import run_training
from .errors import ConfigurationError
from .evaluation import evaluate_federation, leave_one_out_run, loo_summary, tradeoff_sweep
from .reports import make_envelope, to_jsonable, write_csv, write_report
from .sharpness import SharpnessConfig, sharpness_metric


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # noqa: A003 - argparse API
        raise _UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="fedsim", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("run", "train every configured method and write report.json + table1.csv"),
        ("sharpness", "median dominant Hessian eigenvalue per method and client"),
        ("tradeoff", "local/global accuracy across fine-tuning depths"),
        ("loo", "leave-one-out unseen-domain evaluation"),
        ("export-data", "write the generated federation as a JSON document"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", type=Path, default=None, help="JSON experiment config")
        p.add_argument("--seed", type=int, default=None, help="override the configured seed")
        p.add_argument("--trace", type=Path, default=None, help="write per-round records to this JSONL file")
    return parser


def _load_spec(args: argparse.Namespace) -> ExperimentSpec:
    spec = parse_config(args.config) if args.config is not None else ExperimentSpec()
    return with_overrides(spec, seed=args.seed, trace=args.trace)


def _train_all(spec: ExperimentSpec, trace_file):
    """Train every configured method on one shared federation."""
    arch = spec.architecture()
    fed = generate_federation(spec.data, None, spec.training.seed)
    trained = {}
    for method in spec.methods:
        cfg = replace(spec.training, method=method)
        states, global_params, records = run_training(
            fed, arch, cfg, trace=trace_file, trace_label=method
        )
        trained[method] = (cfg, states, global_params, records)
    return arch, fed, trained


def _trace_context(spec: ExperimentSpec):
    if spec.outputs.trace is None:
        return nullcontext(None)
    spec.outputs.trace.parent.mkdir(parents=True, exist_ok=True)
    return open(spec.outputs.trace, "w", encoding="utf-8")


def _write_body(spec: ExperimentSpec, command: str, results: dict, started: float) -> None:
    body = {"schema_version": 1, "command": command, "spec": spec.to_dict(), "results": results}
    write_report(spec.outputs.directory / "report.json", body, make_envelope(perf_counter() - started))


def cmd_run(spec: ExperimentSpec) -> int:
    started = perf_counter()
    with _trace_context(spec) as trace_file:
        arch, fed, trained = _train_all(spec, trace_file)
    results = {}
    rows = []
    for method, (cfg, states, global_params, _) in trained.items():
        report = evaluate_federation(states, global_params, fed, arch, cfg)
        results[method] = report.to_json()
        rows.append(
            [
                method,
                report.local_accuracy_mean,
                report.local_auc_mean,
                report.global_accuracy_mean,
                report.global_auc_mean,
            ]
        )
    _write_body(spec, "run", results, started)
    write_csv(
        spec.outputs.directory / "table1.csv",
        ["method", "local_accuracy", "local_auc", "global_accuracy", "global_auc"],
        rows,
    )
    return 0


def cmd_tradeoff(spec: ExperimentSpec) -> int:
    started = perf_counter()
    with _trace_context(spec) as trace_file:
        arch, fed, trained = _train_all(spec, trace_file)
    results = {}
    rows = []
    for method, (cfg, states, global_params, _) in trained.items():
        report = evaluate_federation(states, global_params, fed, arch, cfg)
        report.tradeoff = tradeoff_sweep(states, global_params, fed, arch, cfg)
        results[method] = report.to_json()
        for row in report.tradeoff:
            rows.append([method, row.fine_tune_iters, row.local_accuracy, row.global_accuracy])
    _write_body(spec, "tradeoff", results, started)
    write_csv(
        spec.outputs.directory / "tradeoff.csv",
        ["method", "fine_tune_iters", "local_accuracy", "global_accuracy"],
        rows,
    )
    return 0


def cmd_sharpness(spec: ExperimentSpec) -> int:
    started = perf_counter()
    with _trace_context(spec) as trace_file:
        arch, fed, trained = _train_all(spec, trace_file)
    sharp_cfg = SharpnessConfig(seed=spec.training.seed)
    results = {}
    rows = []
    for method, (cfg, states, global_params, _) in trained.items():
        report = evaluate_federation(states, global_params, fed, arch, cfg)
        per_client = {}
        from .evaluation import model_for_client

        for st in states:
            model = model_for_client(cfg.method, st, global_params)
            result = sharpness_metric(arch, model, st.data.train, cfg.batch_size, sharp_cfg)
            per_client[str(st.client_id)] = result.to_json()
            rows.append([method, st.client_id, result.median_eigenvalue])
        report.sharpness = per_client
        results[method] = report.to_json()
    _write_body(spec, "sharpness", results, started)
    write_csv(
        spec.outputs.directory / "sharpness.csv",
        ["method", "client_id", "median_eigenvalue"],
        rows,
    )
    return 0


def cmd_loo(spec: ExperimentSpec) -> int:
    started = perf_counter()
    arch = spec.architecture()
    results = {}
    rows = []
    for method in spec.methods:
        cfg = replace(spec.training, method=method)
        per_holdout = leave_one_out_run(spec.data, arch, cfg)
        summary = loo_summary(per_holdout)
        results[method] = {
            "per_holdout": [
                {
                    "holdout_client": r.holdout_client,
                    "unseen_accuracy": r.unseen_accuracy,
                    "unseen_auc": r.unseen_auc,
                    "global_model_accuracy": r.global_model_accuracy,
                    "global_model_auc": r.global_model_auc,
                }
                for r in per_holdout
            ],
            "summary": summary,
        }
        for r in per_holdout:
            rows.append(
                [method, r.holdout_client, r.unseen_accuracy, r.unseen_auc,
                 r.global_model_accuracy, r.global_model_auc]
            )
        rows.append(
            [method, "mean", summary["unseen_accuracy_mean"], summary["unseen_auc_mean"],
             summary["global_model_accuracy_mean"], summary["global_model_auc_mean"]]
        )
    _write_body(spec, "loo", results, started)
    write_csv(
        spec.outputs.directory / "loo.csv",
        ["method", "holdout_client", "unseen_accuracy", "unseen_auc",
         "global_model_accuracy", "global_model_auc"],
        rows,
    )
    return 0


def cmd_export_data(spec: ExperimentSpec) -> int:
    import json

    fed = generate_federation(spec.data, None, spec.training.seed)
    doc = to_jsonable(federation_to_json(fed, spec.data, spec.training.seed))
    out = spec.outputs.directory / "federation.json"
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    return 0


_COMMANDS = {
    "run": cmd_run,
    "sharpness": cmd_sharpness,
    "tradeoff": cmd_tradeoff,
    "loo": cmd_loo,
    "export-data": cmd_export_data,
}


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"fedsim: {exc}", file=sys.stderr)
        return 1
    try:
        spec = _load_spec(args)
        return _COMMANDS[args.command](spec)
    except ConfigurationError as exc:
        print(f"fedsim: configuration error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # runtime/numeric failures
        print(f"fedsim: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
