"""Command line interface.

Five subcommands cover the toolkit surface: cohort simulation, model
training, evaluation, counterfactual personalization and the packaged
experiments. Output is deterministic for a fixed config and seed, byte
for byte, regardless of the thread cap.

Exit codes: 0 on success, 1 on runtime failure, 2 on invalid input.
"""

from __future__ import annotations

import argparse
import json
import sys
from os import makedirs, path as osp
from typing import Optional

import numpy as np

from .config import ConfigError, RunConfig, load_config
from .counterfactual import ConstraintError, Counterfactual
from .dataset import DatasetError, read_csv, write_csv
from .domain import DomainError, sample_from_record, sample_to_record
from .experiments import EXPERIMENTS, accuracy, macro_f1, run_experiment, write_outputs
from .forest import ForestError, canonical_json
from .pipeline import (
    PipelineError,
    TwoStepModel,
    load_model,
    personalize_direct,
    personalize_two_step,
    save_model,
    train_direct,
    train_two_step,
)
from .simulator import generate_dataset

_VALIDATION_ERRORS = (
    ConfigError,
    ConstraintError,
    DatasetError,
    DomainError,
    ForestError,
    PipelineError,
)

_MODES = ("direct", "two_step")


def _ensure_parent(file_path: str) -> None:
    parent = osp.dirname(file_path)
    if parent:
        makedirs(parent, exist_ok=True)


def _write_text(file_path: str, text: str) -> None:
    _ensure_parent(file_path)
    with open(file_path, "w", newline="") as fh:
        fh.write(text)


def _positive_fraction(labels) -> float:
    return float(np.mean(np.asarray(labels) != 0))


def _read_data(file_path: str):
    try:
        return read_csv(file_path)
    except FileNotFoundError:
        raise ConfigError(f"data file not found: {file_path}") from None


def _load_model(file_path: str):
    try:
        return load_model(file_path)
    except FileNotFoundError:
        raise ConfigError(f"model file not found: {file_path}") from None


def cmd_simulate(args: argparse.Namespace) -> int:
    config = load_config(args.config, args.seed, args.threads)
    dataset = generate_dataset(config.cohort)
    _ensure_parent(args.out)
    write_csv(dataset, args.out)
    fraction = _positive_fraction(dataset.labels())
    print(f"rows={len(dataset.rows)} positive_fraction={fraction:.6f}")
    return 0


def _train_from(config: RunConfig, dataset, mode: str, include_patient_id: bool):
    params = config.forest_params()
    if mode == "two_step":
        return train_two_step(dataset, params=params, threads=config.threads)
    return train_direct(
        dataset, include_patient_id=include_patient_id, params=params, threads=config.threads
    )


def cmd_train(args: argparse.Namespace) -> int:
    config = load_config(args.config, args.seed, args.threads)
    dataset = _read_data(args.data)
    model = _train_from(config, dataset, args.mode, args.include_patient_id)
    _ensure_parent(args.out)
    save_model(model, args.out)
    print(f"mode={args.mode} rows={len(dataset.rows)} model={args.out}")
    return 0


def cmd_evaluate(args: argparse.Namespace) -> int:
    model = _load_model(args.model)
    dataset = _read_data(args.data)
    truth = [int(v) for v in dataset.labels()]
    pred = [int(v) for v in model.predict_samples(dataset.rows)]
    doc = {
        "rows": len(truth),
        "macro_f1": macro_f1(truth, pred),
        "accuracy": accuracy(truth, pred),
        "positive_fraction": _positive_fraction(truth),
    }
    text = canonical_json(doc)
    print(text)
    if args.out:
        _write_text(args.out, text + "\n")
    return 0


def _read_instance(file_path: str):
    try:
        with open(file_path) as fh:
            record = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"instance file not found: {file_path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{file_path}: invalid JSON: {exc}") from None
    if not isinstance(record, dict):
        raise ConfigError(f"{file_path}: instance must be a JSON object")
    try:
        return sample_from_record(record)
    except KeyError as exc:
        raise ConfigError(f"{file_path}: missing instance field {exc.args[0]!r}") from None


def _personalization_doc(mode: str, cf: Counterfactual, target_mat=None) -> dict:
    doc = {
        "mode": mode,
        "change_count": cf.change_count,
        "probability": cf.probability,
        "changed": {
            name: {"from": before, "to": after}
            for name, (before, after) in cf.changed_values().items()
        },
        "instance": sample_to_record(cf.instance),
    }
    if target_mat is not None:
        doc["target_mat"] = {
            "motivation": target_mat.motivation,
            "ability": target_mat.ability,
            "trigger": target_mat.trigger,
        }
    return doc


def cmd_personalize(args: argparse.Namespace) -> int:
    config = load_config(args.config, args.seed, args.threads)
    instance = _read_instance(args.instance)
    mode: Optional[str] = args.mode
    if args.model is not None:
        model = _load_model(args.model)
        kind = "two_step" if isinstance(model, TwoStepModel) else "direct"
        if mode is None:
            mode = kind
        elif mode != kind:
            raise ConfigError(f"--mode {mode} does not match the {kind} model at {args.model}")
    else:
        # No saved model: train one inline from the configured cohort.
        if mode is None:
            mode = "direct"
        dataset = generate_dataset(config.cohort)
        model = _train_from(config, dataset, mode, include_patient_id=True)

    ga = config.ga_params()
    if mode == "two_step":
        outcome = personalize_two_step(model, instance, ga)
        result = None if outcome is None else _personalization_doc(mode, outcome[1], outcome[0])
    else:
        cf = personalize_direct(model, instance, ga)
        result = None if cf is None else _personalization_doc(mode, cf)

    if result is None:
        text = "null"
        print(text)
        print(
            "no intervention change within the allowed features flips the prediction",
            file=sys.stderr,
        )
    else:
        text = canonical_json(result)
        print(text)
    if args.out:
        _write_text(args.out, text + "\n")
    return 0


def cmd_experiment(args: argparse.Namespace) -> int:
    config = load_config(args.config, args.seed, args.threads)
    experiment_config = config.experiment_config(args.experiment)
    table = run_experiment(experiment_config)
    for written in write_outputs(table, experiment_config, args.out):
        print(written)
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="run configuration JSON file")
    common.add_argument("--seed", type=int, metavar="N", help="override the master seed")
    common.add_argument("--threads", type=int, metavar="N", help="cap on worker threads")

    parser = argparse.ArgumentParser(
        prog="matcoach",
        description="Simulation, modeling and personalization for behaviour-change coaching.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[common], help="generate a cohort dataset CSV")
    p.add_argument("--out", required=True, metavar="PATH", help="output CSV path")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("train", parents=[common], help="train a model from a dataset CSV")
    p.add_argument("--data", required=True, metavar="PATH", help="training dataset CSV")
    p.add_argument("--mode", choices=_MODES, default="direct")
    p.add_argument(
        "--include-patient-id",
        action="store_true",
        help="add patient identity features to the direct model",
    )
    p.add_argument("--out", required=True, metavar="PATH", help="output model JSON path")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", parents=[common], help="score a saved model on a dataset CSV")
    p.add_argument("--model", required=True, metavar="PATH", help="saved model JSON")
    p.add_argument("--data", required=True, metavar="PATH", help="evaluation dataset CSV")
    p.add_argument("--out", metavar="PATH", help="also write the metrics JSON here")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser(
        "personalize", parents=[common], help="search for a minimal prediction-flipping change"
    )
    p.add_argument("--instance", required=True, metavar="PATH", help="instance JSON file")
    p.add_argument("--model", metavar="PATH", help="saved model JSON (default: train inline)")
    p.add_argument("--mode", choices=_MODES, default=None)
    p.add_argument("--out", metavar="PATH", help="also write the result JSON here")
    p.set_defaults(func=cmd_personalize)

    p = sub.add_parser("experiment", parents=[common], help="run a packaged experiment")
    p.add_argument("experiment", choices=EXPERIMENTS)
    p.add_argument("--out", default="results", metavar="DIR", help="output directory")
    p.set_defaults(func=cmd_experiment)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except _VALIDATION_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except KeyboardInterrupt:
        return 1
    except Exception as exc:  # runtime failure, not an input problem
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
