"""Run configuration: one JSON document, strictly validated.

The document carries a single master seed; per-module seeds (cohort,
forest, genetic search, experiments) are derived from it, so a config
file never contains two seeds that must be kept in sync. Unknown keys are
rejected with their full path before any work starts.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional, Tuple

from .counterfactual import GaParams
from .experiments import ExperimentConfig
from .forest import ForestParams
from .rng import mix
from .simulator import CohortConfig, ThresholdPolicy


class ConfigError(ValueError):
    pass


_POLICY_KEYS = {"kind": str, "value": int, "fraction_below_40": float}
_COHORT_KEYS = {"n_patients": int, "samples_per_patient": int, "threshold_policy": dict}
_FOREST_KEYS = {
    "n_trees": int,
    "max_features": str,
    "min_samples_split": int,
    "max_depth": int,
    "bootstrap": bool,
    "class_weighting": str,
}
_GA_KEYS = {
    "population_size": int,
    "generations": int,
    "mutation_rate": float,
    "crossover_rate": float,
    "elitism": int,
    "sparsity_weight": float,
}
_EXPERIMENT_KEYS = {
    "thresholds": list,
    "patient_counts": list,
    "receptive_fractions": list,
    "train_sizes": list,
    "test_size": int,
    "repetitions": int,
}
_TOP_KEYS = {"seed": int, "threads": int, "cohort": dict, "forest": dict, "ga": dict, "experiment": dict}

_NULLABLE = {"forest.max_depth", "experiment.train_sizes"}


def _check_keys(section: dict, allowed: dict, path: str) -> None:
    for key, value in section.items():
        full = f"{path}.{key}" if path else key
        if key not in allowed:
            raise ConfigError(f"unknown config key {full!r}")
        expected = allowed[key]
        if value is None:
            if full in _NULLABLE:
                continue
            raise ConfigError(f"config key {full!r} must not be null")
        if expected is float:
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ConfigError(f"config key {full!r} must be a number")
        elif expected is int:
            if isinstance(value, bool) or not isinstance(value, int):
                raise ConfigError(f"config key {full!r} must be an integer")
        elif not isinstance(value, expected):
            raise ConfigError(f"config key {full!r} must be of type {expected.__name__}")


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    threads: int = 1
    cohort: CohortConfig = field(
        default_factory=lambda: CohortConfig(1, ThresholdPolicy("fixed", value=10), 432, 0)
    )
    forest: ForestParams = field(default_factory=ForestParams)
    ga: GaParams = field(default_factory=GaParams)
    experiment_overrides: dict = field(default_factory=dict)

    def forest_params(self) -> ForestParams:
        from dataclasses import replace

        return replace(self.forest, seed=mix(self.seed, 1))

    def ga_params(self) -> GaParams:
        from dataclasses import replace

        return replace(self.ga, seed=mix(self.seed, 2))

    def experiment_config(self, experiment: str, threads: Optional[int] = None) -> ExperimentConfig:
        overrides = dict(self.experiment_overrides)
        if "thresholds" in overrides:
            overrides["thresholds"] = tuple(overrides["thresholds"])
        if "patient_counts" in overrides:
            overrides["patient_counts"] = tuple(overrides["patient_counts"])
        if "receptive_fractions" in overrides:
            overrides["receptive_fractions"] = tuple(overrides["receptive_fractions"])
        if overrides.get("train_sizes") is not None:
            overrides["train_sizes"] = tuple(overrides["train_sizes"])
        try:
            return ExperimentConfig(
                experiment=experiment,
                master_seed=self.seed,
                forest=self.forest,
                threads=self.threads if threads is None else threads,
                **overrides,
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from None


def _build_policy(doc: dict) -> ThresholdPolicy:
    _check_keys(doc, _POLICY_KEYS, "cohort.threshold_policy")
    if "kind" not in doc:
        raise ConfigError("config key 'cohort.threshold_policy.kind' is required")
    return ThresholdPolicy(
        kind=doc["kind"],
        value=doc.get("value"),
        fraction_below_40=doc.get("fraction_below_40"),
    )


def parse_config(doc: dict, seed_override: Optional[int] = None, threads: Optional[int] = None) -> RunConfig:
    if not isinstance(doc, dict):
        raise ConfigError("config document must be a JSON object")
    _check_keys(doc, _TOP_KEYS, "")

    seed = doc.get("seed", 0)
    if seed_override is not None:
        seed = seed_override
    if seed < 0:
        raise ConfigError("config key 'seed' must be >= 0")

    thread_count = doc.get("threads", 1)
    if threads is not None:
        thread_count = threads
    if thread_count < 1:
        raise ConfigError("config key 'threads' must be >= 1")

    cohort_doc = dict(doc.get("cohort", {}))
    _check_keys(cohort_doc, _COHORT_KEYS, "cohort")
    policy = (
        _build_policy(dict(cohort_doc["threshold_policy"]))
        if "threshold_policy" in cohort_doc
        else ThresholdPolicy("fixed", value=10)
    )
    cohort = CohortConfig(
        n_patients=cohort_doc.get("n_patients", 1),
        threshold_policy=policy,
        samples_per_patient=cohort_doc.get("samples_per_patient", 432),
        seed=seed,
    )

    forest_doc = dict(doc.get("forest", {}))
    _check_keys(forest_doc, _FOREST_KEYS, "forest")
    forest = ForestParams(**forest_doc)

    ga_doc = dict(doc.get("ga", {}))
    _check_keys(ga_doc, _GA_KEYS, "ga")
    ga = GaParams(**ga_doc)

    experiment_doc = dict(doc.get("experiment", {}))
    _check_keys(experiment_doc, _EXPERIMENT_KEYS, "experiment")

    return RunConfig(
        seed=seed,
        threads=thread_count,
        cohort=cohort,
        forest=forest,
        ga=ga,
        experiment_overrides=experiment_doc,
    )


def load_config(
    path: Optional[str], seed_override: Optional[int] = None, threads: Optional[int] = None
) -> RunConfig:
    """Parse a config file; a missing path means all defaults."""
    if path is None:
        return parse_config({}, seed_override, threads)
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from None
    return parse_config(doc, seed_override, threads)
