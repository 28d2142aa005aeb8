"""Evaluation metrics and the three packaged experiments.

Experiment 1 sweeps the action threshold for a single simulated patient
and measures how training set size affects behaviour prediction.
Experiment 2 scales the cohort while varying how many patients are
receptive (threshold below 40). Experiment 3 compares supervision
signals: behaviour from raw observables, behaviour from ground-truth MAT
scores, MAT scores from observables, and the composed two-step pipeline.

Every run is deterministic for a given master seed: per-condition and
per-repetition seeds are derived through the same counter-mix used
everywhere else, so tables and charts are byte-stable across reruns and
thread counts.
"""

from __future__ import annotations

import os
import warnings
from contextlib import contextmanager
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .dataset import Dataset, incremental_split
from .domain import DomainError, THRESHOLD_MAX, THRESHOLD_MIN
from .forest import ForestParams
from .pipeline import MAT_LABELS, train_direct, train_two_step
from .rng import mix
from .simulator import CohortConfig, fixed, generate_dataset, stratified
from .svg import line_chart

EXPERIMENTS = ("threshold_sweep", "multi_patient", "supervision")

DEFAULT_THRESHOLDS = (0, 5, 10, 15, 20, 25, 30, 35, 40, 45, 50, 55, 60, 64)
DEFAULT_PATIENT_COUNTS = (1, 5, 10, 25, 50, 100)
DEFAULT_RECEPTIVE_FRACTIONS = (1.0, 0.4, 0.8, 0.65, 0.7, 0.52)
DEFAULT_TRAIN_SIZES = (2, 4, 8, 16, 24, 32)
MULTI_PATIENT_TRAIN_SIZES = (30,)

_EXPERIMENT_TAGS = {"threshold_sweep": 1, "multi_patient": 2, "supervision": 3}


def macro_f1(truth: Sequence[int], pred: Sequence[int]) -> float:
    """Unweighted mean F1 over the classes present in truth or prediction.

    A class seen on only one side scores zero; classes absent from both
    sides are excluded entirely, so an all-negative test set predicted
    all-negative still scores 1.0.
    """
    truth = np.asarray(truth)
    pred = np.asarray(pred)
    if truth.shape != pred.shape or truth.ndim != 1:
        raise ValueError("truth and prediction must be 1-D and the same length")
    if len(truth) == 0:
        raise ValueError("cannot score empty label arrays")
    scores = []
    for c in sorted(set(truth.tolist()) | set(pred.tolist())):
        tp = int(np.sum((truth == c) & (pred == c)))
        fp = int(np.sum((truth != c) & (pred == c)))
        fn = int(np.sum((truth == c) & (pred != c)))
        precision = tp / (tp + fp) if tp + fp > 0 else 0.0
        recall = tp / (tp + fn) if tp + fn > 0 else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
        scores.append(f1)
    return float(np.mean(scores))


def accuracy(truth: Sequence[int], pred: Sequence[int]) -> float:
    truth = np.asarray(truth)
    pred = np.asarray(pred)
    if truth.shape != pred.shape or len(truth) == 0:
        raise ValueError("truth and prediction must be non-empty and the same length")
    return float(np.mean(truth == pred))


def _positive_fraction(labels: np.ndarray) -> float:
    return float(np.mean(labels != 0))


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    thresholds: Tuple[int, ...] = DEFAULT_THRESHOLDS
    patient_counts: Tuple[int, ...] = DEFAULT_PATIENT_COUNTS
    receptive_fractions: Tuple[float, ...] = DEFAULT_RECEPTIVE_FRACTIONS
    train_sizes: Optional[Tuple[int, ...]] = None
    test_size: int = 400
    repetitions: int = 20
    master_seed: int = 0
    forest: ForestParams = field(default_factory=ForestParams)
    threads: int = 1

    def __post_init__(self) -> None:
        if self.experiment not in EXPERIMENTS:
            raise ValueError(f"unknown experiment {self.experiment!r}; choose from {EXPERIMENTS}")
        for t in self.thresholds:
            if not THRESHOLD_MIN <= t <= THRESHOLD_MAX:
                raise DomainError(f"threshold {t} outside [0, 64]")
        if len(self.patient_counts) != len(self.receptive_fractions):
            raise ValueError("patient_counts and receptive_fractions must have equal length")
        if self.train_sizes is not None:
            if not self.train_sizes or list(self.train_sizes) != sorted(set(self.train_sizes)):
                raise ValueError("train_sizes must be non-empty, ascending, distinct")
            if self.train_sizes[0] < 1:
                raise ValueError("train_sizes must be >= 1")
        if self.test_size < 1:
            raise ValueError(f"test_size={self.test_size} must be >= 1")
        if self.repetitions < 1:
            raise ValueError(f"repetitions={self.repetitions} must be >= 1")
        if self.threads < 1:
            raise ValueError(f"threads={self.threads} must be >= 1")

    def resolved_train_sizes(self) -> Tuple[int, ...]:
        if self.train_sizes is not None:
            return self.train_sizes
        if self.experiment == "multi_patient":
            return MULTI_PATIENT_TRAIN_SIZES
        return DEFAULT_TRAIN_SIZES


RESULT_COLUMNS = (
    "experiment",
    "condition",
    "train_size",
    "repetition",
    "macro_f1",
    "accuracy",
    "positive_fraction",
)


@dataclass
class ResultTable:
    rows: List[Tuple[str, str, int, int, float, float, float]]

    def append(self, *row) -> None:
        self.rows.append(tuple(row))

    def to_csv_text(self) -> str:
        lines = [",".join(RESULT_COLUMNS)]
        for exp, cond, size, rep, f1, acc, pos in self.rows:
            lines.append(f"{exp},{cond},{size},{rep},{f1:.6f},{acc:.6f},{pos:.6f}")
        return "\n".join(lines) + "\n"

    def summary_csv_text(self) -> str:
        groups: Dict[Tuple[str, str, int], List[Tuple[float, float]]] = {}
        order: List[Tuple[str, str, int]] = []
        for exp, cond, size, _rep, f1, acc, _pos in self.rows:
            key = (exp, cond, size)
            if key not in groups:
                groups[key] = []
                order.append(key)
            groups[key].append((f1, acc))
        lines = ["experiment,condition,train_size,repetitions,mean_macro_f1,std_macro_f1,mean_accuracy"]
        for key in order:
            vals = groups[key]
            f1s = np.array([v[0] for v in vals])
            accs = np.array([v[1] for v in vals])
            lines.append(
                f"{key[0]},{key[1]},{key[2]},{len(vals)},"
                f"{f1s.mean():.6f},{f1s.std():.6f},{accs.mean():.6f}"
            )
        return "\n".join(lines) + "\n"

    def mean_macro_f1(self, condition: str, train_size: int) -> float:
        vals = [f1 for _e, c, s, _r, f1, _a, _p in self.rows if c == condition and s == train_size]
        if not vals:
            raise KeyError(f"no rows for condition={condition!r} train_size={train_size}")
        return float(np.mean(vals))

    def per_repetition(self, condition: str, train_size: int) -> List[float]:
        return [
            f1
            for _e, c, s, _r, f1, _a, _p in self.rows
            if c == condition and s == train_size
        ]


@contextmanager
def _quiet_fit():
    # tiny or extreme-threshold training sets are legitimately single-class
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        yield


def _frac_text(frac: float) -> str:
    return "%g" % frac


def run_threshold_sweep(config: ExperimentConfig) -> ResultTable:
    """One patient, fixed thresholds; behaviour model without identity."""
    sizes = config.resolved_train_sizes()
    need = max(sizes) + config.test_size
    table = ResultTable([])
    tag = _EXPERIMENT_TAGS["threshold_sweep"]
    for ci, threshold in enumerate(config.thresholds):
        for rep in range(config.repetitions):
            seed = mix(mix(mix(config.master_seed, tag), ci), rep)
            cohort = CohortConfig(1, fixed(threshold), need, seed)
            splits = incremental_split(generate_dataset(cohort), sizes, config.test_size)
            for k, (train, test) in enumerate(splits):
                params = replace(config.forest, seed=mix(seed, 1000 + k))
                with _quiet_fit():
                    model = train_direct(train, False, params, threads=config.threads)
                truth = test.labels()
                pred = model.predict_samples(test.rows)
                table.append(
                    "threshold_sweep",
                    f"threshold={threshold}",
                    sizes[k],
                    rep,
                    macro_f1(truth, pred),
                    accuracy(truth, pred),
                    _positive_fraction(truth),
                )
    return table


def run_multi_patient(config: ExperimentConfig) -> ResultTable:
    """Cohorts of varying size and receptiveness; identity one-hot on."""
    sizes = config.resolved_train_sizes()
    need = max(sizes) + config.test_size
    table = ResultTable([])
    tag = _EXPERIMENT_TAGS["multi_patient"]
    for ci, (count, frac) in enumerate(zip(config.patient_counts, config.receptive_fractions)):
        for rep in range(config.repetitions):
            seed = mix(mix(mix(config.master_seed, tag), ci), rep)
            cohort = CohortConfig(count, stratified(frac), need, seed)
            splits = incremental_split(generate_dataset(cohort), sizes, config.test_size)
            condition = f"patients={count},receptive={_frac_text(frac)}"
            for k, (train, test) in enumerate(splits):
                params = replace(config.forest, seed=mix(seed, 1000 + k))
                with _quiet_fit():
                    model = train_direct(train, True, params, threads=config.threads)
                truth = test.labels()
                pred = model.predict_samples(test.rows)
                table.append(
                    "multi_patient",
                    condition,
                    sizes[k],
                    rep,
                    macro_f1(truth, pred),
                    accuracy(truth, pred),
                    _positive_fraction(truth),
                )
    return table


def run_supervision_comparison(config: ExperimentConfig) -> ResultTable:
    """Compare supervision signals on identical cohorts.

    Setups per cell: `direct` predicts behaviour from observables plus
    identity; `mat_truth` predicts behaviour from ground-truth MAT plus
    identity; `mat_pred_{m,a,t}` predict each MAT score from observables;
    `two_step` composes score prediction with the mat_truth-style
    behaviour stage.
    """
    sizes = config.resolved_train_sizes()
    need = max(sizes) + config.test_size
    table = ResultTable([])
    tag = _EXPERIMENT_TAGS["supervision"]
    mat_features = ("m", "a", "t")
    for ci, (count, frac) in enumerate(zip(config.patient_counts, config.receptive_fractions)):
        for rep in range(config.repetitions):
            seed = mix(mix(mix(config.master_seed, tag), ci), rep)
            cohort = CohortConfig(count, stratified(frac), need, seed)
            splits = incremental_split(generate_dataset(cohort), sizes, config.test_size)
            base_condition = f"patients={count},receptive={_frac_text(frac)}"
            for k, (train, test) in enumerate(splits):
                cell_seed = mix(seed, 1000 + k)
                truth = test.labels()
                pos = _positive_fraction(truth)

                with _quiet_fit():
                    direct = train_direct(
                        train, True, replace(config.forest, seed=mix(cell_seed, 1)),
                        threads=config.threads,
                    )
                    two = train_two_step(
                        train, replace(config.forest, seed=mix(cell_seed, 2)),
                        threads=config.threads,
                    )

                def emit(setup: str, t, p, positive) -> None:
                    table.append(
                        "supervision",
                        f"{base_condition},setup={setup}",
                        sizes[k],
                        rep,
                        macro_f1(t, p),
                        accuracy(t, p),
                        positive,
                    )

                emit("direct", truth, direct.predict_samples(test.rows), pos)
                emit("mat_truth", truth, two.behaviour_model.predict_samples(test.rows), pos)
                for short, label in zip(mat_features, MAT_LABELS):
                    dim_truth = test.with_label_kind(label).labels()
                    dim_pred = two.mat_models[label].predict_samples(test.rows)
                    emit(f"mat_pred_{short}", dim_truth, dim_pred, _positive_fraction(dim_truth))
                emit("two_step", truth, two.predict_samples(test.rows), pos)
    return table


def run_experiment(config: ExperimentConfig) -> ResultTable:
    runner = {
        "threshold_sweep": run_threshold_sweep,
        "multi_patient": run_multi_patient,
        "supervision": run_supervision_comparison,
    }[config.experiment]
    return runner(config)


def _mean_series(table: ResultTable, condition: str, sizes: Sequence[int]) -> List[Tuple[float, float]]:
    return [(float(s), table.mean_macro_f1(condition, s)) for s in sizes]


def chart_for(table: ResultTable, config: ExperimentConfig) -> str:
    sizes = config.resolved_train_sizes()
    if config.experiment == "threshold_sweep":
        series = []
        for size in sizes:
            pts = [
                (float(t), table.mean_macro_f1(f"threshold={t}", size)) for t in config.thresholds
            ]
            series.append((f"train size {size}", pts))
        return line_chart(
            series, "Behaviour prediction vs action threshold", "action threshold", "mean macro F1"
        )
    if config.experiment == "multi_patient":
        pairs = list(zip(config.patient_counts, config.receptive_fractions))
        series = []
        for size in sizes:
            pts = [
                (
                    float(n),
                    table.mean_macro_f1(f"patients={n},receptive={_frac_text(f)}", size),
                )
                for n, f in pairs
            ]
            series.append((f"train size {size}", pts))
        return line_chart(
            series, "Behaviour prediction vs cohort size", "patients", "mean macro F1"
        )
    # supervision: one series per setup at the largest cohort condition
    count = config.patient_counts[-1]
    frac = config.receptive_fractions[-1]
    base = f"patients={count},receptive={_frac_text(frac)}"
    setups = ("direct", "mat_truth", "mat_pred_m", "mat_pred_a", "mat_pred_t", "two_step")
    series = []
    for setup in setups:
        series.append((setup, _mean_series(table, f"{base},setup={setup}", sizes)))
    return line_chart(
        series,
        f"Supervision comparison ({count} patients)",
        "training samples per patient",
        "mean macro F1",
    )


def write_outputs(table: ResultTable, config: ExperimentConfig, out_dir: str) -> List[str]:
    """Write results CSV, summary CSV and chart; returns the paths."""
    os.makedirs(out_dir, exist_ok=True)
    stem = config.experiment
    paths = []
    for name, text in (
        (f"{stem}_results.csv", table.to_csv_text()),
        (f"{stem}_summary.csv", table.summary_csv_text()),
        (f"{stem}_plot.svg", chart_for(table, config)),
    ):
        path = os.path.join(out_dir, name)
        with open(path, "w", newline="") as fh:
            fh.write(text)
        paths.append(path)
    return paths
