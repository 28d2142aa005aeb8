"""Datasets, feature encoding, CSV persistence and incremental splits."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .domain import (
    DomainError,
    FeatureSchema,
    FeatureSpec,
    IDENTIFIER,
    NOMINAL,
    ORDINAL,
    PatientProfile,
    SAMPLE_COLUMNS,
    Sample,
    sample_from_record,
    sample_to_record,
    schema_default,
)

LABEL_KINDS = ("behaviour", "motivation", "ability", "trigger")


class DatasetError(ValueError):
    pass


class CsvFormatError(DatasetError):
    pass


@dataclass
class Dataset:
    """Ordered collection of samples plus the schema that describes them.

    `profiles` is an optional sidecar mapping patient_id to the generating
    profile (populated by the simulator, absent after CSV round-trips since
    action thresholds are never written out).
    """

    schema: FeatureSchema
    rows: List[Sample]
    label_kind: str = "behaviour"
    profiles: Optional[Dict[int, PatientProfile]] = field(default=None, repr=False)

    def __post_init__(self) -> None:
        if self.label_kind not in LABEL_KINDS:
            raise DatasetError(f"unknown label_kind {self.label_kind!r}")

    def __len__(self) -> int:
        return len(self.rows)

    def patient_ids(self) -> Tuple[int, ...]:
        return tuple(sorted({s.patient_id for s in self.rows}))

    def labels(self) -> np.ndarray:
        return np.array([_label_of(s, self.label_kind, i) for i, s in enumerate(self.rows)], dtype=np.int64)

    def with_label_kind(self, label_kind: str) -> "Dataset":
        return Dataset(self.schema, self.rows, label_kind, self.profiles)


def _label_of(sample: Sample, label_kind: str, row_index: int) -> int:
    if label_kind == "behaviour":
        return sample.behaviour
    if sample.mat is None:
        raise DatasetError(f"row {row_index}: label {label_kind!r} needs MAT scores but none are present")
    return {
        "motivation": sample.mat.motivation,
        "ability": sample.mat.ability,
        "trigger": sample.mat.trigger,
    }[label_kind]


@dataclass(frozen=True)
class EncodedMatrix:
    feature_names: Tuple[str, ...]
    X: np.ndarray
    y: np.ndarray


class Encoder:
    """Maps samples to fixed-width numeric rows.

    Ordinal features keep their integer value in a single column; nominal
    features expand to one-hot blocks in domain declaration order; the
    identifier feature expands to a one-hot block over the training-time
    patient id vocabulary, with unknown ids encoding to all zeros.
    """

    def __init__(self, specs: Sequence[FeatureSpec], patient_ids: Sequence[int] = ()):
        self.specs = tuple(specs)
        self.patient_ids = tuple(patient_ids)
        self._id_pos = {pid: i for i, pid in enumerate(self.patient_ids)}
        names: List[str] = []
        for spec in self.specs:
            if spec.kind == ORDINAL:
                names.append(spec.name)
            elif spec.kind == NOMINAL:
                names.extend(f"{spec.name}={v}" for v in spec.domain)
            else:
                if spec.kind != IDENTIFIER:
                    raise DatasetError(f"unknown feature kind {spec.kind!r}")
                names.extend(f"{spec.name}={pid}" for pid in self.patient_ids)
        self.feature_names: Tuple[str, ...] = tuple(names)

    @property
    def width(self) -> int:
        return len(self.feature_names)

    def encode_samples(self, samples: Sequence[Sample]) -> np.ndarray:
        n = len(samples)
        X = np.zeros((n, self.width), dtype=np.float64)
        col = 0
        for spec in self.specs:
            values = [s.feature_value(spec.name) for s in samples]
            if spec.kind == ORDINAL:
                for i, v in enumerate(values):
                    if v is None:
                        raise DatasetError(f"row {i}: feature {spec.name!r} is missing")
                    X[i, col] = v
                col += 1
            elif spec.kind == NOMINAL:
                index = {v: j for j, v in enumerate(spec.domain)}
                for i, v in enumerate(values):
                    X[i, col + index[v]] = 1.0
                col += len(spec.domain)
            else:
                for i, v in enumerate(values):
                    pos = self._id_pos.get(v)
                    if pos is not None:  # unknown ids encode as an all-zero block
                        X[i, col + pos] = 1.0
                col += len(self.patient_ids)
        return X

    def encode_sample(self, sample: Sample) -> np.ndarray:
        return self.encode_samples([sample])[0]

    def decode_row(self, row: np.ndarray) -> Dict[str, object]:
        """Inverse of encode for a single row; one-hot blocks must be valid."""
        if row.shape != (self.width,):
            raise DatasetError(f"row has width {row.shape}, encoder expects {self.width}")
        out: Dict[str, object] = {}
        col = 0
        for spec in self.specs:
            if spec.kind == ORDINAL:
                out[spec.name] = int(row[col])
                col += 1
                continue
            domain = spec.domain if spec.kind == NOMINAL else self.patient_ids
            block = row[col : col + len(domain)]
            hot = np.nonzero(block == 1.0)[0]
            if spec.kind == IDENTIFIER and len(hot) == 0:
                out[spec.name] = None  # unknown patient
            elif len(hot) == 1:
                out[spec.name] = domain[hot[0]]
            else:
                raise DatasetError(f"one-hot block for {spec.name!r} is not valid")
            col += len(domain)
        return out


def encode(dataset: Dataset, include_patient_id: bool = False) -> EncodedMatrix:
    """Encode a dataset into a design matrix and label vector."""
    if not dataset.rows:
        raise DatasetError("cannot encode an empty dataset")
    specs = list(dataset.schema.model_features())
    if include_patient_id:
        specs = [s for s in dataset.schema if s.kind == IDENTIFIER] + specs
    encoder = Encoder(specs, dataset.patient_ids() if include_patient_id else ())
    X = encoder.encode_samples(dataset.rows)
    y = dataset.labels()
    return EncodedMatrix(encoder.feature_names, X, y)


def make_encoder(dataset: Dataset, include_patient_id: bool = False) -> Encoder:
    specs = list(dataset.schema.model_features())
    if include_patient_id:
        specs = [s for s in dataset.schema if s.kind == IDENTIFIER] + specs
    return Encoder(specs, dataset.patient_ids() if include_patient_id else ())


def incremental_split(
    dataset: Dataset, train_sizes: Sequence[int], test_size: int
) -> List[Tuple[Dataset, Dataset]]:
    """Nested per-patient prefix train sets sharing one held-out test set.

    For each patient the last `test_size` rows are the test pool and the
    first `train_sizes[k]` rows form the k-th training set, so smaller
    training sets are strict prefixes of larger ones.
    """
    if not train_sizes:
        raise DatasetError("train_sizes must be non-empty")
    if any(t < 1 for t in train_sizes) or test_size < 1:
        raise DatasetError("train_sizes and test_size must be >= 1")
    need = max(train_sizes) + test_size
    by_patient: Dict[int, List[Sample]] = {}
    for s in dataset.rows:
        by_patient.setdefault(s.patient_id, []).append(s)
    for pid, rows in by_patient.items():
        if len(rows) < need:
            raise DatasetError(
                f"patient {pid} has {len(rows)} rows; need {need} "
                f"(max train {max(train_sizes)} + test {test_size})"
            )
    pids = sorted(by_patient)
    test_rows: List[Sample] = []
    for pid in pids:
        test_rows.extend(by_patient[pid][-test_size:])
    test = Dataset(dataset.schema, test_rows, dataset.label_kind, dataset.profiles)
    out: List[Tuple[Dataset, Dataset]] = []
    for size in train_sizes:
        train_rows: List[Sample] = []
        for pid in pids:
            train_rows.extend(by_patient[pid][:size])
        out.append((Dataset(dataset.schema, train_rows, dataset.label_kind, dataset.profiles), test))
    return out


_INT_COLUMNS = {
    "patient_id",
    "age",
    "motivation_at_enrollment",
    "affect",
    "cognitive_load",
    "dose",
    "mat_m",
    "mat_a",
    "mat_t",
    "behaviour",
    "day_index",
}


def write_csv(dataset: Dataset, path: str) -> None:
    """Write rows with the fixed 20-column header; byte-stable output."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SAMPLE_COLUMNS)
        for i, sample in enumerate(dataset.rows):
            if sample.mat is None:
                raise DatasetError(f"row {i}: cannot write a sample without MAT scores")
            record = sample_to_record(sample)
            writer.writerow([record[c] for c in SAMPLE_COLUMNS])


def read_csv(path: str) -> Dataset:
    """Parse a dataset CSV; any malformed value reports its line number."""
    with open(path, "r", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise CsvFormatError(f"{path}: missing header") from None
        if header != list(SAMPLE_COLUMNS):
            raise CsvFormatError(f"{path}: line 1: missing or malformed header")
        rows: List[Sample] = []
        for line_no, raw in enumerate(reader, start=2):
            if len(raw) != len(SAMPLE_COLUMNS):
                raise CsvFormatError(
                    f"{path}: line {line_no}: expected {len(SAMPLE_COLUMNS)} fields, got {len(raw)}"
                )
            record: Dict[str, object] = {}
            for name, value in zip(SAMPLE_COLUMNS, raw):
                if name in _INT_COLUMNS:
                    try:
                        record[name] = int(value)
                    except ValueError:
                        raise CsvFormatError(
                            f"{path}: line {line_no}: column {name!r}: {value!r} is not an integer"
                        ) from None
                else:
                    record[name] = value
            try:
                rows.append(sample_from_record(record))
            except DomainError as exc:
                raise CsvFormatError(f"{path}: line {line_no}: {exc}") from None
    return Dataset(schema=schema_default(), rows=rows)
