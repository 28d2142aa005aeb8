"""Shared domain vocabulary: patients, contexts, interventions, MAT scores.

All values are small discrete domains so the whole feature space stays
enumerable; every type validates on construction and is immutable.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Optional, Sequence

GENDERS = ("female", "male", "other")
MOTIONS = ("stationary", "walking", "in_vehicle")
LOCATIONS = ("home", "work", "outside")
TIMES_OF_DAY = ("morning", "afternoon", "evening")
DAYS_OF_WEEK = ("mon", "tue", "wed", "thu", "fri", "sat", "sun")
ACTIVITY_TYPES = ("walk", "meditation", "yoga", "tai_chi", "positive_thinking")
DELIVERY_SCHEDULES = ("fixed_morning", "fixed_evening", "context_triggered")
MESSAGE_PHRASINGS = ("neutral", "encouraging", "authoritative")
MESSAGE_CONTENTS = ("reminder_only", "motivational_benefit", "ability_planning")

SCORE_RANGE = tuple(range(5))  # motivation/ability/trigger and their inputs
AGE_RANGE = tuple(range(18, 91))
THRESHOLD_MIN, THRESHOLD_MAX = 0, 64


class DomainError(ValueError):
    """A field value outside its declared domain."""


def _check_int(name: str, value: object, lo: int, hi: int) -> int:
    if not isinstance(value, int) or isinstance(value, bool):
        raise DomainError(f"{name} must be an integer, got {value!r}")
    if not lo <= value <= hi:
        raise DomainError(f"{name}={value} outside [{lo}, {hi}]")
    return value


def _check_enum(name: str, value: object, domain: Sequence[str]) -> str:
    if value not in domain:
        raise DomainError(f"{name}={value!r} not in {domain}")
    return value  # type: ignore[return-value]


@dataclass(frozen=True)
class PatientProfile:
    """Fixed patient characteristics plus the private action threshold.

    The threshold encodes general receptivity and is never a model feature.
    """

    patient_id: int
    age: int
    gender: str
    motivation_at_enrollment: int
    action_threshold: int

    def __post_init__(self) -> None:
        _check_int("patient_id", self.patient_id, 0, 2**63 - 1)
        _check_int("age", self.age, AGE_RANGE[0], AGE_RANGE[-1])
        _check_enum("gender", self.gender, GENDERS)
        _check_int("motivation_at_enrollment", self.motivation_at_enrollment, 0, 4)
        _check_int("action_threshold", self.action_threshold, THRESHOLD_MIN, THRESHOLD_MAX)


@dataclass(frozen=True)
class Context:
    """Momentary state: internal (affect, cognitive load) and external."""

    affect: int
    cognitive_load: int
    motion: str
    location: str
    time_of_day: str
    day_of_week: str

    def __post_init__(self) -> None:
        _check_int("affect", self.affect, 0, 4)
        _check_int("cognitive_load", self.cognitive_load, 0, 4)
        _check_enum("motion", self.motion, MOTIONS)
        _check_enum("location", self.location, LOCATIONS)
        _check_enum("time_of_day", self.time_of_day, TIMES_OF_DAY)
        _check_enum("day_of_week", self.day_of_week, DAYS_OF_WEEK)


@dataclass(frozen=True)
class BciSpec:
    """Intervention properties; the mutable surface for personalisation."""

    activity_type: str
    dose: int
    delivery_schedule: str
    message_phrasing: str
    message_content: str

    def __post_init__(self) -> None:
        _check_enum("activity_type", self.activity_type, ACTIVITY_TYPES)
        _check_int("dose", self.dose, 0, 4)
        _check_enum("delivery_schedule", self.delivery_schedule, DELIVERY_SCHEDULES)
        _check_enum("message_phrasing", self.message_phrasing, MESSAGE_PHRASINGS)
        _check_enum("message_content", self.message_content, MESSAGE_CONTENTS)


@dataclass(frozen=True)
class MatVector:
    """Motivation / ability / trigger scores, each an integer in 0..4."""

    motivation: int
    ability: int
    trigger: int

    def __post_init__(self) -> None:
        _check_int("motivation", self.motivation, 0, 4)
        _check_int("ability", self.ability, 0, 4)
        _check_int("trigger", self.trigger, 0, 4)

    @property
    def product(self) -> int:
        return self.motivation * self.ability * self.trigger


@dataclass(frozen=True)
class Sample:
    """One (patient, context, intervention) instance with its outcome.

    Carries the observable profile fields; the action threshold stays with
    the simulator. ``mat`` is ground truth where the simulator produced the
    row, or a model's intermediate prediction in the two-step pipeline.
    """

    patient_id: int
    age: int
    gender: str
    motivation_at_enrollment: int
    context: Context
    bci: BciSpec
    mat: Optional[MatVector]
    behaviour: int
    day_index: int

    def __post_init__(self) -> None:
        _check_int("patient_id", self.patient_id, 0, 2**63 - 1)
        _check_int("age", self.age, AGE_RANGE[0], AGE_RANGE[-1])
        _check_enum("gender", self.gender, GENDERS)
        _check_int("motivation_at_enrollment", self.motivation_at_enrollment, 0, 4)
        _check_int("behaviour", self.behaviour, 0, 1)
        _check_int("day_index", self.day_index, 0, 2**63 - 1)

    def feature_value(self, name: str):
        try:
            getter = _FEATURE_GETTERS[name]
        except KeyError:
            raise KeyError(f"unknown feature {name!r}") from None
        return getter(self)

    def with_features(self, changes: dict) -> "Sample":
        """New Sample with the named features replaced; unknown names raise."""
        record = sample_to_record(self)
        for name, value in changes.items():
            if name not in record:
                raise KeyError(f"unknown feature {name!r}")
            record[name] = value
        record["behaviour"] = self.behaviour
        record["day_index"] = self.day_index
        return sample_from_record(record)


_FEATURE_GETTERS = {
    "patient_id": lambda s: s.patient_id,
    "age": lambda s: s.age,
    "gender": lambda s: s.gender,
    "motivation_at_enrollment": lambda s: s.motivation_at_enrollment,
    "affect": lambda s: s.context.affect,
    "cognitive_load": lambda s: s.context.cognitive_load,
    "motion": lambda s: s.context.motion,
    "location": lambda s: s.context.location,
    "time_of_day": lambda s: s.context.time_of_day,
    "day_of_week": lambda s: s.context.day_of_week,
    "activity_type": lambda s: s.bci.activity_type,
    "dose": lambda s: s.bci.dose,
    "delivery_schedule": lambda s: s.bci.delivery_schedule,
    "message_phrasing": lambda s: s.bci.message_phrasing,
    "message_content": lambda s: s.bci.message_content,
    "mat_m": lambda s: None if s.mat is None else s.mat.motivation,
    "mat_a": lambda s: None if s.mat is None else s.mat.ability,
    "mat_t": lambda s: None if s.mat is None else s.mat.trigger,
}

# Bit-exact CSV column order; also the canonical feature order everywhere.
SAMPLE_COLUMNS = (
    "patient_id",
    "age",
    "gender",
    "motivation_at_enrollment",
    "affect",
    "cognitive_load",
    "motion",
    "location",
    "time_of_day",
    "day_of_week",
    "activity_type",
    "dose",
    "delivery_schedule",
    "message_phrasing",
    "message_content",
    "mat_m",
    "mat_a",
    "mat_t",
    "behaviour",
    "day_index",
)


def sample_to_record(sample: Sample) -> dict:
    """Flat column -> value mapping in SAMPLE_COLUMNS order."""
    return {name: sample.feature_value(name) for name in SAMPLE_COLUMNS[:18]} | {
        "behaviour": sample.behaviour,
        "day_index": sample.day_index,
    }


def sample_from_record(record: dict) -> Sample:
    """Build a Sample from a flat mapping; mat columns may be None."""
    mat_parts = [record.get(k) for k in ("mat_m", "mat_a", "mat_t")]
    if all(v is None for v in mat_parts):
        mat = None
    elif any(v is None for v in mat_parts):
        raise DomainError("mat_m/mat_a/mat_t must be all present or all absent")
    else:
        mat = MatVector(*mat_parts)
    return Sample(
        patient_id=record["patient_id"],
        age=record["age"],
        gender=record["gender"],
        motivation_at_enrollment=record["motivation_at_enrollment"],
        context=Context(
            affect=record["affect"],
            cognitive_load=record["cognitive_load"],
            motion=record["motion"],
            location=record["location"],
            time_of_day=record["time_of_day"],
            day_of_week=record["day_of_week"],
        ),
        bci=BciSpec(
            activity_type=record["activity_type"],
            dose=record["dose"],
            delivery_schedule=record["delivery_schedule"],
            message_phrasing=record["message_phrasing"],
            message_content=record["message_content"],
        ),
        mat=mat,
        behaviour=record.get("behaviour", 0),
        day_index=record.get("day_index", 0),
    )


ORDINAL, NOMINAL, IDENTIFIER = "ordinal", "nominal", "identifier"
IMMUTABLE, MUTABLE_BCI, MUTABLE_MAT = "immutable", "mutable_bci", "mutable_mat"


@dataclass(frozen=True)
class FeatureSpec:
    name: str
    kind: str
    domain: tuple
    mutability: str


@dataclass(frozen=True)
class FeatureSchema:
    """Ordered feature descriptors; the order is fixed across encoding,
    training, counterfactual search and persistence."""

    specs: tuple[FeatureSpec, ...]

    def __iter__(self) -> Iterator[FeatureSpec]:
        return iter(self.specs)

    def __len__(self) -> int:
        return len(self.specs)

    def names(self) -> tuple[str, ...]:
        return tuple(s.name for s in self.specs)

    def get(self, name: str) -> FeatureSpec:
        for spec in self.specs:
            if spec.name == name:
                return spec
        raise KeyError(f"no feature named {name!r}")

    def resolve(self, names: Sequence[str]) -> "FeatureSchema":
        """Sub-schema for the given names, preserving this schema's order."""
        wanted = set(names)
        unknown = wanted - set(self.names())
        if unknown:
            raise KeyError(f"unknown features {sorted(unknown)}")
        return FeatureSchema(tuple(s for s in self.specs if s.name in wanted))

    def model_features(self) -> tuple[FeatureSpec, ...]:
        """Non-identifier descriptors (the learnable features)."""
        return tuple(s for s in self.specs if s.kind != IDENTIFIER)

    def mutable_features(self, mutability: str) -> tuple[FeatureSpec, ...]:
        return tuple(s for s in self.specs if s.mutability == mutability)


def schema_default() -> FeatureSchema:
    """Canonical schema: patient_id as identifier plus the 14 model features.

    action_threshold is deliberately absent; it is simulator-private and
    never observable by a model.
    """
    return FeatureSchema(
        (
            FeatureSpec("patient_id", IDENTIFIER, (), IMMUTABLE),
            FeatureSpec("age", ORDINAL, AGE_RANGE, IMMUTABLE),
            FeatureSpec("gender", NOMINAL, GENDERS, IMMUTABLE),
            FeatureSpec("motivation_at_enrollment", ORDINAL, SCORE_RANGE, IMMUTABLE),
            FeatureSpec("affect", ORDINAL, SCORE_RANGE, IMMUTABLE),
            FeatureSpec("cognitive_load", ORDINAL, SCORE_RANGE, IMMUTABLE),
            FeatureSpec("motion", NOMINAL, MOTIONS, IMMUTABLE),
            FeatureSpec("location", NOMINAL, LOCATIONS, IMMUTABLE),
            FeatureSpec("time_of_day", NOMINAL, TIMES_OF_DAY, IMMUTABLE),
            FeatureSpec("day_of_week", NOMINAL, DAYS_OF_WEEK, IMMUTABLE),
            FeatureSpec("activity_type", NOMINAL, ACTIVITY_TYPES, MUTABLE_BCI),
            FeatureSpec("dose", ORDINAL, SCORE_RANGE, MUTABLE_BCI),
            FeatureSpec("delivery_schedule", NOMINAL, DELIVERY_SCHEDULES, MUTABLE_BCI),
            FeatureSpec("message_phrasing", NOMINAL, MESSAGE_PHRASINGS, MUTABLE_BCI),
            FeatureSpec("message_content", NOMINAL, MESSAGE_CONTENTS, MUTABLE_BCI),
        )
    )


def schema_mat_step() -> FeatureSchema:
    """Schema for the second stage of the two-step model: MAT scores are the
    mutable surface and the patient identifier rides along."""
    return FeatureSchema(
        (
            FeatureSpec("patient_id", IDENTIFIER, (), IMMUTABLE),
            FeatureSpec("mat_m", ORDINAL, SCORE_RANGE, MUTABLE_MAT),
            FeatureSpec("mat_a", ORDINAL, SCORE_RANGE, MUTABLE_MAT),
            FeatureSpec("mat_t", ORDINAL, SCORE_RANGE, MUTABLE_MAT),
        )
    )
