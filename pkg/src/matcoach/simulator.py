"""Synthetic patient simulation under a multiplicative behaviour rule.

A patient performs the target behaviour exactly when
``motivation * ability * trigger > action_threshold`` (strict). MAT scores
are a deterministic function of the observable features; the action
threshold is per-patient and never observable. Note the strictness: with a
threshold of 0 a zero product still yields no behaviour.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import rng
from .dataset import Dataset
from .domain import (
    ACTIVITY_TYPES,
    DELIVERY_SCHEDULES,
    DomainError,
    GENDERS,
    LOCATIONS,
    MESSAGE_CONTENTS,
    MESSAGE_PHRASINGS,
    MOTIONS,
    BciSpec,
    Context,
    DAYS_OF_WEEK,
    MatVector,
    PatientProfile,
    Sample,
    THRESHOLD_MAX,
    THRESHOLD_MIN,
    TIMES_OF_DAY,
    schema_default,
)

FIXED, UNIFORM_RANDOM, STRATIFIED = "fixed", "uniform_random", "stratified"


@dataclass(frozen=True)
class ThresholdPolicy:
    """How per-patient action thresholds are assigned."""

    kind: str
    value: Optional[int] = None
    fraction_below_40: Optional[float] = None

    def __post_init__(self) -> None:
        if self.kind == FIXED:
            if self.value is None or not THRESHOLD_MIN <= self.value <= THRESHOLD_MAX:
                raise DomainError(f"fixed threshold value={self.value!r} outside [0, 64]")
        elif self.kind == UNIFORM_RANDOM:
            pass
        elif self.kind == STRATIFIED:
            f = self.fraction_below_40
            if f is None or not 0.0 <= f <= 1.0:
                raise DomainError(f"fraction_below_40={f!r} outside [0, 1]")
        else:
            raise DomainError(f"unknown threshold policy kind {self.kind!r}")


def fixed(value: int) -> ThresholdPolicy:
    return ThresholdPolicy(FIXED, value=value)


def uniform_random() -> ThresholdPolicy:
    return ThresholdPolicy(UNIFORM_RANDOM)


def stratified(fraction_below_40: float) -> ThresholdPolicy:
    return ThresholdPolicy(STRATIFIED, fraction_below_40=fraction_below_40)


@dataclass(frozen=True)
class CohortConfig:
    n_patients: int
    threshold_policy: ThresholdPolicy
    samples_per_patient: int
    seed: int

    def __post_init__(self) -> None:
        if self.n_patients < 1:
            raise DomainError(f"n_patients={self.n_patients} must be >= 1")
        if self.samples_per_patient < 1:
            raise DomainError(f"samples_per_patient={self.samples_per_patient} must be >= 1")


def _clamp(x: int) -> int:
    return min(4, max(0, x))


_AWAY_ACTIVITIES = ("yoga", "tai_chi", "meditation")


def compute_mat(profile: PatientProfile, context: Context, bci: BciSpec) -> MatVector:
    """Deterministic MAT scores from observable features.

    Motivation is intrinsic (enrollment motivation, affect) plus a boost
    from benefit-highlighting messages; ability falls with dose and
    cognitive load and rises with planning support; trigger follows the
    delivery channel and momentary external context. Independent of the
    action threshold and of patient identity by construction.
    """
    affect_shift = 1 if context.affect >= 3 else (-1 if context.affect <= 1 else 0)
    m = _clamp(
        profile.motivation_at_enrollment
        + affect_shift
        + (1 if bci.message_content == "motivational_benefit" else 0)
    )

    a = _clamp(
        4
        - bci.dose
        + (1 if bci.message_content == "ability_planning" else 0)
        - (1 if context.cognitive_load >= 3 else 0)
        - (1 if bci.activity_type in _AWAY_ACTIVITIES and context.location != "home" else 0)
    )

    schedule_match = (
        bci.delivery_schedule == "fixed_morning" and context.time_of_day == "morning"
    ) or (bci.delivery_schedule == "fixed_evening" and context.time_of_day == "evening")
    t = _clamp(
        2
        + (1 if bci.delivery_schedule == "context_triggered" else 0)
        + (1 if schedule_match else 0)
        + (1 if bci.message_phrasing == "encouraging" else 0)
        - (1 if context.motion == "in_vehicle" else 0)
    )
    return MatVector(m, a, t)


def behaviour(mat: MatVector, action_threshold: int) -> int:
    """1 iff the MAT product strictly exceeds the threshold."""
    if not THRESHOLD_MIN <= action_threshold <= THRESHOLD_MAX:
        raise DomainError(f"action_threshold={action_threshold} outside [0, 64]")
    return 1 if mat.product > action_threshold else 0


def patient_stream(config: CohortConfig, index: int) -> np.random.Generator:
    """Per-patient RNG stream; independent of generation order."""
    return rng.generator(rng.mix(config.seed, index))


def _n_below(config: CohortConfig) -> int:
    frac = config.threshold_policy.fraction_below_40 or 0.0
    return int(np.floor(frac * config.n_patients + 0.5))


def sample_patient(
    config: CohortConfig, index: int, stream: Optional[np.random.Generator] = None
) -> PatientProfile:
    """Draw one patient profile; deterministic given (config.seed, index)."""
    if index >= config.n_patients:
        raise DomainError(f"patient index {index} >= n_patients {config.n_patients}")
    if stream is None:
        stream = patient_stream(config, index)
    age = int(stream.integers(18, 91))
    gender = GENDERS[int(stream.integers(0, len(GENDERS)))]
    m_enroll = int(stream.integers(0, 5))

    policy = config.threshold_policy
    if policy.kind == FIXED:
        threshold = int(policy.value)  # type: ignore[arg-type]
    elif policy.kind == UNIFORM_RANDOM:
        threshold = int(stream.integers(0, 65))
    else:  # stratified: first n_below patient indices are the receptive ones
        if index < _n_below(config):
            threshold = int(stream.integers(0, 40))
        else:
            threshold = int(stream.integers(40, 65))
    return PatientProfile(index, age, gender, m_enroll, threshold)


def _patient_samples(config: CohortConfig, profile: PatientProfile, stream) -> list[Sample]:
    n = config.samples_per_patient
    # Field draw order is pinned (context then intervention, schema order);
    # changing it changes every downstream byte.
    affect = stream.integers(0, 5, size=n)
    load = stream.integers(0, 5, size=n)
    motion = stream.integers(0, len(MOTIONS), size=n)
    location = stream.integers(0, len(LOCATIONS), size=n)
    time_of_day = stream.integers(0, len(TIMES_OF_DAY), size=n)
    day = stream.integers(0, len(DAYS_OF_WEEK), size=n)
    activity = stream.integers(0, len(ACTIVITY_TYPES), size=n)
    dose = stream.integers(0, 5, size=n)
    schedule = stream.integers(0, len(DELIVERY_SCHEDULES), size=n)
    phrasing = stream.integers(0, len(MESSAGE_PHRASINGS), size=n)
    content = stream.integers(0, len(MESSAGE_CONTENTS), size=n)

    samples = []
    for day_index in range(n):
        context = Context(
            affect=int(affect[day_index]),
            cognitive_load=int(load[day_index]),
            motion=MOTIONS[motion[day_index]],
            location=LOCATIONS[location[day_index]],
            time_of_day=TIMES_OF_DAY[time_of_day[day_index]],
            day_of_week=DAYS_OF_WEEK[day[day_index]],
        )
        bci = BciSpec(
            activity_type=ACTIVITY_TYPES[activity[day_index]],
            dose=int(dose[day_index]),
            delivery_schedule=DELIVERY_SCHEDULES[schedule[day_index]],
            message_phrasing=MESSAGE_PHRASINGS[phrasing[day_index]],
            message_content=MESSAGE_CONTENTS[content[day_index]],
        )
        mat = compute_mat(profile, context, bci)
        samples.append(
            Sample(
                patient_id=profile.patient_id,
                age=profile.age,
                gender=profile.gender,
                motivation_at_enrollment=profile.motivation_at_enrollment,
                context=context,
                bci=bci,
                mat=mat,
                behaviour=behaviour(mat, profile.action_threshold),
                day_index=day_index,
            )
        )
    return samples


def generate_dataset(config: CohortConfig) -> Dataset:
    """Labeled cohort dataset: one row per (patient, day), deterministic.

    Contexts and interventions are i.i.d. uniform; each patient consumes
    its own derived stream, so output is identical however patients are
    scheduled.
    """
    rows: list[Sample] = []
    profiles: dict[int, PatientProfile] = {}
    for index in range(config.n_patients):
        stream = patient_stream(config, index)
        profile = sample_patient(config, index, stream)
        profiles[profile.patient_id] = profile
        rows.extend(_patient_samples(config, profile, stream))
    return Dataset(schema=schema_default(), rows=rows, label_kind="behaviour", profiles=profiles)
