import pytest

from matcoach.domain import (
    ACTIVITY_TYPES,
    DAYS_OF_WEEK,
    DELIVERY_SCHEDULES,
    GENDERS,
    IDENTIFIER,
    IMMUTABLE,
    LOCATIONS,
    MESSAGE_CONTENTS,
    MESSAGE_PHRASINGS,
    MOTIONS,
    MUTABLE_BCI,
    MUTABLE_MAT,
    NOMINAL,
    ORDINAL,
    SAMPLE_COLUMNS,
    BciSpec,
    Context,
    DomainError,
    MatVector,
    PatientProfile,
    Sample,
    sample_from_record,
    sample_to_record,
    schema_default,
    schema_mat_step,
)


def make_sample(**overrides) -> Sample:
    base = dict(
        patient_id=0,
        age=30,
        gender="female",
        motivation_at_enrollment=2,
        context=Context(2, 2, "stationary", "home", "morning", "mon"),
        bci=BciSpec("walk", 2, "fixed_morning", "neutral", "reminder_only"),
        mat=MatVector(2, 2, 3),
        behaviour=1,
        day_index=0,
    )
    base.update(overrides)
    return Sample(**base)


def test_domain_values_are_pinned():
    assert GENDERS == ("female", "male", "other")
    assert MOTIONS == ("stationary", "walking", "in_vehicle")
    assert LOCATIONS == ("home", "work", "outside")
    assert DAYS_OF_WEEK == ("mon", "tue", "wed", "thu", "fri", "sat", "sun")
    assert ACTIVITY_TYPES == ("walk", "meditation", "yoga", "tai_chi", "positive_thinking")
    assert DELIVERY_SCHEDULES == ("fixed_morning", "fixed_evening", "context_triggered")
    assert MESSAGE_PHRASINGS == ("neutral", "encouraging", "authoritative")
    assert MESSAGE_CONTENTS == ("reminder_only", "motivational_benefit", "ability_planning")


def test_sample_columns_order_is_frozen():
    assert SAMPLE_COLUMNS == (
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


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(age=17),
        dict(age=91),
        dict(gender="unknown"),
        dict(motivation_at_enrollment=5),
        dict(action_threshold=-1),
        dict(action_threshold=65),
    ],
)
def test_profile_rejects_out_of_domain_values(kwargs):
    base = dict(patient_id=0, age=30, gender="male", motivation_at_enrollment=2, action_threshold=10)
    base.update(kwargs)
    with pytest.raises(DomainError):
        PatientProfile(**base)


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(affect=-1),
        dict(affect=5),
        dict(cognitive_load=5),
        dict(motion="running"),
        dict(location="gym"),
        dict(time_of_day="night"),
        dict(day_of_week="monday"),
    ],
)
def test_context_rejects_out_of_domain_values(kwargs):
    base = dict(
        affect=2, cognitive_load=2, motion="walking", location="work", time_of_day="evening", day_of_week="fri"
    )
    base.update(kwargs)
    with pytest.raises(DomainError):
        Context(**base)


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(activity_type="swim"),
        dict(dose=5),
        dict(dose=-1),
        dict(delivery_schedule="hourly"),
        dict(message_phrasing="stern"),
        dict(message_content="joke"),
    ],
)
def test_bci_rejects_out_of_domain_values(kwargs):
    base = dict(
        activity_type="yoga",
        dose=1,
        delivery_schedule="context_triggered",
        message_phrasing="encouraging",
        message_content="ability_planning",
    )
    base.update(kwargs)
    with pytest.raises(DomainError):
        BciSpec(**base)


def test_mat_vector_product_and_bounds():
    assert MatVector(2, 2, 3).product == 12
    assert MatVector(0, 4, 4).product == 0
    assert MatVector(4, 4, 4).product == 64
    with pytest.raises(DomainError):
        MatVector(5, 0, 0)
    with pytest.raises(DomainError):
        MatVector(0, -1, 0)


def test_feature_value_reads_every_column():
    s = make_sample()
    assert s.feature_value("patient_id") == 0
    assert s.feature_value("age") == 30
    assert s.feature_value("affect") == 2
    assert s.feature_value("motion") == "stationary"
    assert s.feature_value("dose") == 2
    assert s.feature_value("message_content") == "reminder_only"
    assert s.feature_value("mat_m") == 2
    assert s.feature_value("mat_t") == 3
    with pytest.raises(KeyError):
        s.feature_value("no_such_feature")


def test_with_features_replaces_across_nested_objects():
    s = make_sample()
    t = s.with_features({"dose": 4, "affect": 0, "mat_a": 1, "location": "work"})
    assert t.bci.dose == 4
    assert t.context.affect == 0
    assert t.mat.ability == 1
    assert t.context.location == "work"
    # untouched fields keep their values, original object unchanged
    assert t.bci.activity_type == "walk"
    assert s.bci.dose == 2
    with pytest.raises(DomainError):
        s.with_features({"dose": 9})


def test_record_round_trip():
    s = make_sample()
    rec = sample_to_record(s)
    assert tuple(rec) == SAMPLE_COLUMNS
    assert sample_from_record(rec) == s


def test_record_without_mat_round_trips_to_none():
    s = make_sample(mat=None)
    rec = sample_to_record(s)
    assert rec["mat_m"] is None
    assert sample_from_record(rec).mat is None


def test_partial_mat_record_is_rejected():
    rec = sample_to_record(make_sample())
    rec["mat_a"] = None
    with pytest.raises(DomainError):
        sample_from_record(rec)


def test_default_schema_layout():
    schema = schema_default()
    assert len(schema) == 15
    assert schema.specs[0].kind == IDENTIFIER
    model = schema.model_features()
    assert len(model) == 14
    assert [s.name for s in schema.mutable_features(MUTABLE_BCI)] == [
        "activity_type",
        "dose",
        "delivery_schedule",
        "message_phrasing",
        "message_content",
    ]
    kinds = {s.name: s.kind for s in model}
    assert kinds["age"] == ORDINAL
    assert kinds["dose"] == ORDINAL
    assert kinds["gender"] == NOMINAL
    assert kinds["activity_type"] == NOMINAL
    # everything outside the intervention surface is immutable
    for spec in model:
        if spec.name not in ("activity_type", "dose", "delivery_schedule", "message_phrasing", "message_content"):
            assert spec.mutability == IMMUTABLE


def test_mat_step_schema_layout():
    schema = schema_mat_step()
    assert schema.names() == ("patient_id", "mat_m", "mat_a", "mat_t")
    for name in ("mat_m", "mat_a", "mat_t"):
        spec = schema.get(name)
        assert spec.kind == ORDINAL
        assert spec.mutability == MUTABLE_MAT
        assert spec.domain == (0, 1, 2, 3, 4)


def test_schema_resolve_preserves_order_and_rejects_unknown():
    schema = schema_default()
    sub = schema.resolve(["dose", "age"])
    assert sub.names() == ("age", "dose")
    with pytest.raises(KeyError):
        schema.resolve(["age", "shoe_size"])
