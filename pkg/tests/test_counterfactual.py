import itertools

import numpy as np
import pytest

from matcoach.counterfactual import (
    ConstraintError,
    Counterfactual,
    GaParams,
    constraints_for,
    exhaustive_counterfactual,
    generate,
    minimality_key,
    select_minimal,
)
from matcoach.domain import (
    MUTABLE_BCI,
    BciSpec,
    Context,
    MatVector,
    PatientProfile,
    Sample,
    schema_default,
)
from matcoach.simulator import behaviour, compute_mat

SCHEMA = schema_default()
BCI_FEATURES = tuple(s.name for s in SCHEMA.mutable_features(MUTABLE_BCI))


class RuleModel:
    """Transparent stand-in classifier applying the scoring rule directly,
    so search results can be checked against plain enumeration."""

    classes = (0, 1)

    def __init__(self, threshold: int):
        self.threshold = threshold

    def predict_proba_samples(self, samples):
        rows = []
        for s in samples:
            profile = PatientProfile(
                s.patient_id, s.age, s.gender, s.motivation_at_enrollment, self.threshold
            )
            hit = behaviour(compute_mat(profile, s.context, s.bci), self.threshold)
            rows.append([0.0, 1.0] if hit else [1.0, 0.0])
        return np.asarray(rows)


def make_instance(**bci_overrides) -> Sample:
    bci = dict(
        activity_type="walk",
        dose=4,
        delivery_schedule="fixed_evening",
        message_phrasing="neutral",
        message_content="reminder_only",
    )
    bci.update(bci_overrides)
    return Sample(
        patient_id=0,
        age=30,
        gender="female",
        motivation_at_enrollment=2,
        context=Context(2, 0, "stationary", "home", "morning", "mon"),
        bci=BciSpec(**bci),
        mat=None,
        behaviour=0,
        day_index=0,
    )


def brute_force_minimum(model, instance, mutable):
    """Smallest change count over the whole assignment grid, or None."""
    domains = [SCHEMA.get(name).domain for name in mutable]
    base = tuple(instance.feature_value(name) for name in mutable)
    best = None
    for assign in itertools.product(*domains):
        candidate = instance.with_features(dict(zip(mutable, assign)))
        proba = model.predict_proba_samples([candidate])[0]
        if int(np.argmax(proba)) == 1:
            count = sum(1 for a, b in zip(assign, base) if a != b)
            best = count if best is None else min(best, count)
    return best


def ga_params(**overrides):
    base = dict(population_size=30, generations=40, seed=0)
    base.update(overrides)
    return GaParams(**base)


def test_constraints_reject_unknown_and_out_of_domain():
    with pytest.raises(KeyError):
        constraints_for(SCHEMA, ["no_such_feature"], target_class=1)
    with pytest.raises(ConstraintError):
        constraints_for(SCHEMA, ["dose"], target_class=1, restrict={"dose": (0, 9)})
    with pytest.raises(ConstraintError):
        constraints_for(SCHEMA, ["dose"], target_class=1, k_diverse=0)


def test_generate_requires_mutable_features():
    constraints = constraints_for(SCHEMA, [], target_class=1)
    with pytest.raises(ConstraintError):
        generate(RuleModel(10), make_instance(), constraints, ga_params())


def test_target_class_must_be_known_to_the_model():
    constraints = constraints_for(SCHEMA, ["dose"], target_class=7)
    with pytest.raises(ConstraintError):
        generate(RuleModel(10), make_instance(), constraints, ga_params())


def test_population_must_cover_diversity_request():
    constraints = constraints_for(SCHEMA, ["dose"], target_class=1, k_diverse=9)
    with pytest.raises(ConstraintError):
        generate(RuleModel(10), make_instance(), constraints, ga_params(population_size=5))


def test_ga_params_validation():
    with pytest.raises(ConstraintError):
        GaParams(population_size=1)
    with pytest.raises(ConstraintError):
        GaParams(mutation_rate=1.5)
    with pytest.raises(ConstraintError):
        GaParams(elitism=51)
    with pytest.raises(ConstraintError):
        GaParams(sparsity_weight=-0.1)


def test_predicted_positive_instance_short_circuits():
    instance = make_instance(dose=0)  # product 2*4*2 = 16 > 10
    constraints = constraints_for(SCHEMA, list(BCI_FEATURES), target_class=1)
    for result in (
        generate(RuleModel(10), instance, constraints, ga_params())[0],
        exhaustive_counterfactual(RuleModel(10), instance, constraints),
    ):
        assert result.change_count == 0
        assert result.changed == ()
        assert result.instance == instance
        assert result.probability == 1.0


def test_exhaustive_finds_the_first_minimal_change():
    # base MAT is (2, 0, 2): only ability can move the product above 10,
    # and dose 0 is the first flipping value in enumeration order
    instance = make_instance()
    constraints = constraints_for(SCHEMA, list(BCI_FEATURES), target_class=1)
    result = exhaustive_counterfactual(RuleModel(10), instance, constraints)
    assert result is not None
    assert result.changed == ("dose",)
    assert result.change_count == 1
    assert result.instance.bci.dose == 0


def test_exhaustive_change_count_is_the_brute_force_minimum():
    model = RuleModel(10)
    for overrides in (
        {},
        dict(dose=3, message_phrasing="authoritative"),
        dict(activity_type="yoga", delivery_schedule="fixed_morning"),
    ):
        instance = make_instance(**overrides)
        constraints = constraints_for(SCHEMA, list(BCI_FEATURES), target_class=1)
        result = exhaustive_counterfactual(model, instance, constraints)
        expect = brute_force_minimum(model, instance, BCI_FEATURES)
        if expect is None or expect == 0:
            continue
        assert result is not None
        assert result.change_count == expect


def test_unreachable_target_returns_none_everywhere():
    # ceiling under these constraints is M=3, A=4, T=4: product 48
    model = RuleModel(50)
    instance = make_instance()
    constraints = constraints_for(SCHEMA, list(BCI_FEATURES), target_class=1)
    assert exhaustive_counterfactual(model, instance, constraints) is None
    assert generate(model, instance, constraints, ga_params()) == []


def test_grid_cap_refuses_oversized_searches():
    constraints = constraints_for(SCHEMA, list(BCI_FEATURES), target_class=1)
    with pytest.raises(ConstraintError, match="cap"):
        exhaustive_counterfactual(RuleModel(10), make_instance(), constraints, grid_cap=100)


def test_ga_candidates_touch_only_mutable_features():
    instance = make_instance()
    constraints = constraints_for(SCHEMA, list(BCI_FEATURES), target_class=1)
    results = generate(RuleModel(10), instance, constraints, ga_params())
    assert results
    immutable = [s.name for s in SCHEMA.model_features() if s.name not in BCI_FEATURES]
    for cf in results:
        assert set(cf.changed) <= set(BCI_FEATURES)
        for name in immutable:
            assert cf.instance.feature_value(name) == instance.feature_value(name)
        # every listed change is a real difference
        for name in cf.changed:
            assert cf.instance.feature_value(name) != instance.feature_value(name)


def test_ga_results_are_valid_distinct_and_ranked():
    instance = make_instance()
    constraints = constraints_for(SCHEMA, list(BCI_FEATURES), target_class=1, k_diverse=5)
    model = RuleModel(10)
    results = generate(model, instance, constraints, ga_params())
    assert 1 <= len(results) <= 5
    assignments = set()
    for cf in results:
        proba = model.predict_proba_samples([cf.instance])[0]
        assert int(np.argmax(proba)) == 1
        assignments.add(tuple(cf.instance.feature_value(n) for n in BCI_FEATURES))
    assert len(assignments) == len(results)


def test_ga_reaches_the_oracle_minimum_here():
    instance = make_instance()
    constraints = constraints_for(SCHEMA, list(BCI_FEATURES), target_class=1)
    best = select_minimal(generate(RuleModel(10), instance, constraints, ga_params()))
    assert best is not None
    assert best.change_count == 1


def test_generate_is_deterministic_for_a_seed():
    instance = make_instance()
    constraints = constraints_for(SCHEMA, list(BCI_FEATURES), target_class=1)
    first = generate(RuleModel(10), instance, constraints, ga_params(seed=5))
    second = generate(RuleModel(10), instance, constraints, ga_params(seed=5))
    assert [(cf.changed, cf.probability) for cf in first] == [
        (cf.changed, cf.probability) for cf in second
    ]
    assert [cf.instance for cf in first] == [cf.instance for cf in second]


def test_select_minimal_prefers_fewer_changes_then_probability():
    base = make_instance()
    one = Counterfactual(base, base.with_features({"dose": 1}), ("dose",), 1, 0.6)
    two = Counterfactual(
        base,
        base.with_features({"dose": 1, "message_phrasing": "encouraging"}),
        ("dose", "message_phrasing"),
        2,
        0.99,
    )
    assert select_minimal([two, one]) is one
    confident = Counterfactual(base, base.with_features({"dose": 0}), ("dose",), 1, 0.9)
    assert select_minimal([one, confident]) is confident


def test_select_minimal_breaks_full_ties_deterministically():
    base = make_instance()
    by_dose = Counterfactual(base, base.with_features({"dose": 1}), ("dose",), 1, 0.8)
    by_phrasing = Counterfactual(
        base,
        base.with_features({"message_phrasing": "encouraging"}),
        ("message_phrasing",),
        1,
        0.8,
    )
    # equal count and probability: lexicographic feature-name order decides
    assert select_minimal([by_phrasing, by_dose]) is by_dose
    near = Counterfactual(base, base.with_features({"dose": 3}), ("dose",), 1, 0.8)
    far = Counterfactual(base, base.with_features({"dose": 0}), ("dose",), 1, 0.8)
    # same feature set: the smaller ordinal move wins
    assert select_minimal([far, near]) is near
    assert select_minimal([]) is None


def test_minimality_key_orders_consistently():
    base = make_instance()
    small = Counterfactual(base, base.with_features({"dose": 3}), ("dose",), 1, 0.8)
    large = Counterfactual(base, base.with_features({"dose": 0}), ("dose",), 1, 0.8)
    assert minimality_key(small) < minimality_key(large)
    assert sorted([large, small], key=minimality_key)[0] is small
