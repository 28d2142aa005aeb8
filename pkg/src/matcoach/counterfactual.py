"""Feature-controlled counterfactual search.

Given a trained model and an instance, find minimal feature changes that
flip the prediction to a target class, touching only features declared
mutable. The genetic search trades probability of the target class
against sparsity of the change set; the exhaustive search enumerates
change sets by increasing cardinality and is therefore provably minimal,
which makes it the oracle the genetic results are judged against.

A model here is anything with a `classes` sequence and a
`predict_proba_samples(samples) -> (n, K) array` method.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .domain import FeatureSchema, Sample


class ConstraintError(ValueError):
    pass


@dataclass(frozen=True)
class CfConstraints:
    """Which features may change, to what values, and the target class."""

    mutable: Tuple[str, ...]
    domains: Mapping[str, Tuple]
    target_class: int
    k_diverse: int = 5

    def __post_init__(self) -> None:
        if self.k_diverse < 1:
            raise ConstraintError(f"k_diverse={self.k_diverse} must be >= 1")
        for name in self.mutable:
            if name not in self.domains:
                raise ConstraintError(f"mutable feature {name!r} has no declared domain")
            if len(self.domains[name]) < 1:
                raise ConstraintError(f"feature {name!r} has an empty domain")


def constraints_for(
    schema: FeatureSchema,
    mutable: Sequence[str],
    target_class: int,
    k_diverse: int = 5,
    restrict: Optional[Mapping[str, Sequence]] = None,
) -> CfConstraints:
    """Build constraints from a schema, optionally restricting domains."""
    restrict = restrict or {}
    domains: Dict[str, Tuple] = {}
    for name in mutable:
        spec = schema.get(name)
        allowed = tuple(restrict.get(name, spec.domain))
        for v in allowed:
            if v not in spec.domain:
                raise ConstraintError(f"value {v!r} outside the domain of feature {name!r}")
        domains[name] = allowed
    return CfConstraints(tuple(mutable), domains, target_class, k_diverse)


@dataclass(frozen=True)
class Counterfactual:
    original: Sample
    instance: Sample
    changed: Tuple[str, ...]
    change_count: int
    probability: float

    def changed_values(self) -> Dict[str, Tuple[object, object]]:
        return {
            name: (self.original.feature_value(name), self.instance.feature_value(name))
            for name in self.changed
        }


@dataclass(frozen=True)
class GaParams:
    population_size: int = 50
    generations: int = 100
    mutation_rate: float = 0.3
    crossover_rate: float = 0.5
    elitism: int = 2
    sparsity_weight: float = 0.1
    seed: int = 0

    def __post_init__(self) -> None:
        if self.population_size < 2:
            raise ConstraintError(f"population_size={self.population_size} must be >= 2")
        if self.generations < 1:
            raise ConstraintError(f"generations={self.generations} must be >= 1")
        for name in ("mutation_rate", "crossover_rate"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ConstraintError(f"{name}={v} outside [0, 1]")
        if not 0 <= self.elitism <= self.population_size:
            raise ConstraintError(f"elitism={self.elitism} outside [0, population_size]")
        if self.sparsity_weight < 0.0:
            raise ConstraintError(f"sparsity_weight={self.sparsity_weight} must be >= 0")
        if self.seed < 0:
            raise ConstraintError(f"seed={self.seed} must be >= 0")


def _target_index(model, target_class: int) -> int:
    classes = list(model.classes)
    if target_class not in classes:
        raise ConstraintError(f"target class {target_class} not among model classes {classes}")
    return classes.index(target_class)


def _predict_one(model, sample: Sample, target_idx: int) -> Tuple[float, bool]:
    proba = np.asarray(model.predict_proba_samples([sample]))[0]
    return float(proba[target_idx]), int(np.argmax(proba)) == target_idx


class _Evaluator:
    """Caches model probabilities per assignment tuple."""

    def __init__(self, model, instance: Sample, mutable: Tuple[str, ...], target_idx: int):
        self.model = model
        self.instance = instance
        self.mutable = mutable
        self.target_idx = target_idx
        self.cache: Dict[Tuple, Tuple[float, bool]] = {}

    def realize(self, assign: Tuple) -> Sample:
        return self.instance.with_features(dict(zip(self.mutable, assign)))

    def evaluate(self, assigns: Sequence[Tuple]) -> None:
        fresh = []
        seen = set()
        for a in assigns:
            if a not in self.cache and a not in seen:
                seen.add(a)
                fresh.append(a)
        if not fresh:
            return
        samples = [self.realize(a) for a in fresh]
        proba = np.asarray(self.model.predict_proba_samples(samples))
        hits = np.argmax(proba, axis=1) == self.target_idx
        for a, p, ok in zip(fresh, proba[:, self.target_idx], hits):
            self.cache[a] = (float(p), bool(ok))


def generate(model, instance: Sample, constraints: CfConstraints, params: GaParams) -> List[Counterfactual]:
    """Genetic search; returns up to k_diverse counterfactuals with
    pairwise-distinct change assignments, best fitness first. Empty list
    when no valid candidate is found."""
    mutable = constraints.mutable
    if not mutable:
        raise ConstraintError("no mutable features declared")
    if params.population_size < constraints.k_diverse:
        raise ConstraintError(
            f"population_size={params.population_size} < k_diverse={constraints.k_diverse}"
        )
    target_idx = _target_index(model, constraints.target_class)

    base = tuple(instance.feature_value(name) for name in mutable)
    p0, ok0 = _predict_one(model, instance, target_idx)
    if ok0:
        return [Counterfactual(instance, instance, (), 0, p0)]

    domains = [tuple(constraints.domains[name]) for name in mutable]
    n_feat = len(mutable)
    stream = np.random.Generator(np.random.PCG64(params.seed))

    def mutate(assign: Tuple) -> Tuple:
        out = list(assign)
        for i in range(n_feat):
            if stream.random() < params.mutation_rate:
                out[i] = domains[i][int(stream.integers(len(domains[i])))]
        return tuple(out)

    def force_change(assign: Tuple) -> Tuple:
        i = int(stream.integers(n_feat))
        options = [v for v in domains[i] if v != base[i]]
        if not options:
            return assign
        out = list(assign)
        out[i] = options[int(stream.integers(len(options)))]
        return tuple(out)

    # Start from the identity's immediate neighbourhood: every single-change
    # assignment (or a seeded sample when they outnumber the population).
    # Sparse flips sit on this ring, and crossover between ring members
    # covers the two-change ring early.
    singles: List[Tuple] = []
    for i in range(n_feat):
        for value in domains[i]:
            if value != base[i]:
                out = list(base)
                out[i] = value
                singles.append(tuple(out))
    population: List[Tuple] = [base]
    if len(singles) <= params.population_size - 1:
        population.extend(singles)
    else:
        keep = sorted(stream.permutation(len(singles))[: params.population_size - 1].tolist())
        population.extend(singles[j] for j in keep)
    while len(population) < params.population_size:
        child = mutate(base)
        if child == base:
            child = force_change(child)
        population.append(child)

    evaluator = _Evaluator(model, instance, mutable, target_idx)
    archive: Dict[Tuple, float] = {}

    def changes(assign: Tuple) -> int:
        return sum(1 for a, b in zip(assign, base) if a != b)

    def fitness(assign: Tuple) -> float:
        p, _ = evaluator.cache[assign]
        return p - params.sparsity_weight * changes(assign) / n_feat

    for generation in range(params.generations):
        evaluator.evaluate(population)
        for assign in population:
            p, ok = evaluator.cache[assign]
            if ok and changes(assign) > 0:
                archive[assign] = p
        if generation == params.generations - 1:
            break

        ranked = sorted(population, key=lambda a: (-fitness(a), changes(a), a))
        rank_of = {}
        for pos, a in enumerate(ranked):
            rank_of.setdefault(a, pos)

        def pick_parent() -> Tuple:
            a = population[int(stream.integers(len(population)))]
            b = population[int(stream.integers(len(population)))]
            return a if rank_of[a] <= rank_of[b] else b

        next_pop: List[Tuple] = list(ranked[: params.elitism])
        while len(next_pop) < params.population_size:
            p1, p2 = pick_parent(), pick_parent()
            child = tuple(
                p2[i] if stream.random() < params.crossover_rate else p1[i] for i in range(n_feat)
            )
            next_pop.append(mutate(child))
        population = next_pop

    def sort_key(item: Tuple[Tuple, float]):
        assign, p = item
        return (-(p - params.sparsity_weight * changes(assign) / n_feat), changes(assign), assign)

    ranked_out = sorted(archive.items(), key=sort_key)
    kept = ranked_out[: constraints.k_diverse]
    if len(ranked_out) > len(kept):
        # Fitness favours probability over sparsity, so a fitness-only cut can
        # drop every fewest-change candidate from the returned list.  Reserve
        # the sparsest archived candidate a slot; the list stays fitness-sorted.
        sparsest = min(archive.items(), key=lambda it: (changes(it[0]), -it[1], it[0]))
        if sparsest not in kept:
            kept[-1] = sparsest
            kept.sort(key=sort_key)
    out: List[Counterfactual] = []
    for assign, p in kept:
        changed = tuple(name for name, a, b in zip(mutable, assign, base) if a != b)
        out.append(Counterfactual(instance, evaluator.realize(assign), changed, len(changed), p))
    return out


def minimality_key(cf: Counterfactual):
    """Sort key: fewest changes, then highest target probability, then
    lexicographic changed-name tuple, then smallest encoded value delta."""
    delta = 0.0
    for name, (old, new) in cf.changed_values().items():
        if isinstance(old, int) and isinstance(new, int):
            delta += abs(new - old)
        else:
            delta += 2.0  # one-hot distance between two distinct values
    return (cf.change_count, -cf.probability, tuple(sorted(cf.changed)), delta)


def select_minimal(candidates: Sequence[Counterfactual]) -> Optional[Counterfactual]:
    """Deterministic pick of the minimal candidate; None on an empty list."""
    if not candidates:
        return None
    return min(candidates, key=minimality_key)


def exhaustive_counterfactual(
    model,
    instance: Sample,
    constraints: CfConstraints,
    max_changes: Optional[int] = None,
    grid_cap: int = 1_000_000,
    batch: int = 256,
) -> Optional[Counterfactual]:
    """First valid candidate in increasing-cardinality enumeration order;
    its change count is the provably minimal one. None if the whole grid
    fails. Refuses grids larger than `grid_cap` combinations."""
    mutable = constraints.mutable
    if not mutable:
        raise ConstraintError("no mutable features declared")
    grid = 1
    for name in mutable:
        grid *= max(1, len(constraints.domains[name]))
        if grid > grid_cap:
            raise ConstraintError(f"search grid exceeds cap of {grid_cap} combinations")
    target_idx = _target_index(model, constraints.target_class)

    base = tuple(instance.feature_value(name) for name in mutable)
    p0, ok0 = _predict_one(model, instance, target_idx)
    if ok0:
        return Counterfactual(instance, instance, (), 0, p0)

    pos = {name: i for i, name in enumerate(mutable)}
    if max_changes is None:
        max_changes = len(mutable)

    evaluator = _Evaluator(model, instance, mutable, target_idx)

    def flush(pending: List[Tuple]) -> Optional[Counterfactual]:
        evaluator.evaluate(pending)
        for assign in pending:
            p, ok = evaluator.cache[assign]
            if ok:
                changed = tuple(name for name, a, b in zip(mutable, assign, base) if a != b)
                return Counterfactual(instance, evaluator.realize(assign), changed, len(changed), p)
        return None

    for cardinality in range(1, max_changes + 1):
        pending: List[Tuple] = []
        for combo in itertools.combinations(mutable, cardinality):
            options = [[v for v in constraints.domains[f] if v != base[pos[f]]] for f in combo]
            for values in itertools.product(*options):
                assign = list(base)
                for f, v in zip(combo, values):
                    assign[pos[f]] = v
                pending.append(tuple(assign))
                if len(pending) >= batch:
                    found = flush(pending)
                    if found is not None:
                        return found
                    pending = []
        found = flush(pending)
        if found is not None:
            return found
    return None
