import json
from fractions import Fraction

import numpy as np
import pytest

from matcoach.dataset import EncodedMatrix
from matcoach.forest import (
    Forest,
    ForestError,
    ForestParams,
    balanced_weights,
    canonical_json,
    fit,
    from_json,
    to_json,
)
from matcoach.forest import backend
from matcoach.forest import _build_py


def matrix_from(X, y):
    X = np.asarray(X, dtype=np.float64)
    names = tuple(f"f{j}" for j in range(X.shape[1]))
    return EncodedMatrix(names, X, np.asarray(y, dtype=np.int64))


def random_matrix(stream, n, d, n_classes, value_range=4):
    X = stream.integers(0, value_range, size=(n, d)).astype(np.float64)
    y = stream.integers(0, n_classes, size=n)
    return matrix_from(X, y)


def exhaustive_root_split(X, y, weights):
    """All (feature, midpoint) candidates scored by exact weighted Gini.

    Returns every exactly co-optimal pair; float rounding in the trainer
    may break a mathematical tie either way, and any member is a correct
    choice. Empty when no feature has two distinct values.
    """
    n, d = X.shape
    w = [Fraction(weights[c]).limit_denominator(10**9) for c in y]
    total = sum(w)
    best = []
    best_gini = None
    for feature in range(d):
        values = sorted(set(X[:, feature]))
        for lo, hi in zip(values, values[1:]):
            threshold = 0.5 * (lo + hi)
            left = [i for i in range(n) if X[i, feature] <= threshold]
            right = [i for i in range(n) if X[i, feature] > threshold]
            gini = Fraction(0)
            for side in (left, right):
                side_w = sum(w[i] for i in side)
                if side_w == 0:
                    continue
                sq = Fraction(0)
                for c in set(y[i] for i in side):
                    cw = sum(w[i] for i in side if y[i] == c)
                    sq += (cw / side_w) ** 2
                gini += side_w / total * (1 - sq)
            if best_gini is None or gini < best_gini:
                best_gini = gini
                best = [(feature, threshold)]
            elif gini == best_gini:
                best.append((feature, threshold))
    return best


def test_balanced_weights_match_the_closed_form():
    labels = [0, 1, 1, 1]
    assert balanced_weights(labels) == {0: 4 / (2 * 1), 1: 4 / (2 * 3)}
    labels = [2, 2, 0, 1, 1, 2]
    weights = balanced_weights(labels)
    assert weights == {0: 6 / (3 * 1), 1: 6 / (3 * 2), 2: 6 / (3 * 3)}


def test_forest_params_validation():
    with pytest.raises(ForestError):
        ForestParams(n_trees=0)
    with pytest.raises(ForestError):
        ForestParams(max_features="log2")
    with pytest.raises(ForestError):
        ForestParams(min_samples_split=1)
    with pytest.raises(ForestError):
        ForestParams(max_depth=0)
    with pytest.raises(ForestError):
        ForestParams(class_weighting="quadratic")
    with pytest.raises(ForestError):
        ForestParams(seed=-1)
    assert ForestParams(max_depth=None).max_depth is None


def test_root_split_matches_exhaustive_gini_on_random_data():
    stream = np.random.Generator(np.random.PCG64(77))
    params = ForestParams(n_trees=1, max_features="all", bootstrap=False, seed=0)
    for trial in range(15):
        n = int(stream.integers(4, 13))
        d = int(stream.integers(2, 5))
        matrix = random_matrix(stream, n, d, n_classes=int(stream.integers(2, 4)))
        if len(set(matrix.y.tolist())) < 2:
            continue
        forest = fit(matrix, params)
        tree = forest.trees[0]
        weights = balanced_weights(matrix.y.tolist())
        optima = exhaustive_root_split(matrix.X, matrix.y.tolist(), weights)
        if tree.feature[0] < 0:
            # no candidate improved on a leaf; the oracle must agree that
            # every split leaves at least one side empty
            assert optima == [], f"trial {trial}"
            continue
        assert (tree.feature[0], tree.threshold[0]) in optima, f"trial {trial}"


def test_memorizes_xor():
    X = [[0, 0], [0, 1], [1, 0], [1, 1]]
    y = [0, 1, 1, 0]
    params = ForestParams(n_trees=1, max_features="all", bootstrap=False, max_depth=2, seed=0)
    forest = fit(matrix_from(X, y), params)
    assert forest.trees[0].depth == 2
    assert list(forest.predict(np.asarray(X, dtype=np.float64))) == y


def test_single_tree_memorizes_distinct_rows():
    stream = np.random.Generator(np.random.PCG64(3))
    X = stream.permutation(64).reshape(16, 4).astype(np.float64)
    y = stream.integers(0, 3, size=16)
    params = ForestParams(n_trees=1, max_features="all", bootstrap=False, seed=1)
    forest = fit(matrix_from(X, y), params)
    assert list(forest.predict(X)) == list(y)


def test_predict_proba_rows_sum_to_one():
    stream = np.random.Generator(np.random.PCG64(5))
    matrix = random_matrix(stream, 40, 6, 3)
    forest = fit(matrix, ForestParams(n_trees=20, seed=2))
    proba = forest.predict_proba(matrix.X)
    assert proba.shape == (40, 3)
    assert np.all(np.abs(proba.sum(axis=1) - 1.0) < 1e-9)


def test_declared_classes_fix_the_probability_layout():
    matrix = matrix_from([[0], [1], [2], [3]], [1, 1, 3, 3])
    forest = fit(matrix, ForestParams(n_trees=3, bootstrap=False, seed=0), classes=(0, 1, 2, 3))
    assert forest.classes == (0, 1, 2, 3)
    proba = forest.predict_proba(matrix.X)
    assert proba.shape == (4, 4)
    # absent classes carry zero weight, so no leaf can vote for them
    assert np.all(proba[:, [0, 2]] == 0.0)


def test_fit_rejects_labels_outside_declared_classes():
    matrix = matrix_from([[0], [1]], [0, 5])
    with pytest.raises(ForestError, match=r"\[5\]"):
        fit(matrix, ForestParams(n_trees=1), classes=(0, 1))


def test_single_class_training_yields_certain_predictions():
    matrix = matrix_from([[0, 1], [2, 3], [4, 5]], [1, 1, 1])
    forest = fit(matrix, ForestParams(n_trees=5, seed=0))
    assert forest.classes == (1,)
    assert np.all(forest.predict_proba(matrix.X) == 1.0)


def test_prediction_tie_breaks_to_smallest_class():
    # two one-row trees voting for different classes produce an exact tie
    matrix = matrix_from([[0.0]], [4])
    forest_a = fit(matrix, ForestParams(n_trees=1, bootstrap=False, seed=0), classes=(2, 4))
    tie = Forest(
        params=forest_a.params,
        classes=(2, 4),
        feature_names=forest_a.feature_names,
        trees=(
            forest_a.trees[0]._replace(proba=np.array([[1.0, 0.0]])),
            forest_a.trees[0]._replace(proba=np.array([[0.0, 1.0]])),
        ),
        class_weight=forest_a.class_weight,
    )
    assert list(tie.predict(np.array([[0.0]]))) == [2]


def test_same_seed_same_forest_different_seed_different_forest():
    stream = np.random.Generator(np.random.PCG64(8))
    matrix = random_matrix(stream, 60, 5, 2)
    a = fit(matrix, ForestParams(n_trees=10, seed=4))
    b = fit(matrix, ForestParams(n_trees=10, seed=4))
    c = fit(matrix, ForestParams(n_trees=10, seed=5))
    for ta, tb in zip(a.trees, b.trees):
        assert np.array_equal(ta.feature, tb.feature)
        assert np.array_equal(ta.threshold, tb.threshold)
        assert np.array_equal(ta.proba, tb.proba)
    assert any(
        not np.array_equal(ta.feature, tc.feature) for ta, tc in zip(a.trees, c.trees)
    )


def test_thread_count_does_not_change_the_forest():
    stream = np.random.Generator(np.random.PCG64(9))
    matrix = random_matrix(stream, 80, 6, 3)
    serial = fit(matrix, ForestParams(n_trees=12, seed=6), threads=1)
    parallel = fit(matrix, ForestParams(n_trees=12, seed=6), threads=4)
    for ts, tp in zip(serial.trees, parallel.trees):
        assert ts.feature.tobytes() == tp.feature.tobytes()
        assert ts.threshold.tobytes() == tp.threshold.tobytes()
        assert ts.proba.tobytes() == tp.proba.tobytes()


def test_python_kernel_agrees_with_active_backend():
    if backend.BACKEND == "python":
        pytest.skip("compiled kernel not built; nothing to compare")
    stream = np.random.Generator(np.random.PCG64(10))
    X = stream.integers(0, 5, size=(50, 4)).astype(np.float64)
    y = stream.integers(0, 3, size=50).astype(np.int64)
    codes = np.empty_like(X, dtype=np.int32)
    parts = []
    uoff = np.zeros(5, dtype=np.int64)
    for j in range(4):
        uniq, inv = np.unique(X[:, j], return_inverse=True)
        codes[:, j] = inv.astype(np.int32)
        parts.append(uniq)
        uoff[j + 1] = uoff[j] + len(uniq)
    uvals = np.concatenate(parts)
    weight = np.ones(3, dtype=np.float64)
    for seed in (0, 1, 99):
        args = (codes, uvals, uoff, y, weight, 2, 2, -1, True, seed)
        compiled = backend.build_tree(*args)
        pure = _build_py.build_tree(*args)
        for got, expect in zip(compiled, pure):
            assert np.asarray(got).tobytes() == np.asarray(expect).tobytes()


def test_json_round_trip_preserves_predictions():
    stream = np.random.Generator(np.random.PCG64(11))
    matrix = random_matrix(stream, 50, 5, 3)
    forest = fit(matrix, ForestParams(n_trees=8, seed=7))
    restored = from_json(to_json(forest))
    assert restored.classes == forest.classes
    assert restored.feature_names == forest.feature_names
    assert restored.params == forest.params
    # export rounds floats to 9 significant digits, so probabilities agree
    # to that precision and hard label decisions are preserved
    assert np.allclose(restored.predict_proba(matrix.X), forest.predict_proba(matrix.X), rtol=1e-8, atol=1e-12)
    assert np.array_equal(restored.predict(matrix.X), forest.predict(matrix.X))


def test_json_serialization_is_canonical():
    stream = np.random.Generator(np.random.PCG64(12))
    matrix = random_matrix(stream, 20, 3, 2)
    forest = fit(matrix, ForestParams(n_trees=2, seed=0))
    text = to_json(forest)
    assert text == to_json(from_json(text))
    doc = json.loads(text)
    assert list(doc) == sorted(doc)


def test_from_json_rejects_malformed_documents():
    with pytest.raises(ForestError):
        from_json("{not json")
    with pytest.raises(ForestError):
        from_json(json.dumps({"classes": [0, 1]}))


def test_predict_rejects_wrong_width():
    matrix = matrix_from([[0, 1], [1, 0]], [0, 1])
    forest = fit(matrix, ForestParams(n_trees=1, seed=0))
    with pytest.raises(ForestError, match="expects 2"):
        forest.predict(np.zeros((3, 5)))


def test_canonical_json_formats_floats_compactly():
    text = canonical_json({"b": 0.5, "a": [1, 2.25], "flag": True, "none": None})
    assert text == '{"a":[1,2.25],"b":0.5,"flag":true,"none":null}'
