import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from alnid import dtree
from alnid.dtree import DecisionTree, build_tree, class_info, extract_rules, split_entropy, trace_path
from oracles import brute_force_split, entropy, rule_for


def test_class_info_pure_and_symmetric():
    assert class_info({"A": 5}) == 0.0
    assert class_info({"A": 1, "B": 1}) == pytest.approx(1.0, abs=1e-15)


def test_class_info_worked_example():
    expected = -(9 / 14) * math.log2(9 / 14) - (5 / 14) * math.log2(5 / 14)
    assert expected == pytest.approx(0.940286, abs=1e-6)
    assert class_info({"A": 9, "B": 5}) == pytest.approx(expected, abs=1e-12)


def test_class_info_empty():
    with pytest.raises(ValueError):
        class_info({})


def test_split_entropy_worked_example():
    # {A:9,B:5} -> ({A:6,B:2}, {A:3,B:3}) via attribute 0 <= 0.5
    X = [[0.0]] * 8 + [[1.0]] * 6
    y = ["A"] * 6 + ["B"] * 2 + ["A"] * 3 + ["B"] * 3
    expected = 8 / 14 * entropy(["A"] * 6 + ["B"] * 2) + 6 / 14 * 1.0
    assert expected == pytest.approx(0.892159, abs=1e-6)
    assert split_entropy(X, y, 0, 0.5) == pytest.approx(expected, abs=1e-12)


def test_split_entropy_edge_cases():
    X = [[0.0], [0.0], [1.0], [1.0]]
    y = ["A", "A", "B", "B"]
    assert split_entropy(X, y, 0, 0.5) == 0.0
    assert split_entropy(X, y, 0, -1.0) == pytest.approx(class_info({"A": 2, "B": 2}))
    with pytest.raises(ValueError):
        split_entropy(np.zeros((0, 1)), [], 0, 0.0)


def test_best_split_pure_and_perfect():
    X = [[1.0, 5.0], [2.0, 5.0], [3.0, 6.0]]
    assert dtree.best_split(X, ["A", "A", "A"]) is None
    cand = dtree.best_split(X, ["A", "A", "B"])
    # both attributes separate perfectly; lowest index wins
    assert (cand.attribute_index, cand.threshold) == (0, 2.5)
    assert cand.gain == pytest.approx(class_info({"A": 2, "B": 1}))


def test_best_split_respects_available_attributes():
    X = [[1.0, 5.0], [2.0, 5.0], [3.0, 6.0]]
    cand = dtree.best_split(X, ["A", "A", "B"], available_attributes=[1])
    assert (cand.attribute_index, cand.threshold) == (1, 5.5)


def _random_problem(rng, n, d, k, levels):
    X = rng.integers(0, levels, size=(n, d)).astype(float)
    y = [f"c{v}" for v in rng.integers(0, k, size=n)]
    return X, y


def test_best_split_matches_brute_force_50x3():
    rng = np.random.default_rng(50)
    for _ in range(20):
        X, y = _random_problem(rng, 50, 3, 3, 10)
        got = dtree.best_split(X, y)
        want = brute_force_split(X.tolist(), y)
        if want is None:
            assert got is None
        else:
            assert (got.attribute_index, got.threshold) == want[:2]
            assert got.gain == pytest.approx(want[2], abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 200), st.integers(1, 5), st.integers(1, 4),
       st.integers(2, 12), st.integers(1, 3))
def test_best_split_oracle_property(seed, n, d, k, levels, min_leaf):
    rng = np.random.default_rng(seed)
    X, y = _random_problem(rng, n, d, k, levels)
    got = dtree.best_split(X, y, min_leaf=min_leaf)
    want = brute_force_split(X.tolist(), y, min_leaf)
    if want is None:
        assert got is None
    else:
        assert (got.attribute_index, got.threshold) == want[:2]
        assert got.gain == pytest.approx(want[2], abs=1e-12)


def test_gain_non_negative_for_every_candidate():
    rng = np.random.default_rng(3)
    for _ in range(10):
        X, y = _random_problem(rng, 80, 4, 3, 6)
        parent = class_info({c: y.count(c) for c in set(y)})
        for a in range(4):
            vals = np.unique(X[:, a])
            for t in (vals[:-1] + vals[1:]) / 2:
                assert parent - split_entropy(X, y, a, t) >= -1e-12


def test_single_leaf_tree():
    tree = build_tree([[1.0, 2.0], [3.0, 4.0]], ["x", "x"])
    assert tree.node_count == 1 and tree.leaf_count == 1
    assert tree.max_leaf_depth == 0
    assert dtree.predict(tree, [100.0, -5.0]) == "x"
    assert trace_path(tree, [0.0, 0.0]) == []
    rules = extract_rules(tree)
    assert len(rules) == 1 and rules[0].conditions == ()
    assert str(rules[0]) == "IF TRUE THEN x"


def test_xor_builds_depth_two_tree():
    X = [[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]]
    y = ["A", "B", "B", "A"]
    tree = build_tree(X, y, min_leaf_size=1)
    assert tree.max_leaf_depth == 2
    assert tree.leaf_count == 4
    assert list(tree.predict(X)) == y
    rules = extract_rules(tree)
    assert len(rules) == 4 and all(len(r.conditions) == 2 for r in rules)
    # root tests attribute 0 (tie-break), children attribute 1
    assert [p[0] for p in trace_path(tree, X[1])] == [0, 1]


def test_threshold_boundary_goes_left():
    tree = build_tree([[0.0], [2.0]], ["A", "B"], min_leaf_size=1)
    assert tree.threshold[0] == 1.0
    assert dtree.predict(tree, [1.0]) == "A"
    assert trace_path(tree, [1.0]) == [(0, 1.0, "<=")]


def test_min_leaf_size_equal_to_n_gives_single_leaf():
    X = [[float(i)] for i in range(10)]
    y = ["A"] * 6 + ["B"] * 4
    tree = build_tree(X, y, min_leaf_size=10)
    assert tree.leaf_count == 1
    assert np.mean(tree.predict(X) == np.array(y)) == 0.6


def test_max_depth_limits_growth():
    rng = np.random.default_rng(0)
    X, y = _random_problem(rng, 100, 3, 4, 10)
    tree = build_tree(X, y, min_leaf_size=1, max_depth=2)
    assert tree.max_leaf_depth <= 2


def test_inconsistent_duplicates_make_majority_leaf():
    tree = build_tree([[1.0], [1.0], [1.0]], ["b", "a", "b"], min_leaf_size=1)
    assert tree.leaf_count == 1 and dtree.predict(tree, [1.0]) == "b"
    tie = build_tree([[1.0], [1.0]], ["b", "a"], min_leaf_size=1)
    assert dtree.predict(tie, [1.0]) == "a"


def test_empty_examples_rejected():
    with pytest.raises(ValueError):
        build_tree(np.zeros((0, 2)), [])


def _consistent_problem(seed, n, d, k):
    rng = np.random.default_rng(seed)
    X, _ = _random_problem(rng, n, d, 1, 6)
    # labels as a function of the row make the data consistent
    y = [f"c{hash(tuple(row)) % k}" for row in X.tolist()]
    return X, y


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 200), st.integers(1, 5), st.integers(1, 4))
def test_tree_rule_and_path_properties(seed, n, d, k):
    X, y = _consistent_problem(seed, n, d, k)
    tree = build_tree(X, y, min_leaf_size=1)
    rules = extract_rules(tree)
    assert len(rules) == tree.leaf_count
    assert tree.leaf_count + int(np.sum(tree.feature >= 0)) == tree.node_count
    preds = tree.predict(X)
    # purity on consistent data
    assert list(preds) == y
    leaves = tree.apply(X)
    for x, p, leaf in zip(X, preds, leaves):
        rule = rule_for(rules, x)
        assert rule.consequent == p
        path = trace_path(tree, x)
        assert len(path) == tree.depth[leaf] == len(rule.conditions)
        assert [(a, t) for a, t, _ in path] == [(a, t) for a, _, t in rule.conditions]
        assert len(set((a, t) for a, t, _ in path)) == len(path)


def test_build_is_deterministic_and_order_independent():
    rng = np.random.default_rng(11)
    X, y = _random_problem(rng, 150, 4, 3, 8)
    a = build_tree(X, y)
    b = build_tree(X, y)
    perm = rng.permutation(len(y))
    c = build_tree(X[perm], [y[i] for i in perm])
    assert a.to_json() == b.to_json() == c.to_json()


def test_json_round_trip():
    rng = np.random.default_rng(5)
    X, y = _random_problem(rng, 120, 3, 3, 20)
    tree = build_tree(X, y)
    again = DecisionTree.from_json(tree.to_json())
    assert again.to_json() == tree.to_json()
    probe = rng.uniform(-1, 21, size=(500, 3))
    assert list(again.predict(probe)) == list(tree.predict(probe))


def test_rule_text_format():
    tree = build_tree([[0.0, 3.0], [0.0, 1.0], [2.0, 0.0]], ["neptune", "x", "y"], min_leaf_size=1)
    text = dtree.format_rules(extract_rules(tree))
    lines = text.splitlines()
    assert len(lines) == tree.leaf_count
    assert all(line.startswith("IF ") and " THEN " in line for line in lines)
    assert "IF a0 <= 1.0 AND a1 > 2.0 THEN neptune" in lines


def test_schema_mismatch():
    tree = build_tree([[0.0, 1.0], [1.0, 0.0]], ["a", "b"], min_leaf_size=1)
    with pytest.raises(ValueError, match="schema-mismatch"):
        tree.predict([[0.0, 1.0, 2.0]])
