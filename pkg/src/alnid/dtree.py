"""Information-gain decision tree with binary midpoint thresholds, rules and path tracing."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

TREE_FORMAT_VERSION = 1
GAIN_EPS = 1e-12


def class_info(counts) -> float:
    """Shannon entropy in bits of a class-count histogram (dict or sequence)."""
    if isinstance(counts, dict):
        counts = list(counts.values())
    c = np.asarray(counts, dtype=float)
    total = c.sum()
    if total <= 0:
        raise ValueError("empty-histogram")
    p = c[c > 0] / total
    return float(max(0.0, -np.sum(p * np.log2(p))))


def _histogram(labels) -> dict:
    out: dict = {}
    for y in labels:
        out[y] = out.get(y, 0) + 1
    return out


def split_entropy(X, y, attribute_index: int, threshold: float) -> float:
    """Weighted child entropy of the split ``x[a] <= threshold`` / ``x[a] > threshold``."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    n = len(y)
    if n == 0:
        raise ValueError("empty-examples")
    left = X[:, attribute_index] <= threshold
    total = 0.0
    for side in (left, ~left):
        k = int(side.sum())
        if k:
            total += k / n * class_info(_histogram(y[side].tolist()))
    return total


@dataclass(frozen=True)
class SplitCandidate:
    attribute_index: int
    threshold: float
    gain: float


def _xlog2x(c):
    c = np.asarray(c, dtype=float)
    out = np.zeros_like(c)
    pos = c > 0
    out[pos] = c[pos] * np.log2(c[pos])
    return out


def _attribute_gains(values, codes, weights, n_classes, parent_info, min_leaf):
    """Gains and thresholds for every admissible midpoint of one attribute."""
    uniq, inv = np.unique(values, return_inverse=True)
    if len(uniq) < 2:
        return None, None
    counts = np.zeros((len(uniq), n_classes))
    np.add.at(counts, (inv, codes), weights)
    left = np.cumsum(counts, axis=0)[:-1]
    right = counts.sum(axis=0) - left
    n_left = left.sum(axis=1)
    n_right = right.sum(axis=1)
    n = n_left[0] + n_right[0]
    ok = (n_left >= min_leaf) & (n_right >= min_leaf)
    if not ok.any():
        return None, None
    # n_k*H_k = n_k*log2(n_k) - sum_c c*log2(c)
    weighted = (
        _xlog2x(n_left) - _xlog2x(left).sum(axis=1)
        + _xlog2x(n_right) - _xlog2x(right).sum(axis=1)
    ) / n
    gains = parent_info - weighted
    thresholds = (uniq[:-1] + uniq[1:]) / 2.0
    return np.where(ok, gains, -np.inf), thresholds


def _best_candidate(X, codes, weights, n_classes, attributes, min_leaf, allow_zero_gain=False):
    hist = np.bincount(codes, weights=weights, minlength=n_classes)
    parent_info = class_info(hist[hist > 0])
    per_attr = []
    for a in attributes:
        gains, thresholds = _attribute_gains(X[:, a], codes, weights, n_classes, parent_info, min_leaf)
        if gains is not None:
            per_attr.append((a, gains, thresholds))
    if not per_attr:
        return None
    best = max(float(g.max()) for _, g, _ in per_attr)
    if best == -np.inf or (best <= GAIN_EPS and not allow_zero_gain):
        return None
    # Near-equal gains count as ties: lowest attribute, then lowest threshold.
    for a, gains, thresholds in sorted(per_attr, key=lambda t: t[0]):
        hits = np.flatnonzero(gains >= best - GAIN_EPS)
        if hits.size:
            i = hits[0]
            return SplitCandidate(int(a), float(thresholds[i]), max(0.0, float(gains[i])))
    return None


def _encode_labels(y):
    classes = sorted(set(np.asarray(y).tolist()))
    index = {c: i for i, c in enumerate(classes)}
    return classes, np.array([index[v] for v in np.asarray(y).tolist()], dtype=np.intp)


def best_split(X, y, available_attributes: Sequence[int] | None = None, min_leaf: int = 1) -> SplitCandidate | None:
    X = np.asarray(X, dtype=float)
    if len(X) == 0:
        raise ValueError("empty-examples")
    classes, codes = _encode_labels(y)
    attrs = range(X.shape[1]) if available_attributes is None else available_attributes
    return _best_candidate(X, codes, np.ones(len(codes)), len(classes), attrs, min_leaf)


@dataclass(frozen=True)
class Rule:
    conditions: tuple[tuple[int, str, float], ...]
    consequent: str

    def matches(self, x) -> bool:
        for a, op, t in self.conditions:
            if (x[a] <= t) != (op == "<="):
                return False
        return True

    def __str__(self) -> str:
        if not self.conditions:
            return f"IF TRUE THEN {self.consequent}"
        body = " AND ".join(f"a{a} {op} {t!r}" for a, op, t in self.conditions)
        return f"IF {body} THEN {self.consequent}"


@dataclass
class DecisionTree:
    """Flat binary tree. Node 0 is the root; ``feature[i] == -1`` marks a leaf.

    Left children take ``x[feature] <= threshold``.
    """

    classes: list
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    counts: np.ndarray  # (n_nodes, n_classes) training histogram per node
    n_attributes: int
    min_leaf_size: int = 2
    max_depth: int | None = None
    depth: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.depth = np.zeros(len(self.feature), dtype=np.intp)
        for i in range(len(self.feature)):
            if self.feature[i] >= 0:
                self.depth[self.left[i]] = self.depth[i] + 1
                self.depth[self.right[i]] = self.depth[i] + 1

    @property
    def node_count(self) -> int:
        return len(self.feature)

    @property
    def leaf_count(self) -> int:
        return int(np.sum(self.feature < 0))

    @property
    def max_leaf_depth(self) -> int:
        return int(self.depth[self.feature < 0].max())

    def leaf_class(self, node: int) -> str:
        # argmax takes the first maximum; classes are sorted by name
        return self.classes[int(np.argmax(self.counts[node]))]

    def _check(self, X):
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[None, :]
        if X.shape[1] != self.n_attributes:
            raise ValueError(f"schema-mismatch: tree expects {self.n_attributes} attributes, got {X.shape[1]}")
        return X

    def apply(self, X) -> np.ndarray:
        """Leaf index reached by each row of ``X``."""
        X = self._check(X)
        node = np.zeros(len(X), dtype=np.intp)
        active = self.feature[node] >= 0
        while active.any():
            idx = np.flatnonzero(active)
            cur = node[idx]
            go_left = X[idx, self.feature[cur]] <= self.threshold[cur]
            node[idx] = np.where(go_left, self.left[cur], self.right[cur])
            active[idx] = self.feature[node[idx]] >= 0
        return node

    def test_counts(self, X) -> np.ndarray:
        """Per-row count of tests of each attribute along the descent path."""
        X = self._check(X)
        out = np.zeros((len(X), self.n_attributes), dtype=np.int64)
        node = np.zeros(len(X), dtype=np.intp)
        idx = np.flatnonzero(self.feature[node] >= 0)
        while idx.size:
            cur = node[idx]
            f = self.feature[cur]
            out[idx, f] += 1
            go_left = X[idx, f] <= self.threshold[cur]
            node[idx] = np.where(go_left, self.left[cur], self.right[cur])
            idx = idx[self.feature[node[idx]] >= 0]
        return out

    def predict(self, X) -> np.ndarray:
        leaf_pred = np.array(
            [self.leaf_class(i) if self.feature[i] < 0 else None for i in range(self.node_count)], dtype=object
        )
        return leaf_pred[self.apply(X)]

    def to_json(self) -> str:
        nodes = []
        for i in range(self.node_count):
            hist = {c: int(n) for c, n in zip(self.classes, self.counts[i]) if n}
            if self.feature[i] < 0:
                nodes.append({"id": i, "leaf": True, "histogram": hist, "class": self.leaf_class(i)})
            else:
                nodes.append({
                    "id": i, "leaf": False, "attribute": int(self.feature[i]),
                    "threshold": float(self.threshold[i]),
                    "left": int(self.left[i]), "right": int(self.right[i]), "histogram": hist,
                })
        doc = {
            "format": "alnid-tree", "version": TREE_FORMAT_VERSION,
            "n_attributes": self.n_attributes, "classes": list(self.classes),
            "params": {"min_leaf_size": self.min_leaf_size, "max_depth": self.max_depth},
            "leaf_count": self.leaf_count, "node_count": self.node_count, "nodes": nodes,
        }
        return json.dumps(doc, indent=1, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "DecisionTree":
        doc = json.loads(text)
        if doc.get("format") != "alnid-tree" or doc.get("version") != TREE_FORMAT_VERSION:
            raise ValueError("unsupported tree document")
        classes = doc["classes"]
        col = {c: j for j, c in enumerate(classes)}
        nodes = sorted(doc["nodes"], key=lambda n: n["id"])
        n = len(nodes)
        feature = np.full(n, -1, dtype=np.intp)
        threshold = np.zeros(n)
        left = np.full(n, -1, dtype=np.intp)
        right = np.full(n, -1, dtype=np.intp)
        counts = np.zeros((n, len(classes)))
        for i, node in enumerate(nodes):
            for c, k in node["histogram"].items():
                counts[i, col[c]] = k
            if not node["leaf"]:
                feature[i] = node["attribute"]
                threshold[i] = node["threshold"]
                left[i] = node["left"]
                right[i] = node["right"]
        params = doc["params"]
        return cls(classes, feature, threshold, left, right, counts, doc["n_attributes"],
                   params["min_leaf_size"], params["max_depth"])


def build_tree(X, y, min_leaf_size: int = 2, max_depth: int | None = None) -> DecisionTree:
    """Grow an unpruned tree by maximum information gain.

    A node becomes a leaf when it is pure, when no split leaves ``min_leaf_size``
    instances on both sides, or at ``max_depth``. An impure node with no
    positive-gain split still splits on the first admissible zero-gain
    candidate, so consistent data always ends in pure leaves.
    Duplicate rows are merged with weights first; the grown tree is the same.
    """
    X = np.asarray(X, dtype=float)
    if len(X) == 0:
        raise ValueError("empty-examples")
    if min_leaf_size < 1:
        raise ValueError("min_leaf_size must be >= 1")
    classes, codes = _encode_labels(y)
    K = len(classes)
    rows = np.column_stack([X, codes.astype(float)])
    uniq, weights = np.unique(rows, axis=0, return_counts=True)
    Xu = uniq[:, :-1]
    cu = uniq[:, -1].astype(np.intp)
    w = weights.astype(float)

    feature, threshold, left, right, counts = [], [], [], [], []

    def new_node(hist):
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        counts.append(hist)
        return len(feature) - 1

    attrs = range(X.shape[1])
    root = new_node(np.bincount(cu, weights=w, minlength=K))
    stack = [(root, np.arange(len(cu)), 0)]
    while stack:
        node, idx, depth = stack.pop()
        hist = counts[node]
        if np.count_nonzero(hist) <= 1 or (max_depth is not None and depth >= max_depth):
            continue
        cand = _best_candidate(Xu[idx], cu[idx], w[idx], K, attrs, min_leaf_size, allow_zero_gain=True)
        if cand is None:
            continue
        go_left = Xu[idx, cand.attribute_index] <= cand.threshold
        li, ri = idx[go_left], idx[~go_left]
        feature[node] = cand.attribute_index
        threshold[node] = cand.threshold
        left[node] = new_node(np.bincount(cu[li], weights=w[li], minlength=K))
        right[node] = new_node(np.bincount(cu[ri], weights=w[ri], minlength=K))
        stack.append((right[node], ri, depth + 1))
        stack.append((left[node], li, depth + 1))

    return DecisionTree(
        classes, np.array(feature, dtype=np.intp), np.array(threshold), np.array(left, dtype=np.intp),
        np.array(right, dtype=np.intp), np.array(counts), X.shape[1], min_leaf_size, max_depth,
    )


def predict(tree: DecisionTree, instance) -> str:
    return tree.predict(np.asarray(instance, dtype=float)[None, :])[0]


def trace_path(tree: DecisionTree, instance) -> list[tuple[int, float, str]]:
    x = np.asarray(instance, dtype=float)
    if x.shape != (tree.n_attributes,):
        raise ValueError(f"schema-mismatch: tree expects {tree.n_attributes} attributes")
    path = []
    node = 0
    while tree.feature[node] >= 0:
        a, t = int(tree.feature[node]), float(tree.threshold[node])
        if x[a] <= t:
            path.append((a, t, "<="))
            node = tree.left[node]
        else:
            path.append((a, t, ">"))
            node = tree.right[node]
    return path


def extract_rules(tree: DecisionTree) -> list[Rule]:
    rules = []
    stack = [(0, ())]
    while stack:
        node, conds = stack.pop()
        if tree.feature[node] < 0:
            rules.append(Rule(conds, tree.leaf_class(node)))
            continue
        a, t = int(tree.feature[node]), float(tree.threshold[node])
        stack.append((tree.right[node], conds + ((a, ">", t),)))
        stack.append((tree.left[node], conds + ((a, "<=", t),)))
    return rules


def format_rules(rules: Sequence[Rule]) -> str:
    return "".join(f"{rule}\n" for rule in rules)
