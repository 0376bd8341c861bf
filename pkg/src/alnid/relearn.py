"""Attribute relearning: each attribute's new value is how often the tree tests it on the instance's path."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dtree import DecisionTree
from .kdd import ATTRIBUTES, Dataset, EncodedInstance, column_stats


@dataclass(frozen=True)
class LearnedInstance:
    learned_features: tuple[int, ...]
    label: str
    category: str


def relearn_instance(tree: DecisionTree, instance: EncodedInstance) -> LearnedInstance:
    counts = tree.test_counts(np.asarray(instance.features, dtype=float)[None, :])[0]
    return LearnedInstance(tuple(int(v) for v in counts), instance.label, instance.category)


def relearn_dataset(tree: DecisionTree, dataset: Dataset) -> Dataset:
    """Relearned copy of ``dataset``: same labels and order, integer-valued features."""
    if len(dataset) == 0:
        return Dataset(np.zeros((0, tree.n_attributes)), [])
    return Dataset(tree.test_counts(dataset.features), dataset.labels)


def learned_stats(learned: Dataset, attribute_index: int) -> dict[str, float]:
    return column_stats(learned.features[:, attribute_index])


def fisher_ratio(values, groups) -> float:
    """Between-group over within-group variance (population form).

    Zero within-group variance gives ``inf`` when groups differ and 0 when
    the column is constant.
    """
    values = np.asarray(values, dtype=float)
    groups = np.asarray(groups)
    mean = values.mean()
    between = 0.0
    within = 0.0
    for g in np.unique(groups):
        v = values[groups == g]
        mu = v.mean()
        between += len(v) * (mu - mean) ** 2
        within += np.sum((v - mu) ** 2)
    n = len(values)
    between /= n
    within /= n
    scale = max(1.0, abs(mean)) ** 2
    if within <= 1e-15 * scale:
        return float("inf") if between > 1e-15 * scale else 0.0
    return float(between / within)


def minmax_normalize(values) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    lo, hi = values.min(axis=0), values.max(axis=0)
    span = np.where(hi > lo, hi - lo, 1.0)
    return (values - lo) / span


@dataclass
class SeparabilityReport:
    attributes: list[str]
    original_ratio: list[float]
    learned_ratio: list[float]
    histograms: dict  # attribute -> {"original"|"learned": {"edges": [...], "counts": {group: [...]}}}

    @property
    def improved(self) -> list[bool]:
        return [lr > orr for orr, lr in zip(self.original_ratio, self.learned_ratio)]

    def rows(self) -> list[dict]:
        return [
            {"attribute": a, "fisher_original": o, "fisher_learned": l, "learned_better": b}
            for a, o, l, b in zip(self.attributes, self.original_ratio, self.learned_ratio, self.improved)
        ]

    def to_dict(self) -> dict:
        def enc(v):
            return "inf" if v == float("inf") else v

        return {
            "attributes": self.attributes,
            "fisher_original": [enc(v) for v in self.original_ratio],
            "fisher_learned": [enc(v) for v in self.learned_ratio],
            "learned_better_count": int(sum(self.improved)),
            "histograms": self.histograms,
        }


def _group_histograms(values, groups, edges):
    out = {}
    for g in sorted(set(groups.tolist())):
        counts, _ = np.histogram(values[groups == g], bins=edges)
        out[g] = counts.tolist()
    return out


def separability_report(original: Dataset, learned: Dataset, by: str = "category", bins: int = 10) -> SeparabilityReport:
    """Per-attribute Fisher ratios for min-max normalized originals vs raw learned values.

    ``by`` selects the grouping: ``"category"`` or ``"class"``.
    """
    if len(original) != len(learned):
        raise ValueError("original and learned datasets must be aligned")
    if not np.array_equal(original.labels, learned.labels):
        raise ValueError("original and learned datasets carry different labels")
    groups = original.categories if by == "category" else original.labels
    groups = np.asarray(groups).astype(str)
    norm = minmax_normalize(original.features)
    names = ATTRIBUTES if original.features.shape[1] == len(ATTRIBUTES) else [f"a{i}" for i in range(original.features.shape[1])]
    orig_ratio, learn_ratio, hists = [], [], {}
    orig_edges = np.linspace(0.0, 1.0, bins + 1)
    for i, name in enumerate(names):
        lv = learned.features[:, i]
        orig_ratio.append(fisher_ratio(norm[:, i], groups))
        learn_ratio.append(fisher_ratio(lv, groups))
        top = int(lv.max()) if len(lv) else 0
        learn_edges = np.arange(top + 2) - 0.5
        hists[name] = {
            "original": {"edges": orig_edges.tolist(), "counts": _group_histograms(norm[:, i], groups, orig_edges)},
            "learned": {"edges": learn_edges.tolist(), "counts": _group_histograms(lv, groups, learn_edges)},
        }
    return SeparabilityReport(list(names), orig_ratio, learn_ratio, hists)

