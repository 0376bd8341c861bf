"""Zero-shot inference: attribute signatures, ESZSL closed form, k-NN and evaluation."""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import linalg
from .kdd import CATEGORIES, CLASS_TABLE, CLASSES, Dataset

MODEL_FORMAT_VERSION = 1


@dataclass
class SignatureMatrix:
    """``values`` is attributes x groups, each row min-max scaled across groups."""

    values: np.ndarray
    labels: list[str]
    row_min: np.ndarray
    row_span: np.ndarray  # 0 marks a constant row

    def scale(self, x) -> np.ndarray:
        """Apply the signature row scaling to feature vectors (rows of ``x``)."""
        x = np.asarray(x, dtype=float)
        span = np.where(self.row_span > 0, self.row_span, 1.0)
        out = (x - self.row_min) / span
        return np.where(self.row_span > 0, out, 0.5)

    def to_dict(self) -> dict:
        return {
            "labels": list(self.labels), "values": self.values.tolist(),
            "row_min": self.row_min.tolist(), "row_span": self.row_span.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SignatureMatrix":
        return cls(np.array(d["values"], dtype=float).reshape(len(d["row_min"]), len(d["labels"])),
                   list(d["labels"]), np.array(d["row_min"], dtype=float), np.array(d["row_span"], dtype=float))


def group_labels(dataset: Dataset, by: str) -> np.ndarray:
    if by == "class":
        return np.asarray(dataset.labels).astype(str)
    if by == "category":
        return np.asarray(dataset.categories).astype(str)
    raise ValueError(f"unknown grouping {by!r}")


def _group_order(present, by):
    canonical = [c.name for c in CLASS_TABLE] if by == "class" else CATEGORIES
    return [g for g in canonical if g in present] + sorted(set(present) - set(canonical))


def build_signature_matrix(learned: Dataset, by: str = "class", groups: Sequence[str] | None = None) -> SignatureMatrix:
    """Per-group mean attribute vector, min-max scaled per attribute across groups.

    Constant rows become 0.5.
    """
    keys = group_labels(learned, by)
    order = list(groups) if groups is not None else _group_order(set(keys.tolist()), by)
    if not order:
        raise ValueError("empty-group: no groups to build signatures from")
    means = []
    for g in order:
        mask = keys == g
        if not mask.any():
            raise ValueError(f"empty-group: {g}")
        means.append(learned.features[mask].mean(axis=0))
    raw = np.column_stack(means)
    lo, hi = raw.min(axis=1), raw.max(axis=1)
    span = hi - lo
    values = np.full_like(raw, 0.5)
    varying = span > 0
    values[varying] = (raw[varying] - lo[varying, None]) / span[varying, None]
    return SignatureMatrix(values, order, lo, np.where(varying, span, 0.0))


def membership_matrix(labels, columns: Sequence[str]) -> np.ndarray:
    """m x z matrix of +1 at each instance's column and -1 elsewhere."""
    index = {c: j for j, c in enumerate(columns)}
    labels = list(labels)
    Y = -np.ones((len(labels), len(columns)))
    for i, lab in enumerate(labels):
        Y[i, index[lab]] = 1.0
    return Y


@dataclass
class EszslModel:
    V: np.ndarray  # d x a
    gamma: float
    lam: float
    train_labels: list[str] = field(default_factory=list)

    def scores(self, X, S) -> np.ndarray:
        """``x^T V S'`` for each row of ``X``; one column per signature."""
        return np.atleast_2d(np.asarray(X, dtype=float)) @ self.V @ np.asarray(S, dtype=float)


def train_eszsl(X, Y, S, gamma: float = 1.0, lam: float = 1.0, train_labels: Sequence[str] = ()) -> EszslModel:
    """Closed-form ESZSL: V = (X X^T + gamma I)^-1 X Y S^T (S S^T + lam I)^-1.

    ``X`` is d x m (one column per instance), ``Y`` m x z, ``S`` a x z.
    Both inverses are applied as linear solves.
    """
    if gamma <= 0 or lam <= 0:
        raise ValueError("gamma and lambda must be positive")
    X, Y, S = linalg.as_matrix(X), linalg.as_matrix(Y), linalg.as_matrix(S)
    if X.shape[1] != Y.shape[0] or Y.shape[1] != S.shape[1]:
        raise ValueError(f"dimension-mismatch: X {X.shape}, Y {Y.shape}, S {S.shape}")
    left = linalg.add_scaled_identity(linalg.matmul(X, X.T), gamma)
    right = linalg.add_scaled_identity(linalg.matmul(S, S.T), lam)
    rhs = linalg.matmul(linalg.matmul(X, Y), S.T)
    W = linalg.solve(left, rhs)
    # right is symmetric, so W right^-1 = (right^-1 W^T)^T
    V = linalg.solve(right, W.T).T
    return EszslModel(V, float(gamma), float(lam), list(train_labels))


def eszsl_residual(model: EszslModel, X, Y, S) -> float:
    """Relative Frobenius residual of (X X^T + gI) V (S S^T + lI) = X Y S^T."""
    X, Y, S = (np.asarray(m, dtype=float) for m in (X, Y, S))
    left = X @ X.T + model.gamma * np.eye(X.shape[0])
    right = S @ S.T + model.lam * np.eye(S.shape[0])
    target = X @ Y @ S.T
    return float(np.linalg.norm(left @ model.V @ right - target) / max(1.0, np.linalg.norm(target)))


def predict_eszsl(model: EszslModel, x, signatures: SignatureMatrix | np.ndarray, labels: Sequence[str] | None = None):
    """Label(s) maximizing ``x^T V S'_i``; ties go to the first column.

    ``x`` may be one vector or a matrix of row vectors.
    """
    if isinstance(signatures, SignatureMatrix):
        S, labels = signatures.values, signatures.labels
    else:
        S = np.asarray(signatures, dtype=float)
        labels = list(labels) if labels is not None else list(range(S.shape[1]))
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != model.V.shape[0] or S.shape[0] != model.V.shape[1]:
        raise ValueError("dimension-mismatch")
    best = np.argmax(model.scores(x, S), axis=1)
    out = [labels[j] for j in best]
    return out[0] if x.ndim == 1 else out


def _vote(labels, dists):
    """Majority label; ties resolved by the closest single neighbour among tied labels."""
    tally = Counter(labels)
    top = max(tally.values())
    tied = {lab for lab, n in tally.items() if n == top}
    for lab, _ in sorted(zip(labels, dists), key=lambda t: t[1]):
        if lab in tied:
            return lab
    raise AssertionError("unreachable")


def knn_predict(x, signatures: SignatureMatrix, k: int = 1):
    """Nearest signature column(s) by Euclidean distance on scaled attributes."""
    if signatures.values.shape[1] == 0:
        raise ValueError("empty-signatures")
    if not 1 <= k <= signatures.values.shape[1]:
        raise ValueError(f"k must be in [1, {signatures.values.shape[1]}]")
    x = np.asarray(x, dtype=float)
    rows = np.atleast_2d(signatures.scale(x))
    cols = signatures.values.T
    d = np.sqrt(((rows[:, None, :] - cols[None, :, :]) ** 2).sum(axis=2))
    out = []
    for drow in d:
        nearest = np.argsort(drow, kind="stable")[:k]
        out.append(_vote([signatures.labels[j] for j in nearest], drow[nearest].tolist()))
    return out[0] if x.ndim == 1 else out


def knn_predict_instances(X, train_X, train_labels, k: int = 1, chunk: int = 256) -> list:
    """Instance-level k-NN against labelled training vectors.

    Identical training vectors are merged; equal distances keep training order.
    """
    train_X = np.asarray(train_X, dtype=float)
    train_labels = np.asarray(train_labels).astype(str)
    if len(train_X) == 0:
        raise ValueError("empty-signatures: no training instances")
    if k < 1:
        raise ValueError("k must be >= 1")
    uniq, first, inverse = np.unique(train_X, axis=0, return_index=True, return_inverse=True)
    inverse = inverse.reshape(-1)
    # for each unique vector, member labels in training order
    members = [[] for _ in range(len(uniq))]
    for i, u in enumerate(inverse):
        members[u].append(train_labels[i])
    X = np.atleast_2d(np.asarray(X, dtype=float))
    out = []
    for start in range(0, len(X), chunk):
        block = X[start:start + chunk]
        d = np.sqrt(((block[:, None, :] - uniq[None, :, :]) ** 2).sum(axis=2))
        for drow in d:
            order = np.lexsort((first, drow))
            labs, dists = [], []
            for u in order:
                take = members[u][: k - len(labs)]
                labs.extend(take)
                dists.extend([drow[u]] * len(take))
                if len(labs) >= k:
                    break
            out.append(_vote(labs, dists))
    return out


@dataclass
class EvalResult:
    labels: list[str]
    confusion: np.ndarray  # rows: truth, columns: prediction

    @property
    def total(self) -> int:
        return int(self.confusion.sum())

    @property
    def accuracy(self) -> float:
        return float(np.trace(self.confusion) / self.total) if self.total else 0.0

    @property
    def per_class_accuracy(self) -> dict[str, float | None]:
        out = {}
        for i, lab in enumerate(self.labels):
            n = self.confusion[i].sum()
            out[lab] = float(self.confusion[i, i] / n) if n else None
        return out

    def to_dict(self) -> dict:
        return {
            "labels": self.labels, "confusion": self.confusion.tolist(), "total": self.total,
            "accuracy": self.accuracy, "per_class_accuracy": self.per_class_accuracy,
        }


def evaluate(predictions, truths, labels: Sequence[str] | None = None) -> EvalResult:
    predictions, truths = list(predictions), list(truths)
    if len(predictions) != len(truths):
        raise ValueError("predictions and truths differ in length")
    labels = list(labels) if labels is not None else sorted(set(truths))
    index = {lab: i for i, lab in enumerate(labels)}
    cm = np.zeros((len(labels), len(labels)), dtype=np.int64)
    for p, t in zip(predictions, truths):
        if p not in index or t not in index:
            raise ValueError(f"label-mismatch: {p if p not in index else t!r} not in label set")
        cm[index[t], index[p]] += 1
    return EvalResult(labels, cm)


GRID = [10.0 ** e for e in range(-3, 4)]


def holdout_split(labels, fraction: float = 0.2, seed: int = 0):
    """Stratified boolean mask selecting roughly ``fraction`` of each label (singletons stay in training)."""
    labels = np.asarray(labels).astype(str)
    rng = np.random.default_rng(seed)
    mask = np.zeros(len(labels), dtype=bool)
    for lab in sorted(set(labels.tolist())):
        idx = np.flatnonzero(labels == lab)
        n = int(round(fraction * len(idx)))
        if len(idx) > 1 and n:
            mask[rng.choice(idx, size=min(n, len(idx) - 1), replace=False)] = True
    return mask


def grid_search(features, labels, by_signature: SignatureMatrix, seed: int = 0, grid: Sequence[float] = GRID):
    """Pick (gamma, lambda) by held-out accuracy on seen data. Ties keep the first grid point."""
    features = np.asarray(features, dtype=float)
    labels = np.asarray(labels).astype(str)
    held = holdout_split(labels, seed=seed)
    S = by_signature.values
    Y = membership_matrix(labels[~held], by_signature.labels)
    X = features[~held].T
    results = []
    best = None
    for g in grid:
        for l in grid:
            model = train_eszsl(X, Y, S, g, l)
            pred = predict_eszsl(model, features[held], by_signature)
            acc = float(np.mean(np.asarray(pred) == labels[held])) if held.any() else 0.0
            results.append({"gamma": g, "lambda": l, "accuracy": acc})
            if best is None or acc > best[2]:
                best = (g, l, acc)
    return best[0], best[1], results


def save_model(path, model: EszslModel, train_signatures: SignatureMatrix, infer_signatures: SignatureMatrix,
               feature_scaling: dict | None = None) -> None:
    doc = {
        "format": "alnid-eszsl", "version": MODEL_FORMAT_VERSION,
        "V": model.V.tolist(), "gamma": model.gamma, "lambda": model.lam, "train_labels": model.train_labels,
        "train_signatures": train_signatures.to_dict(), "infer_signatures": infer_signatures.to_dict(),
        "feature_scaling": feature_scaling,
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)


def load_model(path):
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("format") != "alnid-eszsl" or doc.get("version") != MODEL_FORMAT_VERSION:
        raise ValueError("unsupported model document")
    model = EszslModel(np.array(doc["V"], dtype=float), doc["gamma"], doc["lambda"], doc["train_labels"])
    return (model, SignatureMatrix.from_dict(doc["train_signatures"]),
            SignatureMatrix.from_dict(doc["infer_signatures"]), doc["feature_scaling"])


@dataclass
class ZeroShotRun:
    model: EszslModel
    train_signatures: SignatureMatrix
    infer_signatures: SignatureMatrix
    residual: float
    eszsl: EvalResult
    knn: EvalResult
    feature_scaling: dict | None = None
    grid: list | None = None


def zero_shot_run(seen: Dataset, unseen: Dataset, gamma: float = 1.0, lam: float = 1.0, k: int = 1,
                  train_level: str = "class", knn_mode: str = "signature", normalize: bool = False,
                  grid_search_seed: int | None = None) -> ZeroShotRun:
    """Train on seen instances, classify unseen instances into categories.

    ``normalize`` min-max scales features with seen-data ranges first (the
    original-attribute baseline); relearned attributes are used raw.
    """
    Xs, Xu = seen.features, unseen.features
    scaling = None
    if normalize:
        lo, hi = Xs.min(axis=0), Xs.max(axis=0)
        span = np.where(hi > lo, hi - lo, 1.0)
        Xs, Xu = (Xs - lo) / span, (Xu - lo) / span
        scaling = {"min": lo.tolist(), "span": span.tolist()}
    scaled_seen = Dataset(Xs, seen.labels)
    S = build_signature_matrix(scaled_seen, by=train_level)
    S_prime = build_signature_matrix(scaled_seen, by="category")
    train_keys = group_labels(scaled_seen, train_level)
    grid = None
    if grid_search_seed is not None:
        gamma, lam, grid = grid_search(Xs, train_keys, S, seed=grid_search_seed)
    Y = membership_matrix(train_keys, S.labels)
    model = train_eszsl(Xs.T, Y, S.values, gamma, lam, S.labels)
    residual = eszsl_residual(model, Xs.T, Y, S.values)
    truths = [CLASSES[lab].category for lab in unseen.labels]
    if len(unseen):
        eszsl_pred = predict_eszsl(model, Xu, S_prime)
        if knn_mode == "signature":
            knn_pred = knn_predict(Xu, S_prime, k)
        elif knn_mode == "instance":
            knn_pred = knn_predict_instances(Xu, Xs, scaled_seen.categories, k)
        else:
            raise ValueError(f"unknown k-NN mode {knn_mode!r}")
    else:
        eszsl_pred, knn_pred = [], []
    return ZeroShotRun(
        model, S, S_prime, residual,
        evaluate(eszsl_pred, truths, CATEGORIES), evaluate(knn_pred, truths, CATEGORIES),
        scaling, grid,
    )
