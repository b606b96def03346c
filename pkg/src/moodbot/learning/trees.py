"""Greedy CART decision trees: variance reduction for regression, Gini for
classification, with deterministic lowest-(feature, threshold) tie-breaking."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import _kernels


class TrainingError(ValueError):
    """Unusable training input (empty set, inconsistent shapes)."""


REGRESSION = "regression"
CLASSIFICATION = "classification"


@dataclass(frozen=True)
class TreeParams:
    max_depth: int | None = 8
    min_leaf: int = 5
    feature_subset: str = "all"  # "all" or "sqrt" (per-split subsampling)
    seed: int = 0


@dataclass
class TreeNode:
    """Nested view of a fitted tree: internal split or leaf."""

    feature_index: Optional[int] = None
    threshold: Optional[float] = None
    left: Optional["TreeNode"] = None
    right: Optional["TreeNode"] = None
    value: Optional[float] = None
    distribution: Optional[tuple[int, ...]] = None

    @property
    def is_leaf(self) -> bool:
        return self.feature_index is None


@dataclass
class Tree:
    """Flat-array decision tree (kernel output, also the wire format)."""

    task: str
    n_classes: int
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    counts: np.ndarray = field(repr=False)

    @property
    def node_count(self) -> int:
        return len(self.feature)

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = np.ascontiguousarray(X, dtype=np.float64)
        return _kernels.predict_tree(
            X, self.feature, self.threshold, self.left, self.right, self.value
        )

    def root(self) -> TreeNode:
        def build(nid: int) -> TreeNode:
            if self.feature[nid] == _kernels.LEAF:
                if self.task == CLASSIFICATION:
                    return TreeNode(
                        value=float(self.value[nid]),
                        distribution=tuple(int(c) for c in self.counts[nid]),
                    )
                return TreeNode(value=float(self.value[nid]))
            return TreeNode(
                feature_index=int(self.feature[nid]),
                threshold=float(self.threshold[nid]),
                left=build(int(self.left[nid])),
                right=build(int(self.right[nid])),
            )

        return build(0)

    def depth(self) -> int:
        def walk(nid: int) -> int:
            if self.feature[nid] == _kernels.LEAF:
                return 0
            return 1 + max(walk(int(self.left[nid])), walk(int(self.right[nid])))

        return walk(0)

    def to_dict(self) -> dict:
        d = {
            "task": self.task,
            "n_classes": self.n_classes,
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
        }
        if self.task == CLASSIFICATION:
            d["counts"] = self.counts.tolist()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Tree":
        n = len(d["feature"])
        counts = d.get("counts")
        return cls(
            task=d["task"],
            n_classes=int(d["n_classes"]),
            feature=np.asarray(d["feature"], dtype=np.int32),
            threshold=np.asarray(d["threshold"], dtype=np.float64),
            left=np.asarray(d["left"], dtype=np.int32),
            right=np.asarray(d["right"], dtype=np.int32),
            value=np.asarray(d["value"], dtype=np.float64),
            counts=(
                np.asarray(counts, dtype=np.int64)
                if counts is not None
                else np.zeros((n, 1), dtype=np.int64)
            ),
        )


def resolve_mtry(d: int, feature_subset: str) -> int:
    if feature_subset == "sqrt":
        return min(d, int(math.ceil(math.sqrt(d))))
    if feature_subset == "all":
        return d
    raise ValueError(f"unknown feature_subset rule {feature_subset!r}")


def _coerce_training_arrays(X, y, task: str):
    X = np.ascontiguousarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise TrainingError(f"X must be 2-D, got shape {X.shape}")
    n = X.shape[0]
    if n == 0:
        raise TrainingError("cannot fit a tree on an empty dataset")
    if task == CLASSIFICATION:
        y_clf = np.ascontiguousarray(y, dtype=np.int64)
        if y_clf.min() < 0:
            raise TrainingError("class labels must be non-negative integers")
        y_reg = np.zeros(1, dtype=np.float64)
        n_classes = max(2, int(y_clf.max()) + 1)
    elif task == REGRESSION:
        y_reg = np.ascontiguousarray(y, dtype=np.float64)
        y_clf = np.zeros(1, dtype=np.int64)
        n_classes = 1
    else:
        raise ValueError(f"unknown task {task!r}")
    if (task == CLASSIFICATION and len(y_clf) != n) or (
        task == REGRESSION and len(y_reg) != n
    ):
        raise TrainingError("X and y length mismatch")
    return X, y_reg, y_clf, n_classes


def fit_tree(
    X,
    y,
    task: str = REGRESSION,
    params: TreeParams = TreeParams(),
    rng: np.random.Generator | None = None,
    presort: tuple[np.ndarray, np.ndarray] | None = None,
) -> Tree:
    """Fit one CART tree.

    `presort` may carry precomputed (sorted_idx, sorted_val) columns for
    X (they are not mutated); `rng` feeds per-split feature subsampling
    when the subset rule asks for fewer than all features.
    """
    X, y_reg, y_clf, n_classes = _coerce_training_arrays(X, y, task)
    n, d = X.shape
    if presort is None:
        presort = _kernels.presort_columns(X)
    sorted_idx, sorted_val = presort
    mtry = resolve_mtry(d, params.feature_subset)
    if mtry < d:
        if rng is None:
            rng = np.random.default_rng(params.seed)
        feat_rand = rng.random(mtry * (2 * n + 2))
    else:
        feat_rand = np.zeros(1, dtype=np.float64)
    max_depth = -1 if params.max_depth is None else int(params.max_depth)
    feature, threshold, left, right, value, counts = _kernels.grow_tree(
        sorted_idx.copy(),
        sorted_val.copy(),
        y_reg,
        y_clf,
        task == CLASSIFICATION,
        n_classes,
        max_depth,
        int(params.min_leaf),
        mtry,
        feat_rand,
    )
    return Tree(
        task=task,
        n_classes=n_classes,
        feature=feature,
        threshold=threshold,
        left=left,
        right=right,
        value=value,
        counts=counts,
    )
