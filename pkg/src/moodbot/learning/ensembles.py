"""Tree ensembles and reference models over the CART base learner.

All fits are deterministic under (data, params): bagged members draw
their bootstrap and feature-subsampling randomness from a generator
seeded `params.seed + member_index`, so a fitted prefix of a larger
ensemble is bit-identical to the smaller ensemble fit directly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from . import _kernels
from .trees import (
    CLASSIFICATION,
    REGRESSION,
    TrainingError,
    Tree,
    TreeParams,
    fit_tree,
    resolve_mtry,
)

SINGLE_TREE = "single_tree"
RANDOM_FOREST = "random_forest"
BAGGING = "bagging"
ADABOOST_R2 = "adaboost_r2"
MOST_FREQUENT = "most_frequent"
MEAN_BASELINE = "mean_baseline"
LINEAR = "linear"

# Explainability proxy: lower rank reads as the simpler model family.
KIND_RANK = {
    MOST_FREQUENT: 0,
    MEAN_BASELINE: 0,
    LINEAR: 1,
    SINGLE_TREE: 2,
    BAGGING: 3,
    RANDOM_FOREST: 4,
    ADABOOST_R2: 5,
}


@dataclass(frozen=True)
class EnsembleParams:
    n_estimators: int = 10
    max_depth: int | None = 8
    min_leaf: int = 5
    learning_rate: float = 1.0  # AdaBoost only
    max_samples: float = 1.0  # Bagging bootstrap fraction
    bootstrap: bool = True
    feature_subset: str = "auto"  # auto: sqrt for RF classification, else all
    seed: int = 0

    def tree_params(self, feature_subset: str) -> TreeParams:
        return TreeParams(
            max_depth=self.max_depth,
            min_leaf=self.min_leaf,
            feature_subset=feature_subset,
            seed=self.seed,
        )


@dataclass
class LinearModel:
    coef: np.ndarray
    intercept: float

    def predict(self, X: np.ndarray) -> np.ndarray:
        return np.asarray(X, dtype=np.float64) @ self.coef + self.intercept


@dataclass
class EnsembleModel:
    """A fitted predictor of one target axis (continuous or binary)."""

    kind: str
    task: str
    params: EnsembleParams
    estimators: list
    weights: np.ndarray | None = None  # AdaBoost stage weights
    constant: float | None = None  # baselines
    n_classes: int = 2

    @property
    def estimator_count(self) -> int:
        return len(self.estimators) if self.estimators else 1

    @property
    def kind_rank(self) -> int:
        return KIND_RANK[self.kind]

    def predict(self, X) -> np.ndarray:
        X = np.ascontiguousarray(X, dtype=np.float64)
        n = X.shape[0]
        if self.kind in (MOST_FREQUENT, MEAN_BASELINE):
            return np.full(n, self.constant, dtype=np.float64)
        if self.kind == LINEAR:
            return self.estimators[0].predict(X)
        if self.kind == SINGLE_TREE:
            return self.estimators[0].predict(X)
        preds = np.stack([t.predict(X) for t in self.estimators])
        if self.kind == ADABOOST_R2:
            return weighted_median_batch(preds, self.weights)
        if self.task == CLASSIFICATION:
            votes = np.zeros((self.n_classes, n), dtype=np.int64)
            for k in range(self.n_classes):
                votes[k] = (preds == k).sum(axis=0)
            return np.argmax(votes, axis=0).astype(np.float64)  # tie -> lowest class
        return preds.mean(axis=0)


@dataclass
class PairedAxisModel:
    """Two independent per-axis predictors glued into one mood model."""

    valence: EnsembleModel
    arousal: EnsembleModel

    @property
    def axis_models(self) -> tuple[EnsembleModel, EnsembleModel]:
        return self.valence, self.arousal

    def predict_mood(self, X, user_ids=None) -> tuple[np.ndarray, np.ndarray]:
        return self.valence.predict(X), self.arousal.predict(X)


def weighted_median(values, weights) -> float:
    """Smallest value whose cumulative weight reaches half the total."""
    values = np.asarray(values, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64)
    order = np.argsort(values, kind="stable")
    cum = np.cumsum(weights[order])
    idx = int(np.argmax(cum >= 0.5 * cum[-1]))
    return float(values[order][idx])


def weighted_median_batch(preds: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Column-wise weighted median of (n_estimators, n_samples) predictions."""
    order = np.argsort(preds, axis=0, kind="stable")
    w_sorted = np.asarray(weights, dtype=np.float64)[order]
    cum = np.cumsum(w_sorted, axis=0)
    median_idx = np.argmax(cum >= 0.5 * cum[-1], axis=0)
    cols = np.arange(preds.shape[1])
    return preds[order[median_idx, cols], cols]


def _bootstrap_tree(
    y_parent: np.ndarray,
    presort: tuple[np.ndarray, np.ndarray],
    d: int,
    task: str,
    params: TreeParams,
    rng: np.random.Generator,
    sample_ids: np.ndarray,
    n_classes_hint: int,
) -> Tree:
    """Fit a tree on a bootstrap sample, reusing the parent presort."""
    sorted_idx, sorted_val = presort
    n = sorted_idx.shape[1]
    sample_ids = np.sort(sample_ids)
    counts = np.bincount(sample_ids, minlength=n).astype(np.int64)
    offsets = np.zeros(n, dtype=np.int64)
    np.cumsum(counts[:-1], out=offsets[1:])
    ns = len(sample_ids)
    exp_idx = np.empty((d, ns), dtype=np.int32)
    exp_val = np.empty((d, ns), dtype=np.float64)
    _kernels.expand_presort(sorted_idx, sorted_val, counts, offsets, exp_idx, exp_val)
    yb = y_parent[sample_ids]

    mtry = resolve_mtry(d, params.feature_subset)
    feat_rand = (
        rng.random(mtry * (2 * ns + 2)) if mtry < d else np.zeros(1, dtype=np.float64)
    )
    is_clf = task == CLASSIFICATION
    if is_clf:
        y_reg = np.zeros(1, dtype=np.float64)
        y_clf = yb.astype(np.int64)
        n_classes = n_classes_hint
    else:
        y_reg = yb.astype(np.float64)
        y_clf = np.zeros(1, dtype=np.int64)
        n_classes = 1
    max_depth = -1 if params.max_depth is None else int(params.max_depth)
    feature, threshold, left, right, value, cnts = _kernels.grow_tree(
        exp_idx,
        exp_val,
        y_reg,
        y_clf,
        is_clf,
        n_classes,
        max_depth,
        int(params.min_leaf),
        mtry,
        feat_rand,
    )
    return Tree(
        task=task,
        n_classes=n_classes if is_clf else 1,
        feature=feature,
        threshold=threshold,
        left=left,
        right=right,
        value=value,
        counts=cnts,
    )


def _check_matrix(X, y) -> tuple[np.ndarray, np.ndarray]:
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.asarray(y)
    if X.shape[0] == 0:
        raise TrainingError("cannot fit on an empty dataset")
    if X.shape[0] != len(y):
        raise TrainingError("X and y length mismatch")
    return X, y


def _fit_bagged(
    X,
    y,
    task: str,
    params: EnsembleParams,
    kind: str,
    per_split_subsample: bool,
    presort: tuple[np.ndarray, np.ndarray] | None = None,
) -> EnsembleModel:
    X, y = _check_matrix(X, y)
    n, d = X.shape
    if per_split_subsample and task == CLASSIFICATION:
        feature_subset = "sqrt"
    else:
        feature_subset = "all"
    if params.feature_subset != "auto":
        feature_subset = params.feature_subset
    tree_params = params.tree_params(feature_subset)
    n_classes = max(2, int(np.max(y)) + 1) if task == CLASSIFICATION else 1
    if presort is None:
        presort = _kernels.presort_columns(X)
    ns = max(1, int(params.max_samples * n)) if kind == BAGGING else n
    trees = []
    for i in range(params.n_estimators):
        rng = np.random.default_rng(params.seed + i)
        if params.bootstrap:
            sample_ids = rng.integers(0, n, size=ns)
            trees.append(
                _bootstrap_tree(y, presort, d, task, tree_params, rng, sample_ids, n_classes)
            )
        else:
            trees.append(fit_tree(X, y, task, tree_params, rng=rng, presort=presort))
    return EnsembleModel(
        kind=kind,
        task=task,
        params=replace(params, feature_subset=feature_subset),
        estimators=trees,
        n_classes=n_classes,
    )


def fit_single_tree(X, y, task: str, params: EnsembleParams) -> EnsembleModel:
    X, y = _check_matrix(X, y)
    tree = fit_tree(X, y, task, params.tree_params("all"))
    return EnsembleModel(
        kind=SINGLE_TREE,
        task=task,
        params=replace(params, n_estimators=1, feature_subset="all"),
        estimators=[tree],
        n_classes=tree.n_classes if task == CLASSIFICATION else 1,
    )


def fit_random_forest(
    X, y, task: str, params: EnsembleParams, presort: tuple[np.ndarray, np.ndarray] | None = None
) -> EnsembleModel:
    """Bootstrapped trees with sqrt-feature subsampling for classification."""
    return _fit_bagged(X, y, task, params, RANDOM_FOREST, True, presort)


def fit_bagging(
    X, y, task: str, params: EnsembleParams, presort: tuple[np.ndarray, np.ndarray] | None = None
) -> EnsembleModel:
    """Bootstrapped trees on a `max_samples` fraction, all features per split."""
    return _fit_bagged(X, y, task, params, BAGGING, False, presort)


def fit_adaboost_r2(
    X, y, params: EnsembleParams, presort: tuple[np.ndarray, np.ndarray] | None = None
) -> EnsembleModel:
    """AdaBoost.R2 with linear loss and weighted-median aggregation.

    Each round fits the base tree on a weighted bootstrap; the round is
    kept only while the weighted average of normalized absolute errors
    stays below 0.5. A perfectly fitting round is kept with weight 1 and
    stops the boost.
    """
    X, y = _check_matrix(X, y)
    n = X.shape[0]
    if n < 2:
        raise TrainingError("AdaBoost.R2 needs at least two rows")
    y = y.astype(np.float64)
    lr = params.learning_rate
    tree_params = params.tree_params("all")
    if presort is None:
        presort = _kernels.presort_columns(X)
    rng = np.random.default_rng(params.seed)
    w = np.full(n, 1.0 / n)
    estimators: list[Tree] = []
    stage_weights: list[float] = []
    for _ in range(params.n_estimators):
        sample_ids = rng.choice(n, size=n, replace=True, p=w)
        tree = _bootstrap_tree(y, presort, X.shape[1], REGRESSION, tree_params, rng, sample_ids, 1)
        pred = tree.predict(X)
        abs_err = np.abs(pred - y)
        err_max = float(abs_err.max())
        if err_max == 0.0:
            estimators.append(tree)
            stage_weights.append(1.0)
            break
        loss = abs_err / err_max
        avg_loss = float(w @ loss)
        if avg_loss >= 0.5:
            if not estimators:
                # Degenerate first round: keep one usable estimator.
                estimators.append(tree)
                stage_weights.append(1.0)
            break
        beta = avg_loss / (1.0 - avg_loss)
        estimators.append(tree)
        stage_weights.append(lr * math.log(1.0 / beta))
        w = w * beta ** (lr * (1.0 - loss))
        w = w / w.sum()
    return EnsembleModel(
        kind=ADABOOST_R2,
        task=REGRESSION,
        params=replace(params, feature_subset="all"),
        estimators=estimators,
        weights=np.asarray(stage_weights, dtype=np.float64),
        n_classes=1,
    )


def fit_linear(X, y, ridge: float = 1e-8) -> EnsembleModel:
    """Ordinary least squares via normal equations with a ridge jitter."""
    X, y = _check_matrix(X, y)
    n, d = X.shape
    A = np.hstack([X, np.ones((n, 1))])
    gram = A.T @ A + ridge * np.eye(d + 1)
    beta = np.linalg.solve(gram, A.T @ y.astype(np.float64))
    model = LinearModel(coef=beta[:-1], intercept=float(beta[-1]))
    return EnsembleModel(
        kind=LINEAR,
        task=REGRESSION,
        params=EnsembleParams(n_estimators=1, bootstrap=False),
        estimators=[model],
        n_classes=1,
    )


def fit_most_frequent(y_class) -> EnsembleModel:
    """Baseline predicting the modal training class (ties: lowest class)."""
    y_class = np.asarray(y_class, dtype=np.int64)
    if len(y_class) == 0:
        raise TrainingError("cannot fit a baseline on an empty dataset")
    counts = np.bincount(y_class, minlength=2)
    modal = int(np.argmax(counts))
    return EnsembleModel(
        kind=MOST_FREQUENT,
        task=CLASSIFICATION,
        params=EnsembleParams(n_estimators=1, bootstrap=False),
        estimators=[],
        constant=float(modal),
        n_classes=max(2, int(y_class.max()) + 1),
    )


def fit_mean_baseline(y) -> EnsembleModel:
    y = np.asarray(y, dtype=np.float64)
    if len(y) == 0:
        raise TrainingError("cannot fit a baseline on an empty dataset")
    return EnsembleModel(
        kind=MEAN_BASELINE,
        task=REGRESSION,
        params=EnsembleParams(n_estimators=1, bootstrap=False),
        estimators=[],
        constant=float(y.mean()),
        n_classes=1,
    )
