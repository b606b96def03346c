"""Model-family training pipeline: grid search with 10-fold CV inside the
75% train split, hold-out comparison of the classification, regression,
personalized, and most-frequent-baseline families, and final selection.

The CV loop shares fold presorts across candidates and scores smaller
ensemble sizes as prefixes of the largest fit per parameter group; both
are pure optimizations — per-member seeding makes an ensemble prefix
bit-identical to the directly fitted smaller ensemble.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from ..sensing import FeatureRow, FeatureSpec, UserProfile
from . import _kernels
from .ensembles import (
    ADABOOST_R2,
    BAGGING,
    LINEAR,
    MOST_FREQUENT,
    RANDOM_FOREST,
    EnsembleModel,
    EnsembleParams,
    PairedAxisModel,
    fit_adaboost_r2,
    fit_bagging,
    fit_linear,
    fit_most_frequent,
    fit_random_forest,
)
from .evaluation import EvalReport, evaluate, kfold_indices, pick_best, split_train_test
from .personalized import PersonalizedModel, fit_personalized, user_baselines
from .trees import CLASSIFICATION, REGRESSION, TrainingError

KIND_LABELS = {
    RANDOM_FOREST: "Random Forest",
    BAGGING: "Bagging",
    ADABOOST_R2: "AdaBoost.R2",
    LINEAR: "Linear",
    MOST_FREQUENT: "Most frequent",
}

FAMILY_CLASSIFICATION = "classification"
FAMILY_REGRESSION = "regression"
FAMILY_PERSONALIZED = "personalized"
FAMILY_BASELINE = "baseline"


@dataclass(frozen=True)
class GridConfig:
    """Hyperparameter grid swept by cross validation."""

    n_estimators: tuple[int, ...] = (10, 50)
    max_depths: tuple[int | None, ...] = (4, 8)
    min_leafs: tuple[int, ...] = (1, 5)

    @classmethod
    def from_dict(cls, d: dict) -> "GridConfig":
        return cls(
            n_estimators=tuple(d.get("n_estimators", (10, 50))),
            max_depths=tuple(d.get("max_depths", (4, 8))),
            min_leafs=tuple(d.get("min_leafs", (1, 5))),
        )


@dataclass(frozen=True)
class Candidate:
    kind: str
    params: EnsembleParams

    @property
    def label(self) -> str:
        name = KIND_LABELS[self.kind]
        if self.kind == LINEAR:
            return name
        p = self.params
        bits = [f"e={p.n_estimators}"]
        if self.kind == ADABOOST_R2:
            bits.append(f"lr={p.learning_rate:g}")
        if self.kind == BAGGING:
            bits.append(f"m={p.max_samples:g}")
        depth = "none" if p.max_depth is None else str(p.max_depth)
        bits.append(f"depth={depth}")
        bits.append(f"leaf={p.min_leaf}")
        return f"{name} ({', '.join(bits)})"


def make_grid(kinds: Sequence[str], grid: GridConfig, seed: int) -> list[Candidate]:
    out = []
    for kind in kinds:
        if kind == LINEAR:
            out.append(Candidate(LINEAR, EnsembleParams(n_estimators=1, bootstrap=False, seed=seed)))
            continue
        for e in grid.n_estimators:
            for depth in grid.max_depths:
                for leaf in grid.min_leafs:
                    out.append(
                        Candidate(
                            kind,
                            EnsembleParams(
                                n_estimators=e, max_depth=depth, min_leaf=leaf, seed=seed
                            ),
                        )
                    )
    return out


def fit_candidate(c: Candidate, X, y, task: str, presort=None) -> EnsembleModel:
    if c.kind == RANDOM_FOREST:
        return fit_random_forest(X, y, task, c.params, presort=presort)
    if c.kind == BAGGING:
        return fit_bagging(X, y, task, c.params, presort=presort)
    if c.kind == ADABOOST_R2:
        return fit_adaboost_r2(X, y, c.params, presort=presort)
    if c.kind == LINEAR:
        return fit_linear(X, y)
    raise ValueError(f"unknown candidate kind {c.kind!r}")


@dataclass
class LearningDataset:
    """Vectorized labeled rows ready for training."""

    X: np.ndarray
    y_v: np.ndarray
    y_a: np.ndarray
    user_ids: list[str]
    spec: FeatureSpec

    def __len__(self) -> int:
        return len(self.user_ids)


def dataset_from_rows(
    rows: Sequence[FeatureRow], profiles: dict[str, UserProfile], spec: FeatureSpec
) -> LearningDataset:
    labeled = [r for r in rows if r.label_v is not None and r.label_a is not None]
    if not labeled:
        raise TrainingError("no labeled rows to learn from")
    X = np.array([spec.vector(r, profiles[r.user_id]) for r in labeled], dtype=np.float64)
    if X.shape[1] != spec.width:
        raise TrainingError(f"feature width {X.shape[1]} != spec width {spec.width}")
    return LearningDataset(
        X=X,
        y_v=np.array([r.label_v for r in labeled], dtype=np.float64),
        y_a=np.array([r.label_a for r in labeled], dtype=np.float64),
        user_ids=[r.user_id for r in labeled],
        spec=spec,
    )


def _ensemble_prefix(model: EnsembleModel, e: int) -> EnsembleModel:
    if model.kind == LINEAR or len(model.estimators) <= e:
        return model
    weights = None if model.weights is None else model.weights[:e]
    return EnsembleModel(
        kind=model.kind,
        task=model.task,
        params=replace(model.params, n_estimators=e),
        estimators=model.estimators[:e],
        weights=weights,
        constant=model.constant,
        n_classes=model.n_classes,
    )


def _cv_axis(
    X: np.ndarray,
    y_cont: np.ndarray,
    user_ids: list[str],
    mode: str,
    candidates: list[Candidate],
    k: int,
    seed: int,
) -> tuple[Candidate, list[float]]:
    """10-fold grid search for one axis; returns the winner and mean scores.

    mode: "classification" fits binarized labels, "regression" fits the
    continuous values, "personalized" fits deviations from per-user
    baselines computed inside each fold. Scores are quantized-axis
    accuracies in every mode.
    """
    n = len(y_cont)
    folds = kfold_indices(n, k, seed)
    sums = np.zeros(len(candidates))

    # Group candidates that differ only in ensemble size: fit the largest,
    # score the rest as prefixes.
    groups: dict[tuple, list[int]] = {}
    for i, c in enumerate(candidates):
        key = (c.kind, c.params.max_depth, c.params.min_leaf, c.params.learning_rate,
               c.params.max_samples, c.params.seed)
        groups.setdefault(key, []).append(i)

    for train_idx, val_idx in folds:
        X_tr = np.ascontiguousarray(X[train_idx])
        X_va = np.ascontiguousarray(X[val_idx])
        y_tr_cont = y_cont[train_idx]
        y_va_bin = y_cont[val_idx] >= 0.5
        presort = _kernels.presort_columns(X_tr)

        if mode == "classification":
            y_fit = (y_tr_cont >= 0.5).astype(np.int64)
            task = CLASSIFICATION
            base_va = None
        elif mode == "regression":
            y_fit = y_tr_cont
            task = REGRESSION
            base_va = None
        elif mode == "personalized":
            users_tr = [user_ids[i] for i in train_idx]
            baselines, global_b = user_baselines(users_tr, y_tr_cont, y_tr_cont)
            base_tr = np.array([baselines[u][0] for u in users_tr])
            y_fit = y_tr_cont - base_tr
            base_va = np.array(
                [baselines.get(user_ids[i], (global_b[0],))[0] for i in val_idx]
            )
            task = REGRESSION
        else:
            raise ValueError(f"unknown CV mode {mode!r}")

        for members in groups.values():
            biggest = max(members, key=lambda i: candidates[i].params.n_estimators)
            fitted = fit_candidate(candidates[biggest], X_tr, y_fit, task, presort=presort)
            for i in members:
                sub = _ensemble_prefix(fitted, candidates[i].params.n_estimators)
                pred = sub.predict(X_va)
                if base_va is not None:
                    pred = np.clip(base_va + pred, 0.0, 1.0)
                sums[i] += float(((pred >= 0.5) == y_va_bin).mean())

    means = (sums / len(folds)).tolist()
    best = pick_best(candidates, means)
    return best, means


@dataclass
class FamilyResult:
    family: str
    valence_label: str
    arousal_label: str
    model: object
    report: EvalReport

    def to_dict(self) -> dict:
        return {
            "family": self.family,
            "valence_model": self.valence_label,
            "arousal_model": self.arousal_label,
            **self.report.to_dict(),
        }


@dataclass
class TrainOutcome:
    families: list[FamilyResult]
    selected_index: int
    n_train: int
    n_test: int

    @property
    def selected(self) -> FamilyResult:
        return self.families[self.selected_index]

    def family(self, name: str) -> FamilyResult:
        for f in self.families:
            if f.family == name:
                return f
        raise KeyError(name)

    def to_dict(self) -> dict:
        return {
            "n_train": self.n_train,
            "n_test": self.n_test,
            "families": [f.to_dict() for f in self.families],
            "selected": self.selected.family,
        }

    def format_table(self) -> str:
        header = (
            f"{'Method':<16} {'Valence model':<34} {'Acc.':>7} "
            f"{'Arousal model':<34} {'Acc.':>7} {'Quad.':>7}"
        )
        lines = [header, "-" * len(header)]
        for f in self.families:
            r = f.report
            lines.append(
                f"{f.family:<16} {f.valence_label:<34} {r.valence_accuracy:>6.1%} "
                f"{f.arousal_label:<34} {r.arousal_accuracy:>6.1%} {r.quadrant_accuracy:>6.1%}"
            )
        lines.append(f"selected: {self.selected.family}")
        return "\n".join(lines)


def train_families(
    ds: LearningDataset,
    seed: int = 0,
    k: int = 10,
    grid: GridConfig = GridConfig(),
    test_fraction: float = 0.25,
) -> TrainOutcome:
    """Run the full comparison: CV per family per axis, hold-out scoring,
    and selection by quadrant accuracy with simplicity tie-breaks."""
    n = len(ds)
    train_idx, test_idx = split_train_test(n, test_fraction, seed)
    X_tr = np.ascontiguousarray(ds.X[train_idx])
    X_te = np.ascontiguousarray(ds.X[test_idx])
    users_tr = [ds.user_ids[i] for i in train_idx]
    users_te = [ds.user_ids[i] for i in test_idx]
    yv_tr, yv_te = ds.y_v[train_idx], ds.y_v[test_idx]
    ya_tr, ya_te = ds.y_a[train_idx], ds.y_a[test_idx]
    presort_tr = _kernels.presort_columns(X_tr)

    def cv(mode: str, y: np.ndarray, kinds: list[str]) -> Candidate:
        cands = make_grid(kinds, grid, seed)
        best, _ = _cv_axis(X_tr, y, users_tr, mode, cands, k, seed)
        return best

    families: list[FamilyResult] = []

    # Classification: independent binary classifiers per axis.
    best_v = cv("classification", yv_tr, [RANDOM_FOREST, BAGGING])
    best_a = cv("classification", ya_tr, [RANDOM_FOREST, BAGGING])
    clf_model = PairedAxisModel(
        valence=fit_candidate(best_v, X_tr, (yv_tr >= 0.5).astype(np.int64), CLASSIFICATION, presort_tr),
        arousal=fit_candidate(best_a, X_tr, (ya_tr >= 0.5).astype(np.int64), CLASSIFICATION, presort_tr),
    )
    families.append(
        FamilyResult(
            FAMILY_CLASSIFICATION,
            best_v.label,
            best_a.label,
            clf_model,
            evaluate(clf_model, X_te, users_te, yv_te, ya_te),
        )
    )

    # Regression on the continuous axes, quantized for accuracy.
    reg_kinds = [RANDOM_FOREST, BAGGING, ADABOOST_R2, LINEAR]
    best_v = cv("regression", yv_tr, reg_kinds)
    best_a = cv("regression", ya_tr, reg_kinds)
    reg_model = PairedAxisModel(
        valence=fit_candidate(best_v, X_tr, yv_tr, REGRESSION, presort_tr),
        arousal=fit_candidate(best_a, X_tr, ya_tr, REGRESSION, presort_tr),
    )
    families.append(
        FamilyResult(
            FAMILY_REGRESSION,
            best_v.label,
            best_a.label,
            reg_model,
            evaluate(reg_model, X_te, users_te, yv_te, ya_te),
        )
    )

    # Personalized: deviation-from-baseline regression, RF for valence
    # deviation and AdaBoost.R2 for arousal deviation.
    best_v = cv("personalized", yv_tr, [RANDOM_FOREST])
    best_a = cv("personalized", ya_tr, [ADABOOST_R2])
    pers_model = fit_personalized(
        X_tr, yv_tr, ya_tr, users_tr, valence_params=best_v.params, arousal_params=best_a.params
    )
    families.append(
        FamilyResult(
            FAMILY_PERSONALIZED,
            f"Personalized {best_v.label}",
            f"Personalized {best_a.label}",
            pers_model,
            evaluate(pers_model, X_te, users_te, yv_te, ya_te),
        )
    )

    # Most-frequent baseline per axis.
    base_model = PairedAxisModel(
        valence=fit_most_frequent((yv_tr >= 0.5).astype(np.int64)),
        arousal=fit_most_frequent((ya_tr >= 0.5).astype(np.int64)),
    )
    families.append(
        FamilyResult(
            FAMILY_BASELINE,
            "Most frequent",
            "Most frequent",
            base_model,
            evaluate(base_model, X_te, users_te, yv_te, ya_te),
        )
    )

    from .evaluation import select_model

    selected = select_model([(f.model, f.report) for f in families])
    return TrainOutcome(
        families=families, selected_index=selected, n_train=len(train_idx), n_test=len(test_idx)
    )
