"""Hold-out splitting, k-fold cross validation, accuracy reports, and the
performance/simplicity/explainability model-selection rule."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .. import stats
from ..circumplex import QUADRANT_ORDER, Quadrant, quadrant_of
from .ensembles import EnsembleModel


class SplitError(ValueError):
    """Too few rows to split."""


class ValidationError(ValueError):
    """Cross-validation misuse (fewer rows than folds)."""


class EvaluationError(ValueError):
    """Evaluation on an empty test set."""


def split_train_test(
    n_rows: int, test_fraction: float = 0.25, seed: int = 0
) -> tuple[np.ndarray, np.ndarray]:
    """Seeded shuffle split; train size is floor(n * (1 - test_fraction))."""
    if n_rows < 4:
        raise SplitError(f"need at least 4 rows to split, got {n_rows}")
    if not 0.0 < test_fraction < 1.0:
        raise SplitError(f"test_fraction must be in (0, 1), got {test_fraction}")
    order = np.random.default_rng(seed).permutation(n_rows)
    n_train = int(n_rows * (1.0 - test_fraction))
    return np.sort(order[:n_train]), np.sort(order[n_train:])


def kfold_indices(n_rows: int, k: int, seed: int) -> list[tuple[np.ndarray, np.ndarray]]:
    """Seeded fold assignment; fold sizes differ by at most one."""
    if n_rows < k:
        raise ValidationError(f"need at least k={k} rows, got {n_rows}")
    order = np.random.default_rng(seed).permutation(n_rows)
    folds = np.array_split(order, k)
    out = []
    for i in range(k):
        val = np.sort(folds[i])
        train = np.sort(np.concatenate([folds[j] for j in range(k) if j != i]))
        out.append((train, val))
    return out


def cross_validate(
    candidates: Sequence,
    fit_score: Callable,
    n_rows: int,
    k: int = 10,
    seed: int = 0,
):
    """Pick the grid candidate with the best mean fold score.

    `fit_score(candidate, train_idx, val_idx) -> float` does one fold.
    Ties go to the simpler candidate: fewer estimators, then shallower
    trees, then grid order. Returns (best_candidate, mean_scores).
    """
    if not candidates:
        raise ValidationError("empty candidate grid")
    folds = kfold_indices(n_rows, k, seed)
    means = []
    for cand in candidates:
        scores = [fit_score(cand, tr, va) for tr, va in folds]
        means.append(sum(scores) / len(scores))
    return pick_best(candidates, means), means


def _default_complexity(candidate) -> tuple:
    params = getattr(candidate, "params", candidate)
    e = getattr(params, "n_estimators", 1)
    depth = getattr(params, "max_depth", None)
    return (e, float("inf") if depth is None else depth)


def pick_best(candidates: Sequence, means: Sequence[float]):
    """Best mean score; ties resolve to fewer estimators, then shallower
    depth, then grid order."""
    ranked = sorted(
        range(len(candidates)),
        key=lambda i: (-means[i],) + _default_complexity(candidates[i]) + (i,),
    )
    return candidates[ranked[0]]


@dataclass
class EvalReport:
    """Per-axis and joint-quadrant accuracy of quantized predictions."""

    valence_accuracy: float
    arousal_accuracy: float
    quadrant_accuracy: float
    pearson_v: float | None
    pearson_a: float | None
    n: int
    confusion: list[list[int]]  # rows: true quadrant, cols: predicted (TL,TR,BL,BR)

    def to_dict(self) -> dict:
        return {
            "valence_accuracy": self.valence_accuracy,
            "arousal_accuracy": self.arousal_accuracy,
            "quadrant_accuracy": self.quadrant_accuracy,
            "pearson_v": self.pearson_v,
            "pearson_a": self.pearson_a,
            "n": self.n,
            "confusion": self.confusion,
        }


def _safe_pearson(pred: np.ndarray, truth: np.ndarray) -> float | None:
    try:
        return stats.pearson(pred.tolist(), truth.tolist())
    except stats.UndefinedStatisticError:
        return None  # zero-variance predictions: undefined, never 0


def quadrant_labels(v: np.ndarray, a: np.ndarray) -> list[Quadrant]:
    return [quadrant_of(bool(vi >= 0.5), bool(ai >= 0.5)) for vi, ai in zip(v, a)]


def evaluate(model, X, user_ids, y_v, y_a) -> EvalReport:
    """Quantize continuous predictions at 0.5 per axis and score them."""
    n = len(y_v)
    if n == 0:
        raise EvaluationError("empty test set")
    pred_v, pred_a = model.predict_mood(X, user_ids)
    v_ok = (pred_v >= 0.5) == (np.asarray(y_v) >= 0.5)
    a_ok = (pred_a >= 0.5) == (np.asarray(y_a) >= 0.5)
    order = {q: i for i, q in enumerate(QUADRANT_ORDER)}
    confusion = [[0] * 4 for _ in range(4)]
    for tq, pq in zip(quadrant_labels(y_v, y_a), quadrant_labels(pred_v, pred_a)):
        confusion[order[tq]][order[pq]] += 1
    return EvalReport(
        valence_accuracy=float(v_ok.mean()),
        arousal_accuracy=float(a_ok.mean()),
        quadrant_accuracy=float((v_ok & a_ok).mean()),
        pearson_v=_safe_pearson(pred_v, np.asarray(y_v, dtype=float)),
        pearson_a=_safe_pearson(pred_a, np.asarray(y_a, dtype=float)),
        n=n,
        confusion=confusion,
    )


def model_complexity(model) -> tuple[int, int]:
    """(total estimator count, explainability rank) for tie-breaking."""
    if isinstance(model, EnsembleModel):
        return model.estimator_count, model.kind_rank
    parts = getattr(model, "axis_models", None)
    if parts is None:
        raise TypeError(f"cannot rank model {type(model).__name__}")
    counts = sum(m.estimator_count for m in parts)
    rank = max(m.kind_rank for m in parts)
    return counts, rank


def select_model(candidates: Sequence[tuple[object, EvalReport]]) -> int:
    """Index of the winner: quadrant accuracy, then simplicity, then
    the explainability proxy of the model kind."""
    if not candidates:
        raise ValueError("no candidates to select from")
    keys = []
    for i, (model, report) in enumerate(candidates):
        count, rank = model_complexity(model)
        keys.append((-report.quadrant_accuracy, count, rank, i))
    return min(range(len(candidates)), key=lambda i: keys[i])
