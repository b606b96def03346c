"""Personalization wrapper: per-user mood baselines plus deviation regressors.

Each user's training-set mean (v_b, a_b) anchors their predictions; the
regressors model only the deviation from that anchor. Valence deviation
uses a random forest and arousal deviation AdaBoost.R2 — the pairing
that wins model selection — and predictions are clamped back to [0, 1].
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .ensembles import EnsembleModel, EnsembleParams, fit_adaboost_r2, fit_random_forest
from .trees import REGRESSION, TrainingError


def user_baselines(
    user_ids: Sequence[str], y_v, y_a
) -> tuple[dict[str, tuple[float, float]], tuple[float, float]]:
    """Per-user training means and the global fallback (mean of baselines)."""
    if len(user_ids) == 0:
        raise TrainingError("no rows to compute baselines from")
    sums: dict[str, list[float]] = {}
    for u, v, a in zip(user_ids, y_v, y_a):
        acc = sums.setdefault(u, [0.0, 0.0, 0.0])
        acc[0] += float(v)
        acc[1] += float(a)
        acc[2] += 1.0
    baselines = {u: (s[0] / s[2], s[1] / s[2]) for u, s in sorted(sums.items())}
    vs = [b[0] for b in baselines.values()]
    as_ = [b[1] for b in baselines.values()]
    return baselines, (sum(vs) / len(vs), sum(as_) / len(as_))


@dataclass
class PersonalizedModel:
    baselines: dict[str, tuple[float, float]]
    global_baseline: tuple[float, float]
    valence_model: EnsembleModel
    arousal_model: EnsembleModel

    @property
    def axis_models(self) -> tuple[EnsembleModel, EnsembleModel]:
        return self.valence_model, self.arousal_model

    def baseline_for(self, user_id: str) -> tuple[float, float]:
        return self.baselines.get(user_id, self.global_baseline)

    def predict_mood(self, X, user_ids) -> tuple[np.ndarray, np.ndarray]:
        X = np.asarray(X, dtype=np.float64)
        dev_v = self.valence_model.predict(X)
        dev_a = self.arousal_model.predict(X)
        base = np.array([self.baseline_for(u) for u in user_ids], dtype=np.float64)
        v = np.clip(base[:, 0] + dev_v, 0.0, 1.0)
        a = np.clip(base[:, 1] + dev_a, 0.0, 1.0)
        return v, a


def fit_personalized(
    X,
    y_v,
    y_a,
    user_ids: Sequence[str],
    valence_params: EnsembleParams = EnsembleParams(n_estimators=10),
    arousal_params: EnsembleParams = EnsembleParams(n_estimators=50),
) -> PersonalizedModel:
    X = np.asarray(X, dtype=np.float64)
    if X.shape[0] != len(user_ids):
        raise TrainingError("X and user_ids length mismatch")
    baselines, global_baseline = user_baselines(user_ids, y_v, y_a)
    base = np.array([baselines[u] for u in user_ids], dtype=np.float64)
    dev_v = np.asarray(y_v, dtype=np.float64) - base[:, 0]
    dev_a = np.asarray(y_a, dtype=np.float64) - base[:, 1]
    return PersonalizedModel(
        baselines=baselines,
        global_baseline=global_baseline,
        valence_model=fit_random_forest(X, dev_v, REGRESSION, valence_params),
        arousal_model=fit_adaboost_r2(X, dev_a, arousal_params),
    )
