"""Versioned text serialization of fitted models.

The artifact is a single JSON document: format id, model payload
(flattened tree node arrays, stage weights, baselines), the feature
vocabulary needed to rebuild vectors at serving time, and the spatial
context (work location, per-user home estimates). Floats round-trip
bit-exactly through Python's repr-based JSON encoding.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..sensing import FeatureSpec
from .ensembles import EnsembleModel, EnsembleParams, LinearModel, PairedAxisModel
from .personalized import PersonalizedModel
from .trees import Tree

FORMAT_ID = "moodbot-model"
FORMAT_VERSION = 1


class ModelFormatError(ValueError):
    """Unrecognized or corrupt model artifact."""


def _params_to_dict(p: EnsembleParams) -> dict:
    return {
        "n_estimators": p.n_estimators,
        "max_depth": p.max_depth,
        "min_leaf": p.min_leaf,
        "learning_rate": p.learning_rate,
        "max_samples": p.max_samples,
        "bootstrap": p.bootstrap,
        "feature_subset": p.feature_subset,
        "seed": p.seed,
    }


def _params_from_dict(d: dict) -> EnsembleParams:
    return EnsembleParams(**d)


def _ensemble_to_dict(m: EnsembleModel) -> dict:
    d = {
        "type": "ensemble",
        "kind": m.kind,
        "task": m.task,
        "params": _params_to_dict(m.params),
        "n_classes": m.n_classes,
        "constant": m.constant,
        "weights": None if m.weights is None else m.weights.tolist(),
        "estimators": [],
    }
    for est in m.estimators:
        if isinstance(est, Tree):
            d["estimators"].append({"type": "tree", **est.to_dict()})
        elif isinstance(est, LinearModel):
            d["estimators"].append(
                {"type": "linear", "coef": est.coef.tolist(), "intercept": est.intercept}
            )
        else:
            raise ModelFormatError(f"unserializable estimator {type(est).__name__}")
    return d


def _ensemble_from_dict(d: dict) -> EnsembleModel:
    estimators = []
    for e in d["estimators"]:
        if e["type"] == "tree":
            estimators.append(Tree.from_dict(e))
        elif e["type"] == "linear":
            estimators.append(
                LinearModel(coef=np.asarray(e["coef"], dtype=np.float64), intercept=e["intercept"])
            )
        else:
            raise ModelFormatError(f"unknown estimator type {e['type']!r}")
    weights = d.get("weights")
    return EnsembleModel(
        kind=d["kind"],
        task=d["task"],
        params=_params_from_dict(d["params"]),
        estimators=estimators,
        weights=None if weights is None else np.asarray(weights, dtype=np.float64),
        constant=d.get("constant"),
        n_classes=d["n_classes"],
    )


def model_to_dict(model) -> dict:
    if isinstance(model, EnsembleModel):
        return _ensemble_to_dict(model)
    if isinstance(model, PairedAxisModel):
        return {
            "type": "paired",
            "valence": _ensemble_to_dict(model.valence),
            "arousal": _ensemble_to_dict(model.arousal),
        }
    if isinstance(model, PersonalizedModel):
        return {
            "type": "personalized",
            "baselines": {u: list(b) for u, b in sorted(model.baselines.items())},
            "global_baseline": list(model.global_baseline),
            "valence": _ensemble_to_dict(model.valence_model),
            "arousal": _ensemble_to_dict(model.arousal_model),
        }
    raise ModelFormatError(f"unserializable model {type(model).__name__}")


def model_from_dict(d: dict):
    kind = d.get("type")
    if kind == "ensemble":
        return _ensemble_from_dict(d)
    if kind == "paired":
        return PairedAxisModel(
            valence=_ensemble_from_dict(d["valence"]),
            arousal=_ensemble_from_dict(d["arousal"]),
        )
    if kind == "personalized":
        return PersonalizedModel(
            baselines={u: (b[0], b[1]) for u, b in d["baselines"].items()},
            global_baseline=tuple(d["global_baseline"]),
            valence_model=_ensemble_from_dict(d["valence"]),
            arousal_model=_ensemble_from_dict(d["arousal"]),
        )
    raise ModelFormatError(f"unknown model type {kind!r}")


@dataclass
class ModelArtifact:
    """A deployable model plus everything needed to featurize requests."""

    model: object
    feature_spec: FeatureSpec
    work: tuple[float, float]
    homes: dict[str, tuple[float, float]]
    meta: dict

    def to_json(self) -> str:
        doc = {
            "format": FORMAT_ID,
            "version": FORMAT_VERSION,
            "model": model_to_dict(self.model),
            "features": {
                "users": list(self.feature_spec.users),
                "genders": list(self.feature_spec.genders),
                "names": self.feature_spec.feature_names,
            },
            "context": {
                "work": list(self.work),
                "homes": {u: list(h) for u, h in sorted(self.homes.items())},
            },
            "meta": self.meta,
        }
        return json.dumps(doc, sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_json(cls, text: str) -> "ModelArtifact":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ModelFormatError(f"not valid JSON: {exc}") from exc
        if doc.get("format") != FORMAT_ID:
            raise ModelFormatError(f"unknown format id {doc.get('format')!r}")
        if doc.get("version") != FORMAT_VERSION:
            raise ModelFormatError(f"unsupported version {doc.get('version')!r}")
        feats = doc["features"]
        ctx = doc["context"]
        return cls(
            model=model_from_dict(doc["model"]),
            feature_spec=FeatureSpec(users=tuple(feats["users"]), genders=tuple(feats["genders"])),
            work=(ctx["work"][0], ctx["work"][1]),
            homes={u: (h[0], h[1]) for u, h in ctx["homes"].items()},
            meta=doc.get("meta", {}),
        )


def save_model(path, artifact: ModelArtifact) -> None:
    Path(path).write_text(artifact.to_json() + "\n", encoding="utf-8")


def load_model(path) -> ModelArtifact:
    return ModelArtifact.from_json(Path(path).read_text(encoding="utf-8"))
