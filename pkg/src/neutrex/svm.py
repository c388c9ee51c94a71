"""RBF-SVM baseline scoring.

Inference only: pre-trained one-class or two-class models arrive as JSON,
face embeddings arrive as JSONL, and quality is the min-max scaled decision
value. Larger decision values sit deeper inside the neutral cluster, so the
quality orientation is flipped relative to the distance-based mapping.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import ValidationError
from .scoring import Calibration

SVM_MODES = ("one-class", "two-class")


@dataclass(frozen=True)
class SvmModel:
    """Serialized RBF-SVM decision function."""

    mode: str
    gamma: float
    support_vectors: np.ndarray  # (n_sv, d)
    dual_coefs: np.ndarray  # (n_sv,)
    intercept: float
    nu: float | None = None  # one-class training hyperparameter, metadata only

    def __post_init__(self):
        if self.mode not in SVM_MODES:
            raise ValidationError(f"unknown SVM mode '{self.mode}'")
        if not (math.isfinite(self.gamma) and self.gamma > 0):
            raise ValidationError(f"gamma must be positive and finite, got {self.gamma}")
        sv = np.asarray(self.support_vectors, dtype=np.float64)
        coefs = np.asarray(self.dual_coefs, dtype=np.float64)
        if sv.ndim != 2 or sv.shape[0] < 1:
            raise ValidationError("support_vectors must be a non-empty (n_sv, d) array")
        if coefs.shape != (sv.shape[0],):
            raise ValidationError(
                f"dual_coefs has shape {coefs.shape}, expected ({sv.shape[0]},)"
            )
        if not (np.all(np.isfinite(sv)) and np.all(np.isfinite(coefs))):
            raise ValidationError("support vectors and dual coefficients must be finite")
        if not math.isfinite(self.intercept):
            raise ValidationError(f"intercept must be finite, got {self.intercept}")
        if self.nu is not None and not (0.0 < self.nu <= 1.0):
            raise ValidationError(f"nu must lie in (0, 1], got {self.nu}")
        sv.setflags(write=False)
        coefs.setflags(write=False)
        object.__setattr__(self, "support_vectors", sv)
        object.__setattr__(self, "dual_coefs", coefs)

    @property
    def n_support(self) -> int:
        return self.support_vectors.shape[0]

    @property
    def dim(self) -> int:
        return self.support_vectors.shape[1]


@dataclass(frozen=True)
class Embedding:
    sample_id: str
    vector: np.ndarray

    def __post_init__(self):
        if not isinstance(self.sample_id, str) or not self.sample_id:
            raise ValidationError("embedding sample_id must be a non-empty string")
        vec = np.asarray(self.vector, dtype=np.float64)
        if vec.ndim != 1 or vec.size < 1 or not np.all(np.isfinite(vec)):
            raise ValidationError(f"embedding '{self.sample_id}' must be a finite 1-D vector")
        vec.setflags(write=False)
        object.__setattr__(self, "vector", vec)


@dataclass(frozen=True)
class SvmScore:
    sample_id: str
    decision_value: float
    quality: float


def decision_value(model: SvmModel, emb: Embedding) -> float:
    """f(x) = sum_i dual_coefs[i] * exp(-gamma * ||x - sv_i||^2) + intercept.

    Terms are accumulated in support-vector index order in 64-bit floats so
    the result is bit-reproducible for a given model file.
    """
    x = emb.vector
    if x.shape[0] != model.dim:
        raise ValidationError(
            f"embedding '{emb.sample_id}' has dimension {x.shape[0]}, model expects {model.dim}"
        )
    diffs = model.support_vectors - x
    sq_dists = np.einsum("md,md->m", diffs, diffs)
    terms = model.dual_coefs * np.exp(-model.gamma * sq_dists)
    acc = 0.0
    for t in terms:
        acc += float(t)
    return acc + model.intercept


def svm_quality(value: float, calib: Calibration) -> float:
    """100 * clip((value - v_min) / (v_max - v_min), 0, 1).

    Orientation is flipped relative to the distance mapping: decision values
    grow with neutrality, so larger values earn higher quality.
    """
    value = float(value)
    if not math.isfinite(value):
        raise ValidationError(f"decision value must be finite, got {value}")
    frac = (value - calib.d_min) / (calib.d_max - calib.d_min)
    return 100.0 * min(1.0, max(0.0, frac))


def score_embeddings(
    model: SvmModel,
    embeddings: Sequence[Embedding],
    calib: Calibration,
    workers: int = 1,
) -> list[SvmScore]:
    """Decision values and qualities for a batch; output order follows input order."""
    if workers < 1:
        raise ValidationError("workers must be >= 1")

    def one(emb: Embedding) -> SvmScore:
        v = decision_value(model, emb)
        return SvmScore(sample_id=emb.sample_id, decision_value=v, quality=svm_quality(v, calib))

    if workers == 1 or len(embeddings) < 2:
        return [one(e) for e in embeddings]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(one, embeddings))


def decision_values(model: SvmModel, embeddings: Iterable[Embedding]) -> list[float]:
    """Uncalibrated decision values, e.g. to derive calibration bounds."""
    return [decision_value(model, e) for e in embeddings]


def load_svm(path) -> SvmModel:
    """Read a model from JSON: {"mode","gamma","support_vectors","dual_coefs","intercept",?"nu"}."""
    with open(path, "r", encoding="utf-8") as fh:
        try:
            payload = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"SVM model file is not valid JSON: {exc}") from exc
    if not isinstance(payload, dict):
        raise ValidationError("SVM model JSON must be an object")
    required = ("mode", "gamma", "support_vectors", "dual_coefs", "intercept")
    for key in required:
        if key not in payload:
            raise ValidationError(f"SVM model JSON missing key '{key}'")
    return SvmModel(
        mode=payload["mode"],
        gamma=float(payload["gamma"]),
        support_vectors=np.asarray(payload["support_vectors"], dtype=np.float64),
        dual_coefs=np.asarray(payload["dual_coefs"], dtype=np.float64),
        intercept=float(payload["intercept"]),
        nu=float(payload["nu"]) if payload.get("nu") is not None else None,
    )


def save_svm(path, model: SvmModel) -> None:
    payload = {
        "mode": model.mode,
        "gamma": model.gamma,
        "support_vectors": model.support_vectors.tolist(),
        "dual_coefs": model.dual_coefs.tolist(),
        "intercept": model.intercept,
    }
    if model.nu is not None:
        payload["nu"] = model.nu
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True, separators=(",", ":"))
        fh.write("\n")
