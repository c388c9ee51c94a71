"""Expression-neutrality scoring.

The pipeline per sample: strip identity shape and global pose from the code,
decode it, measure the per-vertex distance to a neutral-expression anchor
mesh, and map that distance to a [0, 100] quality value by clipped min-max
scaling.

Two conventions are configurable because either reading is defensible:

* jaw policy: the jaw rotation is retained under normalization by default
  (open-mouth expressions then register as large distances); ``"zero"``
  closes the jaw as well.
* distance reduction: mean per-vertex norm by default; ``"sum"`` and
  ``"frobenius"`` are available for comparability with accumulated-distance
  conventions.
"""

from __future__ import annotations

import math
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .assets import ModelAssets
from .decoder import FaceMesh, ParamCode, decode
from .errors import ValidationError

JAW_POLICIES = ("retain", "zero")
ANCHOR_JAW_MODES = ("mean", "zero")
REDUCTIONS = ("mean", "sum", "frobenius")

_PERCENTILE_RE = re.compile(r"^percentile\(\s*([0-9.]+)\s*,\s*([0-9.]+)\s*\)$")


@dataclass(frozen=True)
class NeutralAnchor:
    """Average neutral expression code and its decoded mesh."""

    psi_a: np.ndarray
    jaw: np.ndarray  # (3,) jaw axis-angle used when decoding the anchor
    jaw_mode: str  # "mean" | "zero"
    source_count: int
    anchor_mesh: FaceMesh

    def __post_init__(self):
        psi = np.asarray(self.psi_a, dtype=np.float64)
        jaw = np.asarray(self.jaw, dtype=np.float64)
        if psi.ndim != 1 or not np.all(np.isfinite(psi)):
            raise ValidationError("anchor psi must be a finite 1-D vector")
        if jaw.shape != (3,) or not np.all(np.isfinite(jaw)):
            raise ValidationError("anchor jaw must be a finite 3-vector")
        if self.jaw_mode not in ANCHOR_JAW_MODES:
            raise ValidationError(f"unknown anchor jaw mode '{self.jaw_mode}'")
        if self.source_count < 1:
            raise ValidationError("anchor must be built from at least one code")
        object.__setattr__(self, "psi_a", psi)
        object.__setattr__(self, "jaw", jaw)


@dataclass(frozen=True)
class Calibration:
    """Min-max bounds for the quality mapping.

    Bounds come from training-set distances (nonnegative by construction) or
    from SVM decision values (signed), so only ordering and finiteness are
    enforced here.
    """

    d_min: float
    d_max: float
    method: str
    training_sample_count: int

    def __post_init__(self):
        if not (math.isfinite(self.d_min) and math.isfinite(self.d_max)):
            raise ValidationError("calibration bounds must be finite")
        if not self.d_min < self.d_max:
            raise ValidationError(f"calibration requires d_min < d_max, got ({self.d_min}, {self.d_max})")


@dataclass(frozen=True)
class QualityScore:
    sample_id: str
    raw_distance: float
    neutrex: float


def normalize_code(code: ParamCode, jaw_policy: str = "retain") -> ParamCode:
    """Zero the identity shape and global rotation; keep expression.

    The jaw rotation is retained or zeroed per ``jaw_policy``. Idempotent,
    and constant over codes that differ only in beta or global rotation.
    """
    if jaw_policy not in JAW_POLICIES:
        raise ValidationError(f"unknown jaw policy '{jaw_policy}'")
    pose = np.zeros(6)
    if jaw_policy == "retain":
        pose[3:] = code.pose[3:]
    return ParamCode(
        sample_id=code.sample_id,
        beta=np.zeros_like(code.beta),
        pose=pose,
        psi=code.psi.copy(),
    )


def build_anchor(
    assets: ModelAssets,
    neutral_codes: Sequence[ParamCode],
    jaw_mode: str = "mean",
) -> NeutralAnchor:
    """Average the neutral expression codes and decode the anchor mesh.

    The anchor is decoded with zero shape, zero global rotation and a jaw of
    either the neutral-sample mean (default) or exactly zero.
    """
    if jaw_mode not in ANCHOR_JAW_MODES:
        raise ValidationError(f"unknown anchor jaw mode '{jaw_mode}'")
    codes = list(neutral_codes)
    if not codes:
        raise ValidationError("cannot build an anchor from an empty code list")
    n_psi = codes[0].psi.shape[0]
    for code in codes:
        if code.psi.shape[0] != n_psi:
            raise ValidationError(
                f"psi length mismatch in anchor codes: '{code.sample_id}' has {code.psi.shape[0]}, expected {n_psi}"
            )
    if n_psi != assets.n_psi:
        raise ValidationError(f"anchor codes have n_psi={n_psi}, assets expect {assets.n_psi}")

    psi_a = np.mean(np.stack([c.psi for c in codes]), axis=0)
    if jaw_mode == "mean":
        jaw = np.mean(np.stack([c.jaw_rotation for c in codes]), axis=0)
    else:
        jaw = np.zeros(3)
    anchor_code = ParamCode(
        sample_id="__anchor__",
        beta=np.zeros(assets.n_beta),
        pose=np.concatenate([np.zeros(3), jaw]),
        psi=psi_a,
    )
    mesh = decode(assets, anchor_code)
    return NeutralAnchor(psi_a=psi_a, jaw=jaw, jaw_mode=jaw_mode, source_count=len(codes), anchor_mesh=mesh)


def per_vertex_residuals(mesh: FaceMesh, anchor: NeutralAnchor) -> np.ndarray:
    """Euclidean distance of each vertex to the anchor's matching vertex."""
    ref = anchor.anchor_mesh.vertices
    if mesh.vertices.shape != ref.shape:
        raise ValidationError(
            f"vertex count mismatch: mesh has {mesh.num_vertices}, anchor has {ref.shape[0]}"
        )
    return np.linalg.norm(mesh.vertices - ref, axis=1)


def distance(mesh: FaceMesh, anchor: NeutralAnchor, reduction: str = "mean") -> float:
    """Scalar distance to the anchor.

    ``mean`` (default) averages the per-vertex norms, so the mean of
    :func:`per_vertex_residuals` equals this value exactly.
    """
    res = per_vertex_residuals(mesh, anchor)
    if reduction == "mean":
        return float(np.mean(res))
    if reduction == "sum":
        return float(np.sum(res))
    if reduction == "frobenius":
        return float(np.sqrt(np.sum(res * res)))
    raise ValidationError(f"unknown reduction '{reduction}'")


def _nearest_rank(sorted_values: np.ndarray, percent: float) -> float:
    n = sorted_values.shape[0]
    rank = max(1, math.ceil(percent / 100.0 * n))
    return float(sorted_values[rank - 1])


def parse_calibration_method(method: str) -> tuple[str, tuple[float, float] | None]:
    """Split a method string into its kind and optional percentile bounds."""
    if method == "exact-extrema":
        return "exact-extrema", None
    m = _PERCENTILE_RE.match(method)
    if m:
        p_lo, p_hi = float(m.group(1)), float(m.group(2))
        if not (0.0 <= p_lo < p_hi <= 100.0):
            raise ValidationError(f"percentile bounds must satisfy 0 <= p_lo < p_hi <= 100, got {method!r}")
        return "percentile", (p_lo, p_hi)
    raise ValidationError(f"unknown calibration method {method!r} (use 'exact-extrema' or 'percentile(lo,hi)')")


def calibrate(training_distances: Iterable[float], method: str = "exact-extrema") -> Calibration:
    """Determine (d_min, d_max) from training distances.

    ``exact-extrema`` takes the raw min and max; ``percentile(lo,hi)`` takes
    nearest-rank empirical quantiles, which is robust to single outliers.
    """
    values = np.asarray(list(training_distances), dtype=np.float64)
    if values.ndim != 1 or values.size < 2:
        raise ValidationError("calibration needs at least two training distances")
    if not np.all(np.isfinite(values)):
        raise ValidationError("training distances contain non-finite values")
    if np.unique(values).size < 2:
        raise ValidationError("degenerate range: fewer than two distinct training distances")

    kind, bounds = parse_calibration_method(method)
    if kind == "exact-extrema":
        d_min, d_max = float(values.min()), float(values.max())
        canonical = "exact-extrema"
    else:
        p_lo, p_hi = bounds
        ordered = np.sort(values)
        d_min = _nearest_rank(ordered, p_lo)
        d_max = _nearest_rank(ordered, p_hi)
        if not d_min < d_max:
            raise ValidationError(
                f"degenerate range: percentiles ({p_lo:g}, {p_hi:g}) give d_min == d_max == {d_min}"
            )
        canonical = f"percentile({p_lo:g},{p_hi:g})"
    return Calibration(d_min=d_min, d_max=d_max, method=canonical, training_sample_count=int(values.size))


def neutrex_score(d: float, calib: Calibration) -> float:
    """Map a distance to a quality value: 100 * (1 - (d - d_min)/(d_max - d_min)), clipped to [0, 100]."""
    d = float(d)
    if not math.isfinite(d):
        raise ValidationError(f"distance must be finite, got {d}")
    quality = 100.0 * (1.0 - (d - calib.d_min) / (calib.d_max - calib.d_min))
    return min(100.0, max(0.0, quality))


def distance_for_code(
    assets: ModelAssets,
    anchor: NeutralAnchor,
    code: ParamCode,
    jaw_policy: str = "retain",
    reduction: str = "mean",
) -> float:
    """normalize -> decode -> distance, for one code."""
    mesh = decode(assets, normalize_code(code, jaw_policy=jaw_policy))
    return distance(mesh, anchor, reduction=reduction)


def distance_batch(
    assets: ModelAssets,
    anchor: NeutralAnchor,
    codes: Sequence[ParamCode],
    jaw_policy: str = "retain",
    reduction: str = "mean",
    workers: int = 1,
) -> list[float]:
    """Raw distances for a batch; output order follows input order."""
    if workers < 1:
        raise ValidationError("workers must be >= 1")

    def one(code: ParamCode) -> float:
        return distance_for_code(assets, anchor, code, jaw_policy=jaw_policy, reduction=reduction)

    if workers == 1 or len(codes) < 2:
        return [one(c) for c in codes]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(one, codes))


def score_sample(
    assets: ModelAssets,
    anchor: NeutralAnchor,
    calib: Calibration,
    code: ParamCode,
    jaw_policy: str = "retain",
    reduction: str = "mean",
) -> QualityScore:
    """normalize -> decode -> distance -> quality, for one code."""
    d = distance_for_code(assets, anchor, code, jaw_policy=jaw_policy, reduction=reduction)
    return QualityScore(sample_id=code.sample_id, raw_distance=d, neutrex=neutrex_score(d, calib))


def score_batch(
    assets: ModelAssets,
    anchor: NeutralAnchor,
    calib: Calibration,
    codes: Sequence[ParamCode],
    jaw_policy: str = "retain",
    reduction: str = "mean",
    workers: int = 1,
) -> list[QualityScore]:
    """Score a batch of codes; output order follows input order for any worker count."""
    if workers < 1:
        raise ValidationError("workers must be >= 1")

    def one(code: ParamCode) -> QualityScore:
        return score_sample(assets, anchor, calib, code, jaw_policy=jaw_policy, reduction=reduction)

    if workers == 1 or len(codes) < 2:
        return [one(c) for c in codes]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(one, codes))


def residual_mesh(
    assets: ModelAssets,
    anchor: NeutralAnchor,
    code: ParamCode,
    jaw_policy: str = "retain",
) -> FaceMesh:
    """Decode a code and attach its per-vertex residuals as the mesh scalar."""
    mesh = decode(assets, normalize_code(code, jaw_policy=jaw_policy))
    res = per_vertex_residuals(mesh, anchor)
    return FaceMesh(vertices=mesh.vertices, faces=mesh.faces, per_vertex_scalar=res)
