"""Evaluation harnesses.

Two tasks: DET curves with D-EER for neutral / non-neutral classification,
and error-vs-discard characteristic (EDC) curves with partial AUC for
utility prediction against mated comparison outcomes.

All rates are computed from integer counts, and quality ties are broken by
sample_id, so every result here is bit-reproducible and invariant under
strictly monotone transforms of the quality scores.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import DegenerateCurveError, ValidationError

NEUTRAL_LABEL = "neutral"
DEFAULT_PAUC_UPPER = 0.30
MAX_DISCARD_FRACTION = 0.98
QUANTILE_PERCENTS = (5.0, 25.0, 50.0, 75.0, 95.0)

_trapezoid = getattr(np, "trapezoid", None) or np.trapz


def default_grid() -> np.ndarray:
    """Discard fractions 0.00 to 0.30 in steps of 0.01 (31 points)."""
    grid = np.round(np.arange(31) * 0.01, 12)
    grid.setflags(write=False)
    return grid


@dataclass(frozen=True)
class LabeledScore:
    """Quality value with a ground-truth expression class."""

    sample_id: str
    quality: float
    label: str

    def __post_init__(self):
        if not isinstance(self.sample_id, str) or not self.sample_id:
            raise ValidationError("sample_id must be a non-empty string")
        q = float(self.quality)
        if not (math.isfinite(q) and 0.0 <= q <= 100.0):
            raise ValidationError(f"quality must lie in [0, 100], got {self.quality} for '{self.sample_id}'")
        if not isinstance(self.label, str) or not self.label:
            raise ValidationError(f"label missing for '{self.sample_id}'")
        object.__setattr__(self, "quality", q)

    @property
    def is_neutral(self) -> bool:
        return self.label == NEUTRAL_LABEL


@dataclass(frozen=True)
class ComparisonRecord:
    probe_id: str
    reference_id: str
    similarity: float
    mated: bool

    def __post_init__(self):
        if not self.probe_id or not self.reference_id:
            raise ValidationError("comparison ids must be non-empty")
        s = float(self.similarity)
        if not math.isfinite(s):
            raise ValidationError(
                f"similarity must be finite for pair ({self.probe_id}, {self.reference_id})"
            )
        object.__setattr__(self, "similarity", s)
        object.__setattr__(self, "mated", bool(self.mated))


@dataclass(frozen=True)
class DetCurve:
    """DET operating points swept over observed quality thresholds.

    At threshold t, false_neutral_rate = fraction of non-neutral samples with
    quality >= t and false_non_neutral_rate = fraction of neutral samples
    with quality < t.
    """

    thresholds: np.ndarray
    false_neutral_rates: np.ndarray
    false_non_neutral_rates: np.ndarray
    d_eer: float

    def __post_init__(self):
        t = np.asarray(self.thresholds, dtype=np.float64)
        fner = np.asarray(self.false_neutral_rates, dtype=np.float64)
        fnnr = np.asarray(self.false_non_neutral_rates, dtype=np.float64)
        if not (t.shape == fner.shape == fnnr.shape) or t.ndim != 1 or t.size < 2:
            raise ValidationError("DET curve needs matching 1-D arrays with at least two points")
        if np.any(np.diff(t) <= 0):
            raise ValidationError("DET thresholds must be strictly increasing")
        if np.any(np.diff(fner) > 0) or np.any(np.diff(fnnr) < 0):
            raise ValidationError("DET rates must be monotone in the threshold")
        if not 0.0 <= self.d_eer <= 1.0:
            raise ValidationError(f"d_eer must lie in [0, 1], got {self.d_eer}")
        for arr in (t, fner, fnnr):
            arr.setflags(write=False)
        object.__setattr__(self, "thresholds", t)
        object.__setattr__(self, "false_neutral_rates", fner)
        object.__setattr__(self, "false_non_neutral_rates", fnnr)


@dataclass(frozen=True)
class EdcCurve:
    discard_fractions: np.ndarray
    fnmr: np.ndarray
    pauc: float
    threshold: float

    def __post_init__(self):
        x = np.asarray(self.discard_fractions, dtype=np.float64)
        y = np.asarray(self.fnmr, dtype=np.float64)
        if x.ndim != 1 or x.shape != y.shape or x.size < 2:
            raise ValidationError("EDC curve needs matching 1-D arrays with at least two points")
        if x[0] != 0.0 or np.any(np.diff(x) <= 0) or x[-1] > MAX_DISCARD_FRACTION:
            raise ValidationError(
                f"discard fractions must start at 0, increase strictly and stay <= {MAX_DISCARD_FRACTION}"
            )
        if np.any(y < 0.0) or np.any(y > 1.0):
            raise ValidationError("fnmr values must lie in [0, 1]")
        x.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "discard_fractions", x)
        object.__setattr__(self, "fnmr", y)


def det_curve(scores: Sequence[LabeledScore]) -> DetCurve:
    """Sweep thresholds over observed qualities and locate the D-EER.

    Every label other than "neutral" counts as non-neutral. The crossing of
    the two error rates is found by linear interpolation between adjacent
    operating points, in rate space, so the result depends only on the rank
    statistics of the qualities.
    """
    neutral = np.sort([s.quality for s in scores if s.is_neutral])
    other = np.sort([s.quality for s in scores if not s.is_neutral])
    if neutral.size == 0 or other.size == 0:
        raise ValidationError("DET needs both neutral and non-neutral samples")

    observed = np.unique(np.concatenate([neutral, other]))
    thresholds = np.append(observed, np.nextafter(observed[-1], np.inf))
    # Counts via binary search on the sorted class arrays; rates are int/int.
    fnnr = np.searchsorted(neutral, thresholds, side="left") / neutral.size
    fner = (other.size - np.searchsorted(other, thresholds, side="left")) / other.size

    gap = fner - fnnr  # starts at 1, ends at -1, non-increasing
    cross = int(np.argmax(gap <= 0.0))
    g_prev, g_here = gap[cross - 1], gap[cross]
    s = g_prev / (g_prev - g_here)
    d_eer = float(fner[cross - 1] + s * (fner[cross] - fner[cross - 1]))
    d_eer = min(1.0, max(0.0, d_eer))
    return DetCurve(
        thresholds=thresholds,
        false_neutral_rates=fner,
        false_non_neutral_rates=fnnr,
        d_eer=d_eer,
    )


def threshold_from_fmr(nonmated_similarities: Iterable[float], target_fmr: float) -> float:
    """Smallest threshold with a false match rate at or below the target.

    Candidates are the observed values; if even the maximum admits too many
    matches the threshold lands just above it (nearest-rank policy).
    """
    values = np.sort(np.asarray(list(nonmated_similarities), dtype=np.float64))
    if values.size == 0:
        raise ValidationError("threshold_from_fmr needs at least one non-mated similarity")
    if not np.all(np.isfinite(values)):
        raise ValidationError("non-mated similarities contain non-finite values")
    if not (math.isfinite(target_fmr) and 0.0 <= target_fmr <= 1.0):
        raise ValidationError(f"target FMR must lie in [0, 1], got {target_fmr}")

    n = values.size
    for v in np.unique(values):
        accepted = n - int(np.searchsorted(values, v, side="left"))
        if accepted / n <= target_fmr:
            return float(v)
    return float(np.nextafter(values[-1], np.inf))


def fnmr_at_threshold(mated_similarities: Iterable[float], threshold: float) -> float:
    """Fraction of mated similarities below the threshold."""
    values = np.asarray(list(mated_similarities), dtype=np.float64)
    if values.size == 0:
        raise DegenerateCurveError("no mated comparisons remain at this operating point")
    if not np.all(np.isfinite(values)):
        raise ValidationError("mated similarities contain non-finite values")
    return int(np.count_nonzero(values < threshold)) / int(values.size)


def _validated_grid(grid) -> np.ndarray:
    g = np.asarray(default_grid() if grid is None else grid, dtype=np.float64)
    if g.ndim != 1 or g.size < 2:
        raise ValidationError("discard grid must be a 1-D array with at least two fractions")
    if g[0] != 0.0:
        raise ValidationError("discard grid must start at fraction 0")
    if np.any(np.diff(g) <= 0):
        raise ValidationError("discard grid must be strictly increasing")
    if g[-1] > MAX_DISCARD_FRACTION:
        raise ValidationError(f"discard grid must not exceed {MAX_DISCARD_FRACTION}")
    return g


def edc(
    qualities: Mapping[str, float],
    comparisons: Sequence[ComparisonRecord],
    threshold: float,
    grid=None,
    pauc_upper: float | None = None,
) -> EdcCurve:
    """Error-vs-discard curve over mated comparisons.

    Samples are discarded lowest-quality first (ties broken by sample_id);
    a comparison survives only while both of its samples survive, which is
    the same as discarding pairs by min(probe, reference) quality. For each
    grid fraction x the lowest floor(x * n) samples are dropped and the FNMR
    of the survivors at the fixed threshold is recorded.
    """
    if not qualities:
        raise ValidationError("edc needs a non-empty quality table")
    if not comparisons:
        raise ValidationError("edc needs at least one mated comparison")
    for rec in comparisons:
        if not rec.mated:
            raise ValidationError(
                f"edc expects mated comparisons only, got non-mated pair ({rec.probe_id}, {rec.reference_id})"
            )
        for sid in (rec.probe_id, rec.reference_id):
            if sid not in qualities:
                raise ValidationError(f"comparison references sample '{sid}' with no quality")
    for sid, q in qualities.items():
        if not math.isfinite(float(q)):
            raise ValidationError(f"quality for sample '{sid}' is not finite")

    g = _validated_grid(grid)
    ranked = sorted(qualities, key=lambda sid: (float(qualities[sid]), sid))
    n = len(ranked)

    fnmr_values = np.empty(g.size, dtype=np.float64)
    for i, x in enumerate(g):
        # The epsilon absorbs float wobble in x*n (e.g. 0.29*100 = 28.999...).
        n_drop = int(math.floor(float(x) * n + 1e-9))
        dropped = frozenset(ranked[:n_drop])
        survivors = [
            rec.similarity
            for rec in comparisons
            if rec.probe_id not in dropped and rec.reference_id not in dropped
        ]
        fnmr_values[i] = fnmr_at_threshold(survivors, threshold)

    upper = min(DEFAULT_PAUC_UPPER, float(g[-1])) if pauc_upper is None else float(pauc_upper)
    area = _pauc_from_points(g, fnmr_values, upper)
    return EdcCurve(discard_fractions=g, fnmr=fnmr_values, pauc=area, threshold=float(threshold))


def _pauc_from_points(fractions: np.ndarray, fnmr: np.ndarray, upper: float) -> float:
    if not (math.isfinite(upper) and 0.0 < upper <= float(fractions[-1])):
        raise ValidationError(
            f"pAUC upper bound must lie in (0, {float(fractions[-1])}], got {upper}"
        )
    keep = fractions <= upper
    xs = fractions[keep]
    ys = fnmr[keep]
    if xs[-1] < upper:
        # Interpolate the curve value at the cut point.
        j = int(np.searchsorted(fractions, upper, side="left"))
        x0, x1 = fractions[j - 1], fractions[j]
        y0, y1 = fnmr[j - 1], fnmr[j]
        y_cut = y0 + (y1 - y0) * (upper - x0) / (x1 - x0)
        xs = np.append(xs, upper)
        ys = np.append(ys, y_cut)
    return float(_trapezoid(ys, xs) / upper)


def pauc(curve: EdcCurve, upper: float = DEFAULT_PAUC_UPPER) -> float:
    """Trapezoidal area of fnmr over [0, upper], divided by upper.

    The normalization makes the value read as the average FNMR over the
    discard range; multiply by ``upper`` to recover the raw area.
    """
    return _pauc_from_points(curve.discard_fractions, curve.fnmr, upper)


@dataclass(frozen=True)
class ClassSummary:
    label: str
    count: int
    mean: float
    quantiles: dict = field(default_factory=dict)  # percent -> value, nearest-rank
    histogram: np.ndarray = None
    bin_edges: np.ndarray = None


def class_distributions(scores: Sequence[LabeledScore], bins: int = 20) -> dict:
    """Per-class histogram over [0, 100], mean and nearest-rank quantiles."""
    if bins < 1:
        raise ValidationError("bins must be >= 1")
    if not scores:
        raise ValidationError("class_distributions needs at least one score")
    by_label: dict[str, list[float]] = {}
    for s in scores:
        by_label.setdefault(s.label, []).append(s.quality)

    out: dict[str, ClassSummary] = {}
    for label in sorted(by_label):
        values = np.sort(np.asarray(by_label[label], dtype=np.float64))
        hist, edges = np.histogram(values, bins=bins, range=(0.0, 100.0))
        quantiles = {}
        for p in QUANTILE_PERCENTS:
            rank = max(1, math.ceil(p / 100.0 * values.size))
            quantiles[p] = float(values[rank - 1])
        out[label] = ClassSummary(
            label=label,
            count=int(values.size),
            mean=float(np.mean(values)),
            quantiles=quantiles,
            histogram=hist,
            bin_edges=edges,
        )
    return out
