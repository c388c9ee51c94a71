"""File formats for the pipeline.

Parameter codes and embeddings travel as JSONL, scores and comparison
tables as CSV, and calibration / anchor / curve summaries as JSON. Writers
are byte-deterministic: keys are sorted, floats use shortest round-trip
formatting, line endings are always "\\n", and no absolute paths are embedded
in any artifact.
"""

from __future__ import annotations

import csv
import json
from typing import Iterable, Mapping, Sequence

import numpy as np

from .assets import ModelAssets
from .decoder import ParamCode, decode
from .errors import ValidationError
from .evaluation import ComparisonRecord, DetCurve, EdcCurve, LabeledScore
from .scoring import Calibration, NeutralAnchor, QualityScore
from .svm import Embedding, SvmScore

SCORES_HEADER = ["sample_id", "raw_distance", "neutrex"]
SVM_SCORES_HEADER = ["sample_id", "decision_value", "quality"]
COMPARISONS_HEADER = ["probe_id", "reference_id", "similarity", "mated"]
LABELS_HEADER = ["sample_id", "label"]


def _write_json(path, payload) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(payload, fh, sort_keys=True, indent=2, allow_nan=False)
        fh.write("\n")


def _read_json(path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            payload = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"not valid JSON: {exc}") from exc
    if not isinstance(payload, dict):
        raise ValidationError("expected a JSON object at top level")
    return payload


def _require(payload: Mapping, keys: Sequence[str], what: str) -> None:
    for key in keys:
        if key not in payload:
            raise ValidationError(f"{what} is missing key '{key}'")


def _csv_writer(fh):
    return csv.writer(fh, lineterminator="\n")


# --- parameter codes -------------------------------------------------------

def read_codes_jsonl(path) -> list[ParamCode]:
    """Read codes from JSONL; errors name the offending line number."""
    codes = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                row = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValidationError(f"codes JSONL line {lineno}: not valid JSON ({exc.msg})") from exc
            if not isinstance(row, dict):
                raise ValidationError(f"codes JSONL line {lineno}: expected an object")
            _require(row, ("sample_id", "beta", "pose", "psi"), f"codes JSONL line {lineno}")
            try:
                codes.append(
                    ParamCode(
                        sample_id=row["sample_id"],
                        beta=np.asarray(row["beta"], dtype=np.float64),
                        pose=np.asarray(row["pose"], dtype=np.float64),
                        psi=np.asarray(row["psi"], dtype=np.float64),
                    )
                )
            except (ValidationError, TypeError, ValueError) as exc:
                raise ValidationError(f"codes JSONL line {lineno}: {exc}") from exc
    return codes


def write_codes_jsonl(path, codes: Iterable[ParamCode]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for code in codes:
            row = {
                "sample_id": code.sample_id,
                "beta": code.beta.tolist(),
                "pose": code.pose.tolist(),
                "psi": code.psi.tolist(),
            }
            json.dump(row, fh, sort_keys=True, separators=(",", ":"), allow_nan=False)
            fh.write("\n")


# --- calibration -----------------------------------------------------------

def read_calibration(path) -> Calibration:
    payload = _read_json(path)
    _require(payload, ("d_min", "d_max", "method", "training_sample_count"), "calibration JSON")
    return Calibration(
        d_min=float(payload["d_min"]),
        d_max=float(payload["d_max"]),
        method=str(payload["method"]),
        training_sample_count=int(payload["training_sample_count"]),
    )


def write_calibration(path, calib: Calibration) -> None:
    _write_json(
        path,
        {
            "d_min": calib.d_min,
            "d_max": calib.d_max,
            "method": calib.method,
            "training_sample_count": calib.training_sample_count,
        },
    )


# --- neutral anchor --------------------------------------------------------

def write_anchor(path, anchor: NeutralAnchor) -> None:
    """Anchor parameters as JSON; the mesh is reconstructed from assets on load."""
    _write_json(
        path,
        {
            "psi_a": anchor.psi_a.tolist(),
            "jaw": anchor.jaw.tolist(),
            "jaw_mode": anchor.jaw_mode,
            "source_count": anchor.source_count,
        },
    )


def read_anchor(path, assets: ModelAssets) -> NeutralAnchor:
    payload = _read_json(path)
    _require(payload, ("psi_a", "jaw", "jaw_mode", "source_count"), "anchor JSON")
    psi_a = np.asarray(payload["psi_a"], dtype=np.float64)
    jaw = np.asarray(payload["jaw"], dtype=np.float64)
    if psi_a.shape != (assets.n_psi,):
        raise ValidationError(
            f"anchor psi_a has shape {psi_a.shape}, assets expect ({assets.n_psi},)"
        )
    code = ParamCode(
        sample_id="__anchor__",
        beta=np.zeros(assets.n_beta),
        pose=np.concatenate([np.zeros(3), jaw]),
        psi=psi_a,
    )
    mesh = decode(assets, code)
    return NeutralAnchor(
        psi_a=psi_a,
        jaw=jaw,
        jaw_mode=str(payload["jaw_mode"]),
        source_count=int(payload["source_count"]),
        anchor_mesh=mesh,
    )


# --- score tables ----------------------------------------------------------

def write_scores_csv(path, scores: Iterable[QualityScore]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = _csv_writer(fh)
        writer.writerow(SCORES_HEADER)
        for s in scores:
            writer.writerow([s.sample_id, repr(float(s.raw_distance)), repr(float(s.neutrex))])


def write_svm_scores_csv(path, scores: Iterable[SvmScore]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = _csv_writer(fh)
        writer.writerow(SVM_SCORES_HEADER)
        for s in scores:
            writer.writerow([s.sample_id, repr(float(s.decision_value)), repr(float(s.quality))])


def read_qualities_csv(path) -> dict[str, float]:
    """Read sample_id -> quality from a scores CSV.

    Accepts both score table flavors: the quality column is ``neutrex`` or
    ``quality``, whichever the header provides.
    """
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise ValidationError("scores CSV is empty")
        if "sample_id" not in reader.fieldnames:
            raise ValidationError("scores CSV has no 'sample_id' column")
        for column in ("neutrex", "quality"):
            if column in reader.fieldnames:
                break
        else:
            raise ValidationError("scores CSV has neither a 'neutrex' nor a 'quality' column")
        out: dict[str, float] = {}
        for lineno, row in enumerate(reader, start=2):
            sid = row["sample_id"]
            if not sid:
                raise ValidationError(f"scores CSV line {lineno}: empty sample_id")
            if sid in out:
                raise ValidationError(f"scores CSV line {lineno}: duplicate sample_id '{sid}'")
            try:
                out[sid] = float(row[column])
            except (TypeError, ValueError) as exc:
                raise ValidationError(f"scores CSV line {lineno}: bad {column} value") from exc
    if not out:
        raise ValidationError("scores CSV has no data rows")
    return out


def read_raw_values_csv(path) -> list[float]:
    """Read the raw value column from a score table.

    Accepts both flavors: ``raw_distance`` (distance scores) or
    ``decision_value`` (SVM scores).
    """
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise ValidationError("scores CSV is empty")
        for column in ("raw_distance", "decision_value"):
            if column in reader.fieldnames:
                break
        else:
            raise ValidationError(
                "scores CSV has neither a 'raw_distance' nor a 'decision_value' column"
            )
        values = []
        for lineno, row in enumerate(reader, start=2):
            try:
                values.append(float(row[column]))
            except (TypeError, ValueError) as exc:
                raise ValidationError(f"scores CSV line {lineno}: bad {column} value") from exc
    if not values:
        raise ValidationError("scores CSV has no data rows")
    return values


# --- embeddings ------------------------------------------------------------

def read_embeddings_jsonl(path) -> list[Embedding]:
    embeddings = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                row = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValidationError(
                    f"embeddings JSONL line {lineno}: not valid JSON ({exc.msg})"
                ) from exc
            if not isinstance(row, dict):
                raise ValidationError(f"embeddings JSONL line {lineno}: expected an object")
            _require(row, ("sample_id", "vector"), f"embeddings JSONL line {lineno}")
            try:
                embeddings.append(
                    Embedding(
                        sample_id=row["sample_id"],
                        vector=np.asarray(row["vector"], dtype=np.float64),
                    )
                )
            except (ValidationError, TypeError, ValueError) as exc:
                raise ValidationError(f"embeddings JSONL line {lineno}: {exc}") from exc
    return embeddings


def write_embeddings_jsonl(path, embeddings: Iterable[Embedding]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for emb in embeddings:
            row = {"sample_id": emb.sample_id, "vector": emb.vector.tolist()}
            json.dump(row, fh, sort_keys=True, separators=(",", ":"), allow_nan=False)
            fh.write("\n")


# --- comparisons and labels ------------------------------------------------

def read_comparisons_csv(path) -> list[ComparisonRecord]:
    records = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise ValidationError("comparisons CSV is empty")
        for column in COMPARISONS_HEADER:
            if column not in reader.fieldnames:
                raise ValidationError(f"comparisons CSV has no '{column}' column")
        for lineno, row in enumerate(reader, start=2):
            mated_raw = row["mated"]
            if mated_raw not in ("0", "1"):
                raise ValidationError(
                    f"comparisons CSV line {lineno}: mated must be 0 or 1, got {mated_raw!r}"
                )
            try:
                records.append(
                    ComparisonRecord(
                        probe_id=row["probe_id"],
                        reference_id=row["reference_id"],
                        similarity=float(row["similarity"]),
                        mated=mated_raw == "1",
                    )
                )
            except (ValidationError, TypeError, ValueError) as exc:
                raise ValidationError(f"comparisons CSV line {lineno}: {exc}") from exc
    if not records:
        raise ValidationError("comparisons CSV has no data rows")
    return records


def write_comparisons_csv(path, records: Iterable[ComparisonRecord]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = _csv_writer(fh)
        writer.writerow(COMPARISONS_HEADER)
        for rec in records:
            writer.writerow(
                [rec.probe_id, rec.reference_id, repr(float(rec.similarity)), int(rec.mated)]
            )


def read_labels_csv(path) -> dict[str, str]:
    labels: dict[str, str] = {}
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise ValidationError("labels CSV is empty")
        for column in LABELS_HEADER:
            if column not in reader.fieldnames:
                raise ValidationError(f"labels CSV has no '{column}' column")
        for lineno, row in enumerate(reader, start=2):
            sid, label = row["sample_id"], row["label"]
            if not sid or not label:
                raise ValidationError(f"labels CSV line {lineno}: empty sample_id or label")
            if sid in labels:
                raise ValidationError(f"labels CSV line {lineno}: duplicate sample_id '{sid}'")
            labels[sid] = label
    if not labels:
        raise ValidationError("labels CSV has no data rows")
    return labels


def write_labels_csv(path, labels: Mapping[str, str]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = _csv_writer(fh)
        writer.writerow(LABELS_HEADER)
        for sid in labels:
            writer.writerow([sid, labels[sid]])


def join_labels(qualities: Mapping[str, float], labels: Mapping[str, str]) -> list[LabeledScore]:
    """Join quality values with class labels; every scored sample needs a label."""
    scores = []
    for sid in qualities:
        if sid not in labels:
            raise ValidationError(f"sample '{sid}' has a quality but no label")
        scores.append(LabeledScore(sample_id=sid, quality=qualities[sid], label=labels[sid]))
    return scores


# --- curve outputs ---------------------------------------------------------

def write_det_outputs(csv_path, json_path, curve: DetCurve, config: Mapping) -> None:
    with open(csv_path, "w", encoding="utf-8", newline="") as fh:
        writer = _csv_writer(fh)
        writer.writerow(["threshold", "false_neutral_rate", "false_non_neutral_rate"])
        for t, fner, fnnr in zip(
            curve.thresholds, curve.false_neutral_rates, curve.false_non_neutral_rates
        ):
            writer.writerow([repr(float(t)), repr(float(fner)), repr(float(fnnr))])
    _write_json(json_path, {"d_eer": curve.d_eer, "config": dict(config)})


def write_edc_outputs(csv_path, json_path, curve: EdcCurve, pauc_upper: float, config: Mapping) -> None:
    with open(csv_path, "w", encoding="utf-8", newline="") as fh:
        writer = _csv_writer(fh)
        writer.writerow(["discard_fraction", "fnmr"])
        for x, y in zip(curve.discard_fractions, curve.fnmr):
            writer.writerow([repr(float(x)), repr(float(y))])
    _write_json(
        json_path,
        {
            "pauc": curve.pauc,
            "pauc_raw": curve.pauc * pauc_upper,
            "pauc_upper": pauc_upper,
            "threshold": curve.threshold,
            "config": dict(config),
        },
    )


# --- plain value lists -----------------------------------------------------

def read_values_text(path) -> list[float]:
    """One float per line; blank lines and '#' comments are skipped."""
    values = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.strip()
            if not text or text.startswith("#"):
                continue
            try:
                values.append(float(text))
            except ValueError as exc:
                raise ValidationError(f"values file line {lineno}: not a number: {text!r}") from exc
    return values
