"""Command-line interface.

One binary with subcommands: anchor, calibrate, score, residuals, edc, det,
svm-score, synth. Diagnostics go to standard error; data goes to files or
standard output. Exit codes: 0 success, 1 validation error, 2 I/O or usage
error. The default assets path can come from the NEUTREX_ASSETS environment
variable.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

import numpy as np

from . import formats, scoring, svm, synth
from .assets import load_assets
from .errors import ValidationError
from .evaluation import (
    DEFAULT_PAUC_UPPER,
    det_curve,
    edc,
    threshold_from_fmr,
)
from .meshio import write_ply
from .scoring import residual_mesh

ASSETS_ENV_VAR = "NEUTREX_ASSETS"
DEFAULT_TARGET_FMR = 0.001


def _log(message: str) -> None:
    print(message, file=sys.stderr)


def _load_assets_arg(args):
    path = args.assets or os.environ.get(ASSETS_ENV_VAR)
    if not path:
        raise ValidationError(f"no assets path given (use --assets or {ASSETS_ENV_VAR})")
    return load_assets(path)


def _default_workers() -> int:
    return os.cpu_count() or 1


def _add_assets_flag(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--assets",
        help=f"model assets (.nac); defaults to the {ASSETS_ENV_VAR} environment variable",
    )


def cmd_anchor(args) -> None:
    assets = _load_assets_arg(args)
    codes = formats.read_codes_jsonl(args.codes)
    if not codes:
        raise ValidationError("neutral codes file is empty")
    anchor = scoring.build_anchor(assets, codes, jaw_mode=args.jaw_mode)
    formats.write_anchor(args.out, anchor)
    mesh_out = args.mesh_out or str(Path(args.out).with_suffix(".ply"))
    write_ply(mesh_out, anchor.anchor_mesh, comment="neutral anchor mesh")
    _log(f"anchor built from {anchor.source_count} codes -> {args.out}, mesh -> {mesh_out}")


def cmd_calibrate(args) -> None:
    if args.distances:
        values = formats.read_values_text(args.distances)
    elif args.scores:
        values = formats.read_raw_values_csv(args.scores)
    elif args.codes:
        if not args.anchor:
            raise ValidationError("--codes calibration needs --anchor")
        assets = _load_assets_arg(args)
        anchor = formats.read_anchor(args.anchor, assets)
        codes = formats.read_codes_jsonl(args.codes)
        values = scoring.distance_batch(
            assets,
            anchor,
            codes,
            jaw_policy=args.jaw_policy,
            reduction=args.reduction,
            workers=args.workers,
        )
    else:
        if not args.svm_model:
            raise ValidationError("--embeddings calibration needs --svm-model")
        model = svm.load_svm(args.svm_model)
        embeddings = formats.read_embeddings_jsonl(args.embeddings)
        values = svm.decision_values(model, embeddings)
    calib = scoring.calibrate(values, method=args.method)
    formats.write_calibration(args.out, calib)
    _log(
        f"calibrated {calib.method} on {calib.training_sample_count} values: "
        f"d_min={calib.d_min!r} d_max={calib.d_max!r} -> {args.out}"
    )


def cmd_score(args) -> None:
    assets = _load_assets_arg(args)
    anchor = formats.read_anchor(args.anchor, assets)
    calib = formats.read_calibration(args.calibration)
    codes = formats.read_codes_jsonl(args.codes)
    results = scoring.score_batch(
        assets,
        anchor,
        calib,
        codes,
        jaw_policy=args.jaw_policy,
        reduction=args.reduction,
        workers=args.workers,
    )
    formats.write_scores_csv(args.out, results)
    _log(f"scored {len(results)} codes -> {args.out}")


def cmd_residuals(args) -> None:
    assets = _load_assets_arg(args)
    anchor = formats.read_anchor(args.anchor, assets)
    codes = formats.read_codes_jsonl(args.code)
    if args.sample_id is not None:
        matches = [c for c in codes if c.sample_id == args.sample_id]
        if not matches:
            raise ValidationError(f"no code with sample_id '{args.sample_id}'")
        code = matches[0]
    elif len(codes) == 1:
        code = codes[0]
    else:
        raise ValidationError(
            f"code file holds {len(codes)} codes; expected exactly one (or use --sample-id)"
        )
    mesh = residual_mesh(assets, anchor, code, jaw_policy=args.jaw_policy)
    write_ply(args.out, mesh, comment=f"residuals sample_id={code.sample_id}")
    _log(f"residual mesh for '{code.sample_id}' -> {args.out}")


def cmd_edc(args) -> None:
    qualities = formats.read_qualities_csv(args.scores)
    records = formats.read_comparisons_csv(args.comparisons)
    mated = [r for r in records if r.mated]
    nonmated = [r.similarity for r in records if not r.mated]
    if args.threshold is not None:
        threshold = args.threshold
        config = {"threshold_policy": "explicit", "threshold": threshold}
    else:
        if not nonmated:
            raise ValidationError("no non-mated comparisons to derive a threshold from")
        threshold = threshold_from_fmr(nonmated, args.target_fmr)
        config = {"threshold_policy": "target_fmr", "target_fmr": args.target_fmr}
    grid = np.asarray([float(x) for x in args.grid.split(",")]) if args.grid else None
    curve = edc(qualities, mated, threshold, grid=grid, pauc_upper=args.pauc_upper)
    config.update({"pauc_upper": args.pauc_upper, "grid_points": int(curve.discard_fractions.size)})
    formats.write_edc_outputs(args.out_csv, args.out_json, curve, args.pauc_upper, config)
    _log(
        f"edc over {len(mated)} mated comparisons at threshold {threshold!r}: "
        f"pauc={curve.pauc!r} -> {args.out_csv}, {args.out_json}"
    )


def cmd_det(args) -> None:
    qualities = formats.read_qualities_csv(args.scores)
    labels = formats.read_labels_csv(args.labels)
    scores = formats.join_labels(qualities, labels)
    curve = det_curve(scores)
    formats.write_det_outputs(args.out_csv, args.out_json, curve, config={})
    _log(f"det over {len(scores)} samples: d_eer={curve.d_eer!r} -> {args.out_csv}, {args.out_json}")


def cmd_svm_score(args) -> None:
    model = svm.load_svm(args.model)
    calib = formats.read_calibration(args.calibration)
    embeddings = formats.read_embeddings_jsonl(args.embeddings)
    if not embeddings:
        raise ValidationError("embeddings file is empty")
    results = svm.score_embeddings(model, embeddings, calib, workers=args.workers)
    formats.write_svm_scores_csv(args.out, results)
    _log(f"scored {len(results)} embeddings -> {args.out}")


def cmd_synth(args) -> None:
    paths = synth.write_dataset(
        args.out,
        seed=args.seed,
        profile=args.profile,
        num_samples=args.num_samples,
        num_vertices=args.num_vertices,
        n_beta=args.n_beta,
        n_psi=args.n_psi,
        neutral_fraction=args.neutral_fraction,
        n_mated=args.mated,
        n_nonmated=args.nonmated,
        embedding_dim=args.embedding_dim,
    )
    for name in sorted(paths):
        _log(f"wrote {name}: {paths[name]}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="neutrex",
        description="Expression-neutrality quality from 3DMM parameter codes.",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("anchor", help="build a neutral anchor from neutral codes")
    _add_assets_flag(p)
    p.add_argument("--codes", required=True, help="neutral codes JSONL")
    p.add_argument("--out", required=True, help="output anchor JSON")
    p.add_argument("--mesh-out", help="output anchor mesh PLY (default: anchor path with .ply)")
    p.add_argument("--jaw-mode", choices=scoring.ANCHOR_JAW_MODES, default="mean")
    p.set_defaults(func=cmd_anchor)

    p = sub.add_parser("calibrate", help="fit quality-mapping bounds from training values")
    source = p.add_mutually_exclusive_group(required=True)
    source.add_argument("--distances", help="text file, one training distance per line")
    source.add_argument("--scores", help="scores CSV with a raw_distance or decision_value column")
    source.add_argument("--codes", help="codes JSONL (needs --anchor and assets)")
    source.add_argument("--embeddings", help="embeddings JSONL (needs --svm-model)")
    _add_assets_flag(p)
    p.add_argument("--anchor", help="anchor JSON, for --codes")
    p.add_argument("--svm-model", help="SVM model JSON, for --embeddings")
    p.add_argument("--method", default="exact-extrema", help="exact-extrema or percentile(lo,hi)")
    p.add_argument("--jaw-policy", choices=scoring.JAW_POLICIES, default="retain")
    p.add_argument("--reduction", choices=scoring.REDUCTIONS, default="mean")
    p.add_argument("--workers", type=int, default=_default_workers())
    p.add_argument("--out", required=True, help="output calibration JSON")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("score", help="score codes against an anchor")
    _add_assets_flag(p)
    p.add_argument("--anchor", required=True, help="anchor JSON")
    p.add_argument("--calibration", required=True, help="calibration JSON")
    p.add_argument("--codes", required=True, help="codes JSONL")
    p.add_argument("--out", required=True, help="output scores CSV")
    p.add_argument("--jaw-policy", choices=scoring.JAW_POLICIES, default="retain")
    p.add_argument("--reduction", choices=scoring.REDUCTIONS, default="mean")
    p.add_argument("--workers", type=int, default=_default_workers())
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("residuals", help="export a residual-colored mesh for one code")
    _add_assets_flag(p)
    p.add_argument("--anchor", required=True, help="anchor JSON")
    p.add_argument("--code", required=True, help="JSONL with the code to visualize")
    p.add_argument("--sample-id", help="select this sample from a multi-code file")
    p.add_argument("--out", required=True, help="output PLY")
    p.add_argument("--jaw-policy", choices=scoring.JAW_POLICIES, default="retain")
    p.set_defaults(func=cmd_residuals)

    p = sub.add_parser("edc", help="error-vs-discard curve from scores and comparisons")
    p.add_argument("--scores", required=True, help="scores CSV (neutrex or quality column)")
    p.add_argument("--comparisons", required=True, help="comparisons CSV")
    thr = p.add_mutually_exclusive_group()
    thr.add_argument("--threshold", type=float, help="explicit decision threshold")
    thr.add_argument(
        "--target-fmr",
        type=float,
        default=DEFAULT_TARGET_FMR,
        help=f"derive the threshold from non-mated scores at this FMR (default {DEFAULT_TARGET_FMR})",
    )
    p.add_argument("--grid", help="comma-separated discard fractions (default 0..0.30 step 0.01)")
    p.add_argument("--pauc-upper", type=float, default=DEFAULT_PAUC_UPPER)
    p.add_argument("--out-csv", required=True)
    p.add_argument("--out-json", required=True)
    p.set_defaults(func=cmd_edc)

    p = sub.add_parser("det", help="DET curve and D-EER from scores and labels")
    p.add_argument("--scores", required=True, help="scores CSV (neutrex or quality column)")
    p.add_argument("--labels", required=True, help="labels CSV")
    p.add_argument("--out-csv", required=True)
    p.add_argument("--out-json", required=True)
    p.set_defaults(func=cmd_det)

    p = sub.add_parser("svm-score", help="score embeddings with an RBF-SVM baseline")
    p.add_argument("--model", required=True, help="SVM model JSON")
    p.add_argument("--embeddings", required=True, help="embeddings JSONL")
    p.add_argument("--calibration", required=True, help="calibration JSON over decision values")
    p.add_argument("--out", required=True, help="output scores CSV")
    p.add_argument("--workers", type=int, default=_default_workers())
    p.set_defaults(func=cmd_svm_score)

    p = sub.add_parser("synth", help="generate a seeded synthetic dataset directory")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--profile", choices=("random", "head"), default="random")
    p.add_argument("--num-samples", type=int, default=60)
    p.add_argument("--num-vertices", type=int, default=200)
    p.add_argument("--n-beta", type=int, default=8)
    p.add_argument("--n-psi", type=int, default=10)
    p.add_argument("--neutral-fraction", type=float, default=0.5)
    p.add_argument("--mated", type=int, default=150)
    p.add_argument("--nonmated", type=int, default=300)
    p.add_argument("--embedding-dim", type=int, default=16)
    p.set_defaults(func=cmd_synth)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 2
    return 0
