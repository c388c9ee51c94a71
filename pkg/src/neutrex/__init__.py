"""NeutrEx: expression-neutrality quality from 3DMM parameter codes.

Decode parameter codes to meshes, measure distance to a neutral-expression
anchor, map distances to [0, 100] quality values, score RBF-SVM baselines,
and evaluate with DET / D-EER and EDC / pAUC harnesses.
"""

from .assets import ModelAssets, load_assets, save_assets
from .decoder import FaceMesh, ParamCode, decode
from .errors import DegenerateCurveError, NeutrexError, ValidationError
from .evaluation import (
    ComparisonRecord,
    DetCurve,
    EdcCurve,
    LabeledScore,
    class_distributions,
    default_grid,
    det_curve,
    edc,
    fnmr_at_threshold,
    pauc,
    threshold_from_fmr,
)
from .meshio import write_ply
from .scoring import (
    Calibration,
    NeutralAnchor,
    QualityScore,
    build_anchor,
    calibrate,
    distance,
    neutrex_score,
    normalize_code,
    per_vertex_residuals,
    score_batch,
    score_sample,
)
from .svm import Embedding, SvmModel, SvmScore, decision_value, load_svm, save_svm, svm_quality

__version__ = "0.1.0"

__all__ = [
    "Calibration",
    "ComparisonRecord",
    "DegenerateCurveError",
    "DetCurve",
    "EdcCurve",
    "Embedding",
    "FaceMesh",
    "LabeledScore",
    "ModelAssets",
    "NeutralAnchor",
    "NeutrexError",
    "ParamCode",
    "QualityScore",
    "SvmModel",
    "SvmScore",
    "ValidationError",
    "build_anchor",
    "calibrate",
    "class_distributions",
    "decision_value",
    "decode",
    "default_grid",
    "det_curve",
    "distance",
    "edc",
    "fnmr_at_threshold",
    "load_assets",
    "load_svm",
    "neutrex_score",
    "normalize_code",
    "pauc",
    "per_vertex_residuals",
    "save_assets",
    "save_svm",
    "score_batch",
    "score_sample",
    "svm_quality",
    "threshold_from_fmr",
    "write_ply",
]
