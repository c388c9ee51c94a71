"""Blendshape face model assets: loading, validation, immutability.

The asset bundle follows the FLAME layout: a template mesh, shape and
expression displacement bases, a pose-corrective basis, a joint regressor for
five joints (root, neck, jaw, left eye, right eye) and per-vertex skinning
weights over those joints.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ValidationError
from .nac import read_nac, write_nac

JOINT_NAMES = ("root", "neck", "jaw", "left_eye", "right_eye")
NUM_JOINTS = 5
NUM_POSE_FEATURES = 36  # 4 non-root joints x 9 rotation-residual entries

#: u32 sentinel marking "no parent" on the root joint in container files.
ROOT_PARENT_SENTINEL = 0xFFFFFFFF

REQUIRED_ARRAYS = (
    "template",
    "faces",
    "shape_basis",
    "expression_basis",
    "pose_basis",
    "joint_regressor",
    "skin_weights",
    "parents",
)

_SKIN_SUM_TOL = 1e-5


def _require_finite(name: str, arr: np.ndarray) -> None:
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"array '{name}': contains non-finite values")


@dataclass(frozen=True)
class ModelAssets:
    """Immutable decoder assets.

    All float arrays are float64 internally regardless of on-disk precision;
    skinning weight rows are renormalised to exact unit sums on construction
    so the identity pose reproduces the template to float64 accuracy.
    """

    template: np.ndarray  # (V, 3)
    faces: np.ndarray  # (F, 3) int
    shape_basis: np.ndarray  # (V, 3, n_beta)
    expression_basis: np.ndarray  # (V, 3, n_psi)
    pose_basis: np.ndarray  # (V, 3, 36)
    joint_regressor: np.ndarray  # (5, V)
    skin_weights: np.ndarray  # (V, 5)
    parents: np.ndarray = field(default_factory=lambda: np.array([-1, 0, 1, 1, 1]))  # (5,)

    def __post_init__(self):
        conv = {
            "template": np.asarray(self.template, dtype=np.float64),
            "faces": np.asarray(self.faces, dtype=np.int64),
            "shape_basis": np.asarray(self.shape_basis, dtype=np.float64),
            "expression_basis": np.asarray(self.expression_basis, dtype=np.float64),
            "pose_basis": np.asarray(self.pose_basis, dtype=np.float64),
            "joint_regressor": np.asarray(self.joint_regressor, dtype=np.float64),
            "skin_weights": np.asarray(self.skin_weights, dtype=np.float64),
            "parents": np.asarray(self.parents, dtype=np.int64),
        }
        _validate_asset_arrays(conv)
        # Exact partition of unity; file payloads are f32 and their row sums
        # carry ~1e-7 rounding that would otherwise leak into every decode.
        weights = conv["skin_weights"]
        conv["skin_weights"] = weights / weights.sum(axis=1, keepdims=True)
        for name, arr in conv.items():
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def num_vertices(self) -> int:
        return self.template.shape[0]

    @property
    def num_faces(self) -> int:
        return self.faces.shape[0]

    @property
    def n_beta(self) -> int:
        return self.shape_basis.shape[2]

    @property
    def n_psi(self) -> int:
        return self.expression_basis.shape[2]


def _validate_asset_arrays(arrays: dict[str, np.ndarray]) -> None:
    template = arrays["template"]
    if template.ndim != 2 or template.shape[1] != 3 or template.shape[0] < 1:
        raise ValidationError(f"array 'template': expected shape (N_V, 3), got {template.shape}")
    _require_finite("template", template)
    n_v = template.shape[0]

    faces = arrays["faces"]
    if faces.ndim != 2 or faces.shape[1] != 3 or faces.shape[0] < 1:
        raise ValidationError(f"array 'faces': expected shape (N_F, 3), got {faces.shape}")
    if faces.min() < 0 or faces.max() >= n_v:
        raise ValidationError(f"array 'faces': vertex indices must be in [0, {n_v})")

    for name, n_last in (("shape_basis", None), ("expression_basis", None), ("pose_basis", NUM_POSE_FEATURES)):
        basis = arrays[name]
        if basis.ndim != 3 or basis.shape[0] != n_v or basis.shape[1] != 3:
            raise ValidationError(f"array '{name}': expected shape ({n_v}, 3, k), got {basis.shape}")
        if n_last is not None and basis.shape[2] != n_last:
            raise ValidationError(f"array '{name}': expected {n_last} features, got {basis.shape[2]}")
        _require_finite(name, basis)

    regressor = arrays["joint_regressor"]
    if regressor.shape != (NUM_JOINTS, n_v):
        raise ValidationError(
            f"array 'joint_regressor': expected shape ({NUM_JOINTS}, {n_v}), got {regressor.shape}"
        )
    _require_finite("joint_regressor", regressor)

    weights = arrays["skin_weights"]
    if weights.shape != (n_v, NUM_JOINTS):
        raise ValidationError(f"array 'skin_weights': expected shape ({n_v}, {NUM_JOINTS}), got {weights.shape}")
    _require_finite("skin_weights", weights)
    if weights.min() < 0:
        row = int(np.argwhere(weights < 0)[0][0])
        raise ValidationError(f"array 'skin_weights': row {row} has a negative weight")
    sums = weights.sum(axis=1)
    bad = np.abs(sums - 1.0) > _SKIN_SUM_TOL
    if np.any(bad):
        row = int(np.argmax(bad))
        raise ValidationError(
            f"array 'skin_weights': row {row} sums to {sums[row]:.6f} (expected 1 within {_SKIN_SUM_TOL:g})"
        )

    parents = arrays["parents"]
    if parents.shape != (NUM_JOINTS,):
        raise ValidationError(f"array 'parents': expected shape ({NUM_JOINTS},), got {parents.shape}")
    if parents[0] != -1:
        raise ValidationError("array 'parents': root joint must have no parent (sentinel)")
    for j in range(1, NUM_JOINTS):
        if not 0 <= parents[j] < j:
            raise ValidationError(f"array 'parents': parent of joint {j} must precede it, got {parents[j]}")


def load_assets(path: str | Path) -> ModelAssets:
    """Load and validate model assets from a .nac container.

    f32 payloads are widened to float64. Raises ValidationError naming the
    offending array on any structural or numeric problem.
    """
    raw = read_nac(path)
    for name in REQUIRED_ARRAYS:
        if name not in raw:
            raise ValidationError(f"missing array '{name}'")
    for name in ("faces", "parents"):
        if raw[name].dtype != np.dtype("<u4"):
            raise ValidationError(f"array '{name}': expected u32 storage")
    for name in REQUIRED_ARRAYS:
        if name not in ("faces", "parents") and raw[name].dtype != np.dtype("<f4"):
            raise ValidationError(f"array '{name}': expected f32 storage")

    parents = raw["parents"].astype(np.int64)
    parents[parents == ROOT_PARENT_SENTINEL] = -1
    return ModelAssets(
        template=raw["template"],
        faces=raw["faces"].astype(np.int64),
        shape_basis=raw["shape_basis"],
        expression_basis=raw["expression_basis"],
        pose_basis=raw["pose_basis"],
        joint_regressor=raw["joint_regressor"],
        skin_weights=raw["skin_weights"],
        parents=parents,
    )


def save_assets(path: str | Path, assets: ModelAssets) -> None:
    """Write assets to a .nac container (floats downcast to f32)."""
    parents = assets.parents.astype(np.int64).copy()
    parents[parents < 0] = ROOT_PARENT_SENTINEL
    write_nac(
        path,
        {
            "template": assets.template,
            "faces": assets.faces.astype(np.uint32),
            "shape_basis": assets.shape_basis,
            "expression_basis": assets.expression_basis,
            "pose_basis": assets.pose_basis,
            "joint_regressor": assets.joint_regressor,
            "skin_weights": assets.skin_weights,
            "parents": parents.astype(np.uint32),
        },
    )
