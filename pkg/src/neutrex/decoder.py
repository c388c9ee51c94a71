"""Parameter-code decoder: blendshapes, joint regression, linear blend skinning.

A code is the triple (beta, pose, psi): identity-shape coefficients, a
6-vector pose holding the global and jaw axis-angle rotations, and expression
coefficients. Decoding follows the standard articulated-blendshape recipe:

    rest    = template + shape_basis . beta + expression_basis . psi
    joints  = joint_regressor . rest
    posed   = lbs(rest + pose_correctives(pose), joints, pose)

Neck and eye joints exist in the assets but are pinned to identity; only the
root (global) and jaw rotations are driven by the 6-vector pose.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .assets import NUM_JOINTS, ModelAssets
from .errors import ValidationError

#: Index of the jaw joint in the asset joint order (root, neck, jaw, eyes).
JAW_JOINT = 2

_SMALL_ANGLE = 1e-8


@dataclass(frozen=True)
class ParamCode:
    """One sample's parameter code."""

    sample_id: str
    beta: np.ndarray
    pose: np.ndarray  # (6,) = [global axis-angle, jaw axis-angle], radians
    psi: np.ndarray

    def __post_init__(self):
        if not isinstance(self.sample_id, str) or not self.sample_id:
            raise ValidationError("sample_id must be a non-empty string")
        for name in ("beta", "pose", "psi"):
            arr = np.asarray(getattr(self, name), dtype=np.float64)
            if arr.ndim != 1:
                raise ValidationError(f"{name} must be a 1-D vector, got shape {arr.shape}")
            if not np.all(np.isfinite(arr)):
                raise ValidationError(f"{name} contains non-finite values (sample '{self.sample_id}')")
            object.__setattr__(self, name, arr)
        if self.pose.shape != (6,):
            raise ValidationError(f"pose must have 6 entries, got {self.pose.shape[0]}")

    @property
    def global_rotation(self) -> np.ndarray:
        return self.pose[:3]

    @property
    def jaw_rotation(self) -> np.ndarray:
        return self.pose[3:]


@dataclass(frozen=True)
class FaceMesh:
    """A decoded mesh; ``faces`` is shared by reference with the assets."""

    vertices: np.ndarray  # (V, 3)
    faces: np.ndarray | None = None
    per_vertex_scalar: np.ndarray | None = None

    def __post_init__(self):
        verts = np.asarray(self.vertices, dtype=np.float64)
        if verts.ndim != 2 or verts.shape[1] != 3:
            raise ValidationError(f"vertices must have shape (V, 3), got {verts.shape}")
        if not np.all(np.isfinite(verts)):
            raise ValidationError("mesh vertices contain non-finite values")
        object.__setattr__(self, "vertices", verts)
        if self.per_vertex_scalar is not None:
            scalar = np.asarray(self.per_vertex_scalar, dtype=np.float64)
            if scalar.shape != (verts.shape[0],):
                raise ValidationError("per_vertex_scalar length must match vertex count")
            object.__setattr__(self, "per_vertex_scalar", scalar)

    @property
    def num_vertices(self) -> int:
        return self.vertices.shape[0]


def rodrigues(axis_angle: Sequence[float] | np.ndarray) -> np.ndarray:
    """Axis-angle (magnitude = angle in radians) to a 3x3 rotation matrix.

    The zero vector maps to the identity exactly; angles below 1e-8 use the
    second-order series, which is accurate to well under 1e-12 there.
    """
    aa = np.asarray(axis_angle, dtype=np.float64).reshape(3)
    if not np.all(np.isfinite(aa)):
        raise ValidationError("axis-angle contains non-finite values")
    x, y, z = aa
    k = np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])
    angle = float(np.linalg.norm(aa))
    if angle < _SMALL_ANGLE:
        return np.eye(3) + k + 0.5 * (k @ k)
    k /= angle
    return np.eye(3) + np.sin(angle) * k + (1.0 - np.cos(angle)) * (k @ k)


def _pose_rotations(pose: np.ndarray) -> np.ndarray:
    """Per-joint rotations (5, 3, 3): root and jaw from the pose, rest identity."""
    pose = np.asarray(pose, dtype=np.float64).reshape(6)
    rots = np.tile(np.eye(3), (NUM_JOINTS, 1, 1))
    rots[0] = rodrigues(pose[:3])
    rots[JAW_JOINT] = rodrigues(pose[3:])
    return rots


def blend_shapes(assets: ModelAssets, beta: np.ndarray, psi: np.ndarray) -> np.ndarray:
    """Rest-pose vertices: template plus shape and expression displacements."""
    beta = np.asarray(beta, dtype=np.float64)
    psi = np.asarray(psi, dtype=np.float64)
    if beta.shape != (assets.n_beta,):
        raise ValidationError(f"beta has shape {beta.shape}, assets expect ({assets.n_beta},)")
    if psi.shape != (assets.n_psi,):
        raise ValidationError(f"psi has shape {psi.shape}, assets expect ({assets.n_psi},)")
    return (
        assets.template
        + np.einsum("vck,k->vc", assets.shape_basis, beta)
        + np.einsum("vck,k->vc", assets.expression_basis, psi)
    )


def regress_joints(assets: ModelAssets, rest_vertices: np.ndarray) -> np.ndarray:
    """Joint positions (5, 3) regressed from the blended rest mesh."""
    rest_vertices = np.asarray(rest_vertices, dtype=np.float64)
    if rest_vertices.shape != (assets.num_vertices, 3):
        raise ValidationError(
            f"rest vertices shape {rest_vertices.shape} does not match assets ({assets.num_vertices}, 3)"
        )
    return assets.joint_regressor @ rest_vertices


def pose_correctives(assets: ModelAssets, pose: np.ndarray) -> np.ndarray:
    """Pose-dependent corrective offsets (V, 3).

    The feature vector concatenates vec(R_j - I) over the four non-root
    joints in asset order; identity joints contribute zero features, so the
    offsets vanish at pose zero and depend only on the jaw block for
    jaw-only poses.
    """
    pose = np.asarray(pose, dtype=np.float64)
    if pose.shape != (6,):
        raise ValidationError(f"pose must have 6 entries, got {pose.shape}")
    rots = _pose_rotations(pose)
    features = (rots[1:] - np.eye(3)).reshape(-1)
    return np.einsum("vcf,f->vc", assets.pose_basis, features)


def lbs(
    assets: ModelAssets,
    rest_vertices: np.ndarray,
    joints: np.ndarray,
    pose: np.ndarray,
) -> np.ndarray:
    """Linear blend skinning of ``rest_vertices`` around ``joints``.

    World transforms are composed along the kinematic chain (global rotation
    at the root, jaw rotation at the jaw joint, identity elsewhere); each
    vertex is the skin-weighted sum of its rest position expressed relative
    to every joint and carried through that joint's world transform.
    """
    rest_vertices = np.asarray(rest_vertices, dtype=np.float64)
    joints = np.asarray(joints, dtype=np.float64)
    if rest_vertices.shape != (assets.num_vertices, 3):
        raise ValidationError(
            f"rest vertices shape {rest_vertices.shape} does not match assets ({assets.num_vertices}, 3)"
        )
    if joints.shape != (NUM_JOINTS, 3):
        raise ValidationError(f"joints must have shape ({NUM_JOINTS}, 3), got {joints.shape}")

    rots = _pose_rotations(pose)
    world_rot = np.empty((NUM_JOINTS, 3, 3))
    world_pos = np.empty((NUM_JOINTS, 3))
    for j in range(NUM_JOINTS):
        parent = int(assets.parents[j])
        if parent < 0:
            world_rot[j] = rots[j]
            world_pos[j] = joints[j]
        else:
            world_rot[j] = world_rot[parent] @ rots[j]
            world_pos[j] = world_pos[parent] + world_rot[parent] @ (joints[j] - joints[parent])

    # x_j(v) = R_j^w (v - j_j) + t_j^w, blended with the skinning weights.
    rotated = np.einsum("jab,vb->jva", world_rot, rest_vertices)
    offsets = world_pos - np.einsum("jab,jb->ja", world_rot, joints)
    posed = np.einsum("vj,jva->va", assets.skin_weights, rotated + offsets[:, None, :])
    if not np.all(np.isfinite(posed)):
        raise ValidationError("skinning produced non-finite vertex positions")
    return posed


def decode(assets: ModelAssets, code: ParamCode) -> FaceMesh:
    """Decode a parameter code to a posed face mesh. Pure and deterministic."""
    rest = blend_shapes(assets, code.beta, code.psi)
    joints = regress_joints(assets, rest)
    posed_rest = rest + pose_correctives(assets, code.pose)
    vertices = lbs(assets, posed_rest, joints, code.pose)
    return FaceMesh(vertices=vertices, faces=assets.faces)
