import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from neutrex import synth
from neutrex.decoder import (
    FaceMesh,
    ParamCode,
    blend_shapes,
    decode,
    lbs,
    pose_correctives,
    regress_joints,
    rodrigues,
)
from neutrex.errors import ValidationError

from .reference import naive_decode, quat_rotation_matrix


def _zero_code(assets, sample_id="zero"):
    return ParamCode(
        sample_id=sample_id,
        beta=np.zeros(assets.n_beta),
        pose=np.zeros(6),
        psi=np.zeros(assets.n_psi),
    )


def _random_code(rng, assets, max_angle=np.pi):
    return ParamCode(
        sample_id="r",
        beta=rng.normal(size=assets.n_beta),
        pose=rng.uniform(-max_angle, max_angle, size=6),
        psi=rng.normal(size=assets.n_psi),
    )


# --- rodrigues ---------------------------------------------------------------

@settings(max_examples=50, deadline=None)
@given(
    st.lists(st.floats(-3.0, 3.0), min_size=3, max_size=3),
)
def test_rodrigues_matches_quaternion_oracle(axis_angle):
    ours = rodrigues(np.array(axis_angle))
    reference = quat_rotation_matrix(axis_angle)
    assert np.allclose(ours, reference, atol=1e-12)


@pytest.mark.parametrize("scale", [0.0, 1e-12, 1e-9, 1e-8, 1e-6])
def test_rodrigues_small_angles(scale):
    axis_angle = np.array([0.6, -0.8, 0.0]) * scale
    ours = rodrigues(axis_angle)
    reference = quat_rotation_matrix(axis_angle)
    assert np.allclose(ours, reference, atol=1e-15)


def test_rodrigues_zero_is_identity():
    assert np.array_equal(rodrigues(np.zeros(3)), np.eye(3))


def test_rodrigues_is_orthonormal():
    rng = np.random.default_rng(0)
    for _ in range(20):
        rot = rodrigues(rng.uniform(-np.pi, np.pi, size=3))
        assert np.allclose(rot @ rot.T, np.eye(3), atol=1e-13)
        assert np.linalg.det(rot) == pytest.approx(1.0, abs=1e-13)


# --- param code / mesh types ---------------------------------------------------

def test_param_code_validation():
    with pytest.raises(ValidationError):
        ParamCode(sample_id="", beta=np.zeros(2), pose=np.zeros(6), psi=np.zeros(2))
    with pytest.raises(ValidationError, match="pose"):
        ParamCode(sample_id="x", beta=np.zeros(2), pose=np.zeros(5), psi=np.zeros(2))
    with pytest.raises(ValidationError):
        ParamCode(sample_id="x", beta=np.array([np.inf]), pose=np.zeros(6), psi=np.zeros(2))


def test_face_mesh_scalar_length_check(toy_assets):
    with pytest.raises(ValidationError):
        FaceMesh(
            vertices=toy_assets.template,
            faces=toy_assets.faces,
            per_vertex_scalar=np.zeros(toy_assets.num_vertices + 1),
        )


# --- blendshapes -----------------------------------------------------------------

def test_blend_shapes_zero_is_template(toy_assets):
    rest = blend_shapes(toy_assets, np.zeros(toy_assets.n_beta), np.zeros(toy_assets.n_psi))
    assert np.array_equal(rest, toy_assets.template)


def test_blend_shapes_is_linear(toy_assets):
    rng = np.random.default_rng(5)
    beta = rng.normal(size=toy_assets.n_beta)
    psi = rng.normal(size=toy_assets.n_psi)
    a = blend_shapes(toy_assets, beta, psi) - toy_assets.template
    b = blend_shapes(toy_assets, 2.0 * beta, 2.0 * psi) - toy_assets.template
    assert np.allclose(b, 2.0 * a, atol=1e-12)


def test_blend_shapes_rejects_bad_lengths(toy_assets):
    with pytest.raises(ValidationError, match="beta"):
        blend_shapes(toy_assets, np.zeros(toy_assets.n_beta + 1), np.zeros(toy_assets.n_psi))
    with pytest.raises(ValidationError, match="psi"):
        blend_shapes(toy_assets, np.zeros(toy_assets.n_beta), np.zeros(toy_assets.n_psi + 2))


def test_pose_correctives_zero_pose_is_zero(toy_assets):
    assert np.array_equal(pose_correctives(toy_assets, np.zeros(6)), np.zeros((12, 3)))


def test_pose_correctives_jaw_only_uses_jaw_features(toy_assets):
    # Zero out the jaw feature block; a jaw-only pose then has no correctives.
    arrays = {
        "template": toy_assets.template.copy(),
        "faces": toy_assets.faces.copy(),
        "shape_basis": toy_assets.shape_basis.copy(),
        "expression_basis": toy_assets.expression_basis.copy(),
        "pose_basis": toy_assets.pose_basis.copy(),
        "joint_regressor": toy_assets.joint_regressor.copy(),
        "skin_weights": toy_assets.skin_weights.copy(),
    }
    arrays["pose_basis"][:, :, 9:18] = 0.0
    from neutrex.assets import ModelAssets

    masked = ModelAssets(**arrays)
    pose = np.array([0.0, 0.0, 0.0, 0.4, -0.2, 0.1])
    assert np.array_equal(pose_correctives(masked, pose), np.zeros((12, 3)))
    # With the block intact the correctives are nonzero.
    assert np.any(pose_correctives(toy_assets, pose) != 0.0)


# --- decode ----------------------------------------------------------------------

def test_decode_identity_toy(toy_assets):
    mesh = decode(toy_assets, _zero_code(toy_assets))
    assert np.abs(mesh.vertices - toy_assets.template).max() <= 1e-12
    assert mesh.faces is toy_assets.faces


def test_decode_matches_naive_reference(toy_assets):
    rng = np.random.default_rng(17)
    for _ in range(10):
        code = _random_code(rng, toy_assets)
        ours = decode(toy_assets, code).vertices
        reference = naive_decode(
            toy_assets.template,
            toy_assets.shape_basis,
            toy_assets.expression_basis,
            toy_assets.pose_basis,
            toy_assets.joint_regressor,
            toy_assets.skin_weights,
            toy_assets.parents,
            code.beta,
            code.pose,
            code.psi,
        )
        assert np.abs(ours - reference).max() <= 1e-9


def test_global_rotation_is_rigid_about_root(toy_assets):
    rng = np.random.default_rng(23)
    axis_angle = rng.uniform(-1.5, 1.5, size=3)
    code = ParamCode(
        sample_id="g",
        beta=np.zeros(toy_assets.n_beta),
        pose=np.concatenate([axis_angle, np.zeros(3)]),
        psi=np.zeros(toy_assets.n_psi),
    )
    mesh = decode(toy_assets, code)
    rot = rodrigues(axis_angle)
    root = regress_joints(toy_assets, toy_assets.template)[0]
    expected = (toy_assets.template - root) @ rot.T + root
    assert np.abs(mesh.vertices - expected).max() <= 1e-12


def test_decode_rigid_equivariance(toy_assets):
    """Adding a global rotation rigidly transforms the rest of the decode."""
    rng = np.random.default_rng(29)
    base = _random_code(rng, toy_assets, max_angle=0.8)
    pose_no_global = base.pose.copy()
    pose_no_global[:3] = 0.0
    code_no_global = ParamCode("a", beta=base.beta, pose=pose_no_global, psi=base.psi)
    plain = decode(toy_assets, code_no_global).vertices

    axis_angle = rng.uniform(-1.0, 1.0, size=3)
    pose_with_global = base.pose.copy()
    pose_with_global[:3] = axis_angle
    code_with_global = ParamCode("b", beta=base.beta, pose=pose_with_global, psi=base.psi)
    rotated = decode(toy_assets, code_with_global).vertices

    rot = rodrigues(axis_angle)
    rest = blend_shapes(toy_assets, base.beta, base.psi)
    root = regress_joints(toy_assets, rest)[0]
    expected = (plain - root) @ rot.T + root
    assert np.abs(rotated - expected).max() <= 1e-9


def test_decode_head_identity(head_assets):
    mesh = decode(head_assets, _zero_code(head_assets))
    assert np.abs(mesh.vertices - head_assets.template).max() <= 1e-12


def test_lbs_rejects_nonfinite(toy_assets):
    rest = blend_shapes(toy_assets, np.zeros(toy_assets.n_beta), np.zeros(toy_assets.n_psi))
    joints = regress_joints(toy_assets, rest)
    bad = rest.copy()
    bad[0, 0] = np.nan
    with pytest.raises(ValidationError):
        lbs(toy_assets, bad, joints, np.zeros(6))


def test_jaw_rotation_moves_jaw_weighted_vertices(head_assets):
    open_jaw = ParamCode(
        sample_id="jaw",
        beta=np.zeros(head_assets.n_beta),
        pose=np.array([0.0, 0.0, 0.0, 0.35, 0.0, 0.0]),
        psi=np.zeros(head_assets.n_psi),
    )
    mesh = decode(head_assets, open_jaw)
    moved = np.linalg.norm(mesh.vertices - head_assets.template, axis=1)
    jaw_weight = head_assets.skin_weights[:, 2]
    assert moved[jaw_weight > 0.5].min() > moved[jaw_weight < 0.01].max()
