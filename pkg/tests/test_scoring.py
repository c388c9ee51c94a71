import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from neutrex.decoder import ParamCode, decode
from neutrex.errors import ValidationError
from neutrex.scoring import (
    Calibration,
    build_anchor,
    calibrate,
    distance,
    distance_batch,
    neutrex_score,
    normalize_code,
    parse_calibration_method,
    per_vertex_residuals,
    residual_mesh,
    score_batch,
    score_sample,
)

from .reference import naive_distance, nearest_rank_quantile


def _code(assets, rng, sample_id="c"):
    return ParamCode(
        sample_id=sample_id,
        beta=rng.normal(size=assets.n_beta),
        pose=rng.uniform(-0.5, 0.5, size=6),
        psi=rng.normal(size=assets.n_psi),
    )


@pytest.fixture
def toy_anchor(toy_assets):
    rng = np.random.default_rng(41)
    codes = [
        ParamCode(
            sample_id=f"n{i}",
            beta=np.zeros(toy_assets.n_beta),
            pose=np.zeros(6),
            psi=rng.normal(scale=0.05, size=toy_assets.n_psi),
        )
        for i in range(4)
    ]
    return build_anchor(toy_assets, codes)


# --- normalize_code -----------------------------------------------------------

def test_normalize_zeroes_beta_and_global(toy_assets):
    rng = np.random.default_rng(1)
    code = _code(toy_assets, rng)
    normalized = normalize_code(code)
    assert np.array_equal(normalized.beta, np.zeros(toy_assets.n_beta))
    assert np.array_equal(normalized.pose[:3], np.zeros(3))
    assert np.array_equal(normalized.pose[3:], code.pose[3:])
    assert np.array_equal(normalized.psi, code.psi)
    assert normalized.sample_id == code.sample_id


def test_normalize_zero_jaw_policy(toy_assets):
    rng = np.random.default_rng(2)
    code = _code(toy_assets, rng)
    normalized = normalize_code(code, jaw_policy="zero")
    assert np.array_equal(normalized.pose, np.zeros(6))


def test_normalize_is_idempotent(toy_assets):
    rng = np.random.default_rng(3)
    code = _code(toy_assets, rng)
    once = normalize_code(code)
    twice = normalize_code(once)
    assert np.array_equal(once.pose, twice.pose)
    assert np.array_equal(once.beta, twice.beta)
    assert np.array_equal(once.psi, twice.psi)


def test_normalize_rejects_unknown_policy(toy_assets):
    rng = np.random.default_rng(4)
    with pytest.raises(ValidationError, match="jaw policy"):
        normalize_code(_code(toy_assets, rng), jaw_policy="open")


@settings(
    max_examples=30,
    deadline=None,
    suppress_health_check=[HealthCheck.function_scoped_fixture],
)
@given(seed=st.integers(0, 2**31 - 1))
def test_scores_invariant_to_beta_and_global(toy_assets, toy_anchor, seed):
    """Perturbing beta and global rotation never changes the score bits."""
    rng = np.random.default_rng(seed)
    base = _code(toy_assets, rng)
    perturbed_pose = base.pose.copy()
    perturbed_pose[:3] = rng.uniform(-2.0, 2.0, size=3)
    perturbed = ParamCode(
        sample_id=base.sample_id,
        beta=rng.normal(size=toy_assets.n_beta),
        pose=perturbed_pose,
        psi=base.psi,
    )
    calib = Calibration(d_min=0.0, d_max=1.0, method="exact-extrema", training_sample_count=2)
    a = score_sample(toy_assets, toy_anchor, calib, base)
    b = score_sample(toy_assets, toy_anchor, calib, perturbed)
    assert a.raw_distance == b.raw_distance
    assert a.neutrex == b.neutrex


# --- anchor ---------------------------------------------------------------------

def test_anchor_single_code_keeps_psi(toy_assets):
    rng = np.random.default_rng(7)
    psi = rng.normal(size=toy_assets.n_psi)
    code = ParamCode("only", beta=np.zeros(toy_assets.n_beta), pose=np.zeros(6), psi=psi)
    anchor = build_anchor(toy_assets, [code])
    assert np.array_equal(anchor.psi_a, psi)
    assert anchor.source_count == 1


def test_anchor_psi_is_mean(toy_assets):
    rng = np.random.default_rng(8)
    psis = [rng.normal(size=toy_assets.n_psi) for _ in range(5)]
    jaws = [rng.uniform(0, 0.1, size=3) for _ in range(5)]
    codes = [
        ParamCode(f"n{i}", beta=np.zeros(toy_assets.n_beta),
                  pose=np.concatenate([np.zeros(3), jaws[i]]), psi=psis[i])
        for i in range(5)
    ]
    anchor = build_anchor(toy_assets, codes)
    assert np.array_equal(anchor.psi_a, np.mean(np.stack(psis), axis=0))
    assert np.array_equal(anchor.jaw, np.mean(np.stack(jaws), axis=0))
    assert anchor.jaw_mode == "mean"


def test_anchor_zero_jaw_mode(toy_assets):
    rng = np.random.default_rng(9)
    codes = [_code(toy_assets, rng, f"n{i}") for i in range(3)]
    anchor = build_anchor(toy_assets, codes, jaw_mode="zero")
    assert np.array_equal(anchor.jaw, np.zeros(3))


def test_anchor_mesh_matches_decode(toy_assets, toy_anchor):
    code = ParamCode(
        "check",
        beta=np.zeros(toy_assets.n_beta),
        pose=np.concatenate([np.zeros(3), toy_anchor.jaw]),
        psi=toy_anchor.psi_a,
    )
    assert np.array_equal(decode(toy_assets, code).vertices, toy_anchor.anchor_mesh.vertices)


def test_anchor_rejects_empty_and_mismatched(toy_assets):
    with pytest.raises(ValidationError, match="empty"):
        build_anchor(toy_assets, [])
    short = ParamCode("bad", beta=np.zeros(toy_assets.n_beta), pose=np.zeros(6),
                      psi=np.zeros(toy_assets.n_psi - 1))
    with pytest.raises(ValidationError):
        build_anchor(toy_assets, [short])


# --- distances --------------------------------------------------------------------

def test_distance_matches_loop_oracle(toy_assets, toy_anchor):
    rng = np.random.default_rng(12)
    mesh = decode(toy_assets, normalize_code(_code(toy_assets, rng)))
    for reduction in ("mean", "sum", "frobenius"):
        ours = distance(mesh, toy_anchor, reduction=reduction)
        reference = naive_distance(mesh.vertices, toy_anchor.anchor_mesh.vertices, reduction)
        assert ours == pytest.approx(reference, abs=1e-12)


def test_mean_residual_equals_distance_exactly(toy_assets, toy_anchor):
    rng = np.random.default_rng(13)
    mesh = decode(toy_assets, normalize_code(_code(toy_assets, rng)))
    res = per_vertex_residuals(mesh, toy_anchor)
    assert float(np.mean(res)) == distance(mesh, toy_anchor, reduction="mean")


def test_distance_of_anchor_is_zero(toy_assets, toy_anchor):
    assert distance(toy_anchor.anchor_mesh, toy_anchor) == 0.0


def test_residuals_reject_vertex_mismatch(toy_assets, toy_anchor, head_assets):
    other = decode(
        head_assets,
        ParamCode("h", beta=np.zeros(head_assets.n_beta), pose=np.zeros(6),
                  psi=np.zeros(head_assets.n_psi)),
    )
    with pytest.raises(ValidationError, match="vertex count"):
        per_vertex_residuals(other, toy_anchor)


def test_unknown_reduction_rejected(toy_assets, toy_anchor):
    with pytest.raises(ValidationError, match="reduction"):
        distance(toy_anchor.anchor_mesh, toy_anchor, reduction="median")


def test_residual_mesh_attaches_scalar(toy_assets, toy_anchor):
    rng = np.random.default_rng(14)
    code = _code(toy_assets, rng)
    mesh = residual_mesh(toy_assets, toy_anchor, code)
    assert mesh.per_vertex_scalar is not None
    assert mesh.per_vertex_scalar.shape == (toy_assets.num_vertices,)
    direct = decode(toy_assets, normalize_code(code))
    assert np.array_equal(mesh.per_vertex_scalar, per_vertex_residuals(direct, toy_anchor))


# --- calibration ---------------------------------------------------------------------

def test_calibrate_exact_extrema():
    calib = calibrate([0.5, 0.1, 0.9, 0.3])
    assert calib.d_min == 0.1
    assert calib.d_max == 0.9
    assert calib.method == "exact-extrema"
    assert calib.training_sample_count == 4


def test_calibrate_percentile_nearest_rank():
    rng = np.random.default_rng(15)
    values = rng.normal(size=200).tolist()
    calib = calibrate(values, method="percentile(5,95)")
    assert calib.d_min == nearest_rank_quantile(values, 5)
    assert calib.d_max == nearest_rank_quantile(values, 95)
    assert calib.method == "percentile(5,95)"


def test_calibrate_rejects_degenerate():
    with pytest.raises(ValidationError, match="degenerate"):
        calibrate([2.0, 2.0, 2.0])
    with pytest.raises(ValidationError):
        calibrate([1.0])
    with pytest.raises(ValidationError, match="non-finite"):
        calibrate([1.0, np.nan])


def test_calibrate_rejects_unknown_method():
    with pytest.raises(ValidationError, match="method"):
        calibrate([1.0, 2.0], method="robust")
    with pytest.raises(ValidationError):
        parse_calibration_method("percentile(95,5)")


def test_calibration_type_invariants():
    with pytest.raises(ValidationError, match="d_min < d_max"):
        Calibration(d_min=2.0, d_max=1.0, method="exact-extrema", training_sample_count=2)
    with pytest.raises(ValidationError, match="finite"):
        Calibration(d_min=0.0, d_max=np.inf, method="exact-extrema", training_sample_count=2)
    # Signed bounds are allowed: SVM decision values can be negative.
    Calibration(d_min=-1.5, d_max=0.5, method="exact-extrema", training_sample_count=2)


# --- quality mapping -------------------------------------------------------------------

def test_neutrex_score_endpoints_and_midpoint():
    calib = Calibration(d_min=1.0, d_max=3.0, method="exact-extrema", training_sample_count=2)
    assert neutrex_score(1.0, calib) == 100.0
    assert neutrex_score(2.0, calib) == 50.0
    assert neutrex_score(3.0, calib) == 0.0


def test_neutrex_score_endpoints_exact_for_any_bounds():
    rng = np.random.default_rng(16)
    for _ in range(25):
        lo, hi = np.sort(rng.normal(size=2) * rng.uniform(0.1, 100))
        if lo == hi:
            continue
        calib = Calibration(d_min=float(lo), d_max=float(hi),
                            method="exact-extrema", training_sample_count=2)
        assert neutrex_score(float(lo), calib) == 100.0
        assert neutrex_score(float(hi), calib) == 0.0


def test_neutrex_score_clips():
    calib = Calibration(d_min=1.0, d_max=3.0, method="exact-extrema", training_sample_count=2)
    assert neutrex_score(0.0, calib) == 100.0
    assert neutrex_score(10.0, calib) == 0.0


def test_neutrex_score_rejects_nonfinite():
    calib = Calibration(d_min=0.0, d_max=1.0, method="exact-extrema", training_sample_count=2)
    with pytest.raises(ValidationError):
        neutrex_score(float("nan"), calib)


def test_score_is_monotone_nonincreasing_in_distance():
    calib = Calibration(d_min=0.2, d_max=0.8, method="exact-extrema", training_sample_count=2)
    grid = np.linspace(-1, 2, 301)
    scores = [neutrex_score(float(d), calib) for d in grid]
    assert all(a >= b for a, b in zip(scores, scores[1:]))
    assert min(scores) == 0.0 and max(scores) == 100.0


# --- batch scoring -----------------------------------------------------------------------

def test_score_batch_preserves_order_and_worker_invariance(toy_assets, toy_anchor):
    rng = np.random.default_rng(18)
    codes = [_code(toy_assets, rng, f"s{i:03d}") for i in range(24)]
    calib = Calibration(d_min=0.0, d_max=1.0, method="exact-extrema", training_sample_count=2)
    serial = score_batch(toy_assets, toy_anchor, calib, codes, workers=1)
    parallel = score_batch(toy_assets, toy_anchor, calib, codes, workers=4)
    assert [s.sample_id for s in serial] == [c.sample_id for c in codes]
    assert serial == parallel
    distances = distance_batch(toy_assets, toy_anchor, codes, workers=3)
    assert distances == [s.raw_distance for s in serial]


def test_score_batch_rejects_bad_workers(toy_assets, toy_anchor):
    calib = Calibration(d_min=0.0, d_max=1.0, method="exact-extrema", training_sample_count=2)
    with pytest.raises(ValidationError):
        score_batch(toy_assets, toy_anchor, calib, [], workers=0)
