import json
import math

import numpy as np
import pytest

from neutrex.errors import ValidationError
from neutrex.scoring import Calibration, calibrate
from neutrex.svm import (
    Embedding,
    SvmModel,
    decision_value,
    decision_values,
    load_svm,
    save_svm,
    score_embeddings,
    svm_quality,
)

from .reference import naive_rbf_decision

sklearn = pytest.importorskip("sklearn")
from sklearn.svm import SVC, OneClassSVM  # noqa: E402


def _tiny_model(gamma=0.7, intercept=-0.25):
    rng = np.random.default_rng(33)
    return SvmModel(
        mode="one-class",
        gamma=gamma,
        support_vectors=rng.normal(size=(3, 4)),
        dual_coefs=rng.uniform(0.1, 1.0, size=3),
        intercept=intercept,
        nu=0.05,
    )


def test_decision_value_matches_kernel_sum_oracle():
    model = _tiny_model()
    rng = np.random.default_rng(34)
    for i in range(20):
        emb = Embedding(sample_id=f"e{i}", vector=rng.normal(size=4))
        ours = decision_value(model, emb)
        reference = naive_rbf_decision(
            model.support_vectors, model.dual_coefs, model.intercept, model.gamma, emb.vector
        )
        assert abs(ours - reference) <= 1e-12


def test_kernel_at_zero_distance_gives_one():
    x = np.array([0.3, -0.2, 1.5, 0.0])
    model = SvmModel(
        mode="one-class",
        gamma=2.0,
        support_vectors=x[None, :],
        dual_coefs=np.array([1.0]),
        intercept=0.0,
    )
    assert decision_value(model, Embedding("x", x)) == 1.0


def test_far_point_decays_to_intercept():
    model = _tiny_model(intercept=-0.125)
    far = Embedding("far", np.full(4, 1e4))
    assert decision_value(model, far) == -0.125


def test_decision_value_permutation_invariance():
    model = _tiny_model()
    rng = np.random.default_rng(35)
    emb = Embedding("p", rng.normal(size=4))
    base = decision_value(model, emb)
    for seed in range(5):
        perm = np.random.default_rng(seed).permutation(3)
        shuffled = SvmModel(
            mode=model.mode,
            gamma=model.gamma,
            support_vectors=model.support_vectors[perm],
            dual_coefs=model.dual_coefs[perm],
            intercept=model.intercept,
            nu=model.nu,
        )
        assert abs(decision_value(shuffled, emb) - base) <= 1e-12


def test_one_class_positive_coefs_decay_monotone():
    sv = np.zeros((1, 3))
    model = SvmModel(
        mode="one-class",
        gamma=1.0,
        support_vectors=sv,
        dual_coefs=np.array([2.0]),
        intercept=-0.5,
    )
    radii = np.linspace(0.0, 5.0, 40)
    values = [
        decision_value(model, Embedding("r", np.array([r, 0.0, 0.0]))) for r in radii
    ]
    assert values[0] == 1.5  # 2*exp(0) - 0.5
    assert all(a >= b for a, b in zip(values, values[1:]))
    assert values[-1] == pytest.approx(-0.5, abs=1e-10)


def test_dimension_mismatch_rejected():
    model = _tiny_model()
    with pytest.raises(ValidationError, match="dimension"):
        decision_value(model, Embedding("bad", np.zeros(5)))


def test_model_validation():
    with pytest.raises(ValidationError, match="gamma"):
        SvmModel(mode="one-class", gamma=0.0, support_vectors=np.zeros((1, 2)),
                 dual_coefs=np.ones(1), intercept=0.0)
    with pytest.raises(ValidationError, match="mode"):
        SvmModel(mode="three-class", gamma=1.0, support_vectors=np.zeros((1, 2)),
                 dual_coefs=np.ones(1), intercept=0.0)
    with pytest.raises(ValidationError, match="dual_coefs"):
        SvmModel(mode="one-class", gamma=1.0, support_vectors=np.zeros((2, 2)),
                 dual_coefs=np.ones(3), intercept=0.0)
    with pytest.raises(ValidationError, match="nu"):
        SvmModel(mode="one-class", gamma=1.0, support_vectors=np.zeros((1, 2)),
                 dual_coefs=np.ones(1), intercept=0.0, nu=1.5)


def test_svm_quality_flipped_orientation():
    calib = Calibration(d_min=-2.0, d_max=2.0, method="exact-extrema", training_sample_count=2)
    assert svm_quality(-2.0, calib) == 0.0
    assert svm_quality(2.0, calib) == 100.0
    assert svm_quality(0.0, calib) == 50.0
    assert svm_quality(-10.0, calib) == 0.0
    assert svm_quality(10.0, calib) == 100.0
    values = np.linspace(-3, 3, 101)
    qualities = [svm_quality(float(v), calib) for v in values]
    assert all(a <= b for a, b in zip(qualities, qualities[1:]))
    assert all(0.0 <= q <= 100.0 for q in qualities)


def test_save_load_round_trip(tmp_path):
    model = _tiny_model()
    path = tmp_path / "model.json"
    save_svm(path, model)
    loaded = load_svm(path)
    assert loaded.mode == model.mode
    assert loaded.gamma == model.gamma
    assert loaded.nu == model.nu
    assert loaded.intercept == model.intercept
    assert np.array_equal(loaded.support_vectors, model.support_vectors)
    assert np.array_equal(loaded.dual_coefs, model.dual_coefs)


def test_load_rejects_bad_files(tmp_path):
    path = tmp_path / "model.json"
    path.write_text("not json", encoding="utf-8")
    with pytest.raises(ValidationError, match="JSON"):
        load_svm(path)

    payload = {"mode": "one-class", "gamma": 1.0, "support_vectors": [[0.0]],
               "dual_coefs": [1.0]}
    path.write_text(json.dumps(payload), encoding="utf-8")
    with pytest.raises(ValidationError, match="intercept"):
        load_svm(path)

    payload["intercept"] = 0.0
    payload["gamma"] = -1.0
    path.write_text(json.dumps(payload), encoding="utf-8")
    with pytest.raises(ValidationError, match="gamma"):
        load_svm(path)


def test_score_embeddings_order_and_workers():
    model = _tiny_model()
    rng = np.random.default_rng(36)
    embeddings = [Embedding(f"e{i:02d}", rng.normal(size=4)) for i in range(12)]
    calib = calibrate(decision_values(model, embeddings))
    serial = score_embeddings(model, embeddings, calib, workers=1)
    parallel = score_embeddings(model, embeddings, calib, workers=4)
    assert [s.sample_id for s in serial] == [e.sample_id for e in embeddings]
    assert serial == parallel
    assert min(s.quality for s in serial) == 0.0
    assert max(s.quality for s in serial) == 100.0


# --- cross-checks against an externally trained model -------------------------

def _export(sk_model, mode, gamma, nu=None) -> SvmModel:
    return SvmModel(
        mode=mode,
        gamma=gamma,
        support_vectors=np.asarray(sk_model.support_vectors_, dtype=np.float64),
        dual_coefs=np.asarray(sk_model.dual_coef_, dtype=np.float64).ravel(),
        intercept=float(np.asarray(sk_model.intercept_).ravel()[0]),
        nu=nu,
    )


def test_matches_sklearn_one_class_decision_function():
    rng = np.random.default_rng(42)
    train = rng.normal(size=(120, 6)) * 0.4
    held_out = rng.normal(size=(20, 6))
    gamma = 0.8
    sk = OneClassSVM(kernel="rbf", nu=0.05, gamma=gamma).fit(train)
    model = _export(sk, "one-class", gamma, nu=0.05)
    expected = sk.decision_function(held_out)
    for i in range(20):
        ours = decision_value(model, Embedding(f"h{i}", held_out[i]))
        assert abs(ours - float(expected[i])) <= 1e-8


def test_matches_sklearn_two_class_decision_function():
    rng = np.random.default_rng(43)
    pos = rng.normal(size=(80, 5)) * 0.5
    neg = rng.normal(size=(80, 5)) * 0.5 + 2.0
    x = np.vstack([pos, neg])
    y = np.array([1] * 80 + [0] * 80)
    held_out = rng.normal(size=(20, 5)) + 1.0
    gamma = 0.6
    sk = SVC(kernel="rbf", gamma=gamma, C=1.0).fit(x, y)
    model = _export(sk, "two-class", gamma)
    expected = sk.decision_function(held_out)
    for i in range(20):
        ours = decision_value(model, Embedding(f"h{i}", held_out[i]))
        assert abs(ours - float(expected[i])) <= 1e-8


def test_far_point_of_exported_model_decays_to_intercept():
    rng = np.random.default_rng(44)
    train = rng.normal(size=(50, 3))
    sk = OneClassSVM(kernel="rbf", nu=0.05, gamma=1.0).fit(train)
    model = _export(sk, "one-class", 1.0, nu=0.05)
    far = Embedding("far", np.full(3, 500.0))
    assert decision_value(model, far) == pytest.approx(model.intercept, abs=1e-300)
    assert math.isfinite(model.intercept)
