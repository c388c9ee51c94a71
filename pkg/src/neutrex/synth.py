"""Deterministic synthetic data generation.

Everything here is seeded and reproducible: toy assets for property tests,
a procedural head with FLAME-like dimensions for pipeline and residual
tests, plus code / label / comparison / embedding generators so evaluation
runs are self-contained without gated datasets.

The head is a Fibonacci-sampled ellipsoid (y up, z forward) triangulated by
its convex hull. Its jaw skinning covers the lower front of the face and
expression component 0 opens the mouth region, so jaw-open or scream-like
codes concentrate residuals around the mouth and chin by construction.
"""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np
from scipy.spatial import ConvexHull

from . import formats
from .assets import NUM_JOINTS, NUM_POSE_FEATURES, ModelAssets, save_assets
from .decoder import ParamCode
from .errors import ValidationError
from .evaluation import ComparisonRecord
from .svm import Embedding, SvmModel, save_svm

HEAD_NUM_VERTICES = 5023
HEAD_N_BETA = 100
HEAD_N_PSI = 50
HEAD_SCALE = np.array([0.72, 1.0, 0.82])

# Feature directions on the unit sphere, scaled onto the ellipsoid surface.
_MOUTH_DIR = np.array([0.0, -0.62, 0.85])
_CHIN_DIR = np.array([0.0, -0.85, 0.55])
_EYE_L_DIR = np.array([-0.45, 0.32, 0.80])
_EYE_R_DIR = np.array([0.45, 0.32, 0.80])

# Mouth/chin mask box in template coordinates.
MASK_Y_MAX = -0.12
MASK_Z_MIN = 0.30


def _fibonacci_sphere(n: int) -> np.ndarray:
    i = np.arange(n, dtype=np.float64)
    golden = math.pi * (3.0 - math.sqrt(5.0))
    y = 1.0 - 2.0 * (i + 0.5) / n
    radius = np.sqrt(np.maximum(0.0, 1.0 - y * y))
    theta = golden * i
    return np.stack([radius * np.cos(theta), y, radius * np.sin(theta)], axis=1)


def _surface_point(direction: np.ndarray) -> np.ndarray:
    d = np.asarray(direction, dtype=np.float64)
    return HEAD_SCALE * (d / np.linalg.norm(d))


def _smoothstep(t: np.ndarray) -> np.ndarray:
    t = np.clip(t, 0.0, 1.0)
    return t * t * (3.0 - 2.0 * t)


def _gaussian(points: np.ndarray, center: np.ndarray, sigma: float) -> np.ndarray:
    sq = np.sum((points - center) ** 2, axis=1)
    return np.exp(-sq / (2.0 * sigma * sigma))


def _bump_basis(
    rng: np.random.Generator,
    template: np.ndarray,
    n_components: int,
    amp: float,
    sigma: float,
) -> np.ndarray:
    """Random localized displacement fields, one per component."""
    n = template.shape[0]
    basis = np.zeros((n, 3, n_components))
    for k in range(n_components):
        center = template[int(rng.integers(0, n))]
        direction = rng.normal(size=3)
        direction /= np.linalg.norm(direction)
        weight = _gaussian(template, center, sigma)
        basis[:, :, k] = amp * weight[:, None] * direction
    return basis


def _regressor_row(
    template: np.ndarray, center: np.ndarray, sigma: float, k: int | None = None
) -> np.ndarray:
    """Normalized gaussian weights, optionally truncated to the k nearest vertices.

    Wide untruncated kernels average over a large surface cap, which pulls
    the regressed joint into the head's interior; truncated narrow kernels
    keep it on the local surface patch.
    """
    weights = _gaussian(template, center, sigma)
    row = np.zeros(template.shape[0])
    if k is None:
        row[:] = weights
    else:
        nearest = np.argsort(-weights, kind="stable")[:k]
        row[nearest] = weights[nearest]
    return row / row.sum()


def make_head_assets(seed: int = 20, n_beta: int = HEAD_N_BETA, n_psi: int = HEAD_N_PSI) -> ModelAssets:
    """Procedural head with FLAME-like dimensions (5023 vertices, 5 joints).

    Not a face scan: a stand-in with the same tensor shapes and a geometry
    arranged so the jaw and expression component 0 act on the mouth/chin.
    """
    rng = np.random.default_rng(seed)
    template = _fibonacci_sphere(HEAD_NUM_VERTICES) * HEAD_SCALE
    faces = ConvexHull(template).simplices.astype(np.int64)

    mouth = _surface_point(_MOUTH_DIR)
    eye_l = _surface_point(_EYE_L_DIR)
    eye_r = _surface_point(_EYE_R_DIR)

    # Joint pivots: wide untruncated kernels place root/neck/jaw inside the
    # head (the jaw pivot sits behind the mouth, so opening the jaw swings
    # the whole lower face); narrow truncated kernels pin the eyes to their
    # surface patches.
    joint_centers = np.array(
        [
            [0.0, -0.10, 0.00],  # root
            [0.0, -0.75, -0.05],  # neck
            [0.0, -0.25, 0.05],  # jaw
            eye_l * 0.85,
            eye_r * 0.85,
        ]
    )
    sigmas = [0.60, 0.45, 0.45, 0.10, 0.10]
    k_nearest = [None, None, None, 32, 32]
    joint_regressor = np.stack(
        [
            _regressor_row(template, joint_centers[j], sigmas[j], k=k_nearest[j])
            for j in range(NUM_JOINTS)
        ]
    )

    x, y, z = template[:, 0], template[:, 1], template[:, 2]
    w_root = np.full(HEAD_NUM_VERTICES, 0.35)
    w_neck = 0.8 * _smoothstep((-0.45 - y) / 0.30)
    w_jaw = _smoothstep((-0.05 - y) / 0.30) * _smoothstep((z - 0.0) / 0.35)
    w_eye_l = 0.5 * _gaussian(template, eye_l, 0.12)
    w_eye_r = 0.5 * _gaussian(template, eye_r, 0.12)
    skin = np.stack([w_root, w_neck, w_jaw, w_eye_l, w_eye_r], axis=1)
    skin /= skin.sum(axis=1, keepdims=True)

    shape_basis = _bump_basis(rng, template, n_beta, amp=0.012, sigma=0.35)

    expression_basis = _bump_basis(rng, template, n_psi, amp=0.02, sigma=0.25)
    # Component 0: open the mouth. Downward and slightly outward displacement
    # with gaussian falloff around the mouth center.
    open_dir = np.array([0.0, -1.0, 0.15])
    open_dir /= np.linalg.norm(open_dir)
    expression_basis[:, :, 0] = 0.13 * _gaussian(template, mouth, 0.22)[:, None] * open_dir

    pose_basis = np.zeros((HEAD_NUM_VERTICES, 3, NUM_POSE_FEATURES))
    chin = _surface_point(_CHIN_DIR)
    for f in range(9, 18):  # jaw rotation features
        direction = rng.normal(size=3)
        direction /= np.linalg.norm(direction)
        pose_basis[:, :, f] = 0.008 * _gaussian(template, chin, 0.25)[:, None] * direction

    return ModelAssets(
        template=template,
        faces=faces,
        shape_basis=shape_basis,
        expression_basis=expression_basis,
        pose_basis=pose_basis,
        joint_regressor=joint_regressor,
        skin_weights=skin,
    )


def mouth_chin_mask(assets: ModelAssets, y_max: float = MASK_Y_MAX, z_min: float = MASK_Z_MIN) -> np.ndarray:
    """Vertex indices of the lower-front (mouth and chin) region."""
    t = assets.template
    return np.flatnonzero((t[:, 1] < y_max) & (t[:, 2] > z_min))


def scream_code(assets: ModelAssets, sample_id: str = "scream", jaw_angle: float = 0.40, mouth_open: float = 2.5) -> ParamCode:
    """Jaw-open, mouth-open expression code for residual fixtures."""
    psi = np.zeros(assets.n_psi)
    psi[0] = mouth_open
    pose = np.zeros(6)
    pose[3] = jaw_angle
    return ParamCode(sample_id=sample_id, beta=np.zeros(assets.n_beta), pose=pose, psi=psi)


def make_random_assets(
    rng: np.random.Generator,
    num_vertices: int = 12,
    n_beta: int = 4,
    n_psi: int = 6,
    num_faces: int = 8,
) -> ModelAssets:
    """Small random but valid assets for property tests."""
    if num_vertices < 3:
        raise ValidationError("random assets need at least 3 vertices")
    template = rng.normal(size=(num_vertices, 3))
    faces = rng.integers(0, num_vertices, size=(num_faces, 3))
    shape_basis = 0.1 * rng.normal(size=(num_vertices, 3, n_beta))
    expression_basis = 0.1 * rng.normal(size=(num_vertices, 3, n_psi))
    pose_basis = 0.05 * rng.normal(size=(num_vertices, 3, NUM_POSE_FEATURES))
    joint_regressor = rng.normal(size=(NUM_JOINTS, num_vertices)) / num_vertices
    skin = rng.random(size=(num_vertices, NUM_JOINTS)) + 0.05
    skin /= skin.sum(axis=1, keepdims=True)
    return ModelAssets(
        template=template,
        faces=faces,
        shape_basis=shape_basis,
        expression_basis=expression_basis,
        pose_basis=pose_basis,
        joint_regressor=joint_regressor,
        skin_weights=skin,
    )


def make_codes(
    rng: np.random.Generator,
    n: int,
    n_beta: int,
    n_psi: int,
    neutral_fraction: float = 0.5,
    id_prefix: str = "s",
) -> tuple[list[ParamCode], dict[str, str]]:
    """Random codes with ground-truth labels.

    The first round(n * neutral_fraction) samples are neutral (small psi,
    nearly closed jaw); the rest carry larger expressions, half of them with
    an open jaw.
    """
    if n < 1:
        raise ValidationError("need at least one code")
    if not 0.0 <= neutral_fraction <= 1.0:
        raise ValidationError("neutral_fraction must lie in [0, 1]")
    n_neutral = int(round(n * neutral_fraction))
    codes: list[ParamCode] = []
    labels: dict[str, str] = {}
    for i in range(n):
        sid = f"{id_prefix}{i:05d}"
        neutral = i < n_neutral
        beta = rng.normal(size=n_beta)
        pose = np.zeros(6)
        pose[:3] = rng.uniform(-0.25, 0.25, size=3)
        if neutral:
            psi = rng.normal(scale=0.03, size=n_psi)
            pose[3] = abs(rng.normal(scale=0.01))
        else:
            psi = rng.normal(scale=0.45, size=n_psi)
            if rng.random() < 0.5:
                pose[3] = rng.uniform(0.15, 0.45)
                psi[0] = abs(psi[0]) + rng.uniform(0.5, 2.0)
        codes.append(ParamCode(sample_id=sid, beta=beta, pose=pose, psi=psi))
        labels[sid] = "neutral" if neutral else "non-neutral"
    return codes, labels


def _utility(code: ParamCode) -> float:
    """Latent comparison utility in (0, 1]: decays with expression strength."""
    return 1.0 / (1.0 + float(np.linalg.norm(code.psi)))


def make_comparisons(
    rng: np.random.Generator,
    codes: list[ParamCode],
    n_mated: int,
    n_nonmated: int,
) -> list[ComparisonRecord]:
    """Synthetic comparison scores correlated with expression strength.

    Mated similarities drop when either sample carries a strong expression,
    which gives EDC curves their characteristic downward trend.
    """
    if len(codes) < 2:
        raise ValidationError("need at least two codes to form comparisons")
    utility = {c.sample_id: _utility(c) for c in codes}
    ids = [c.sample_id for c in codes]
    records: list[ComparisonRecord] = []
    for _ in range(n_mated):
        a, b = rng.choice(len(ids), size=2, replace=False)
        pair_u = min(utility[ids[a]], utility[ids[b]])
        sim = 0.55 + 0.40 * pair_u + rng.normal(scale=0.03)
        records.append(
            ComparisonRecord(
                probe_id=ids[a], reference_id=ids[b], similarity=float(sim), mated=True
            )
        )
    for _ in range(n_nonmated):
        a, b = rng.choice(len(ids), size=2, replace=False)
        sim = rng.normal(loc=0.35, scale=0.07)
        records.append(
            ComparisonRecord(
                probe_id=ids[a], reference_id=ids[b], similarity=float(sim), mated=False
            )
        )
    return records


def make_embeddings(
    rng: np.random.Generator,
    labels: dict[str, str],
    dim: int = 16,
) -> list[Embedding]:
    """Neutral embeddings cluster at the origin; others sit on an outer shell."""
    embeddings = []
    for sid in labels:
        if labels[sid] == "neutral":
            vec = rng.normal(scale=0.25, size=dim)
        else:
            direction = rng.normal(size=dim)
            direction /= np.linalg.norm(direction)
            vec = direction * (1.8 + abs(rng.normal(scale=0.4))) + rng.normal(scale=0.1, size=dim)
        embeddings.append(Embedding(sample_id=sid, vector=vec))
    return embeddings


def write_dataset(
    out_dir,
    seed: int,
    profile: str = "random",
    num_samples: int = 60,
    num_vertices: int = 200,
    n_beta: int = 8,
    n_psi: int = 10,
    neutral_fraction: float = 0.5,
    n_mated: int = 150,
    n_nonmated: int = 300,
    embedding_dim: int = 16,
) -> dict[str, str]:
    """Generate a full synthetic dataset directory.

    Writes assets.nac, codes.jsonl, neutral_codes.jsonl, labels.csv,
    comparisons.csv, embeddings.jsonl and svm_model.json, all derived from
    one seeded generator so reruns are byte-identical. Returns the file map.
    """
    if profile not in ("random", "head"):
        raise ValidationError(f"unknown synth profile '{profile}'")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)

    if profile == "head":
        assets = make_head_assets(seed=seed)
    else:
        assets = make_random_assets(
            rng,
            num_vertices=num_vertices,
            n_beta=n_beta,
            n_psi=n_psi,
            num_faces=2 * num_vertices,
        )
    codes, labels = make_codes(
        rng, num_samples, assets.n_beta, assets.n_psi, neutral_fraction=neutral_fraction
    )
    comparisons = make_comparisons(rng, codes, n_mated=n_mated, n_nonmated=n_nonmated)
    embeddings = make_embeddings(rng, labels, dim=embedding_dim)
    svm_model = make_pilot_svm(embeddings, labels)

    paths = {
        "assets": out / "assets.nac",
        "codes": out / "codes.jsonl",
        "neutral_codes": out / "neutral_codes.jsonl",
        "labels": out / "labels.csv",
        "comparisons": out / "comparisons.csv",
        "embeddings": out / "embeddings.jsonl",
        "svm_model": out / "svm_model.json",
    }
    save_assets(paths["assets"], assets)
    formats.write_codes_jsonl(paths["codes"], codes)
    formats.write_codes_jsonl(
        paths["neutral_codes"], [c for c in codes if labels[c.sample_id] == "neutral"]
    )
    formats.write_labels_csv(paths["labels"], labels)
    formats.write_comparisons_csv(paths["comparisons"], comparisons)
    formats.write_embeddings_jsonl(paths["embeddings"], embeddings)
    save_svm(paths["svm_model"], svm_model)
    return {name: str(p) for name, p in paths.items()}


def make_pilot_svm(
    embeddings: list[Embedding],
    labels: dict[str, str],
    gamma: float = 0.5,
    n_sv: int = 8,
) -> SvmModel:
    """Hand-assembled one-class model: mean kernel to neutral prototypes.

    Not a trained SVM; a valid model file for plumbing tests, with the
    reference one-class hyperparameter recorded as metadata.
    """
    prototypes = [e.vector for e in embeddings if labels.get(e.sample_id) == "neutral"]
    if len(prototypes) < 1:
        raise ValidationError("pilot SVM needs at least one neutral embedding")
    sv = np.stack(prototypes[:n_sv])
    coefs = np.full(sv.shape[0], 1.0 / sv.shape[0])
    return SvmModel(
        mode="one-class",
        gamma=gamma,
        support_vectors=sv,
        dual_coefs=coefs,
        intercept=-0.3,
        nu=0.05,
    )
