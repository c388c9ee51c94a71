#!/usr/bin/env python3
"""One-time converter: upstream FLAME pickle -> portable .nac asset container.

The upstream distribution (flame.pkl from flame.is.tue.mpg.de, license-gated)
stores chumpy arrays inside a Python 2 pickle. This script flattens it into
the language-neutral container the library loads. It is a documented utility,
not part of the installed package; run it once against your licensed copy:

    python3 scripts/convert_flame_assets.py flame2020.pkl assets/flame.nac

Expected pickle keys (SMPL-family layout):
    v_template     (V, 3)        rest template
    f              (F, 3)        triangle indices
    shapedirs      (V, 3, S+E)   identity + expression blendshapes, concatenated
    posedirs       (V, 3, 36)    pose-corrective basis
    J_regressor    (J, V)        joint regressor, possibly scipy-sparse
    weights        (V, J)        skinning weights
    kintree_table  (2, J)        row 0 = parent indices (root marked 0xFFFFFFFF)

FLAME 2020 ships 300 shape + 100 expression components; older releases differ,
so the split is a flag. Verify the converted file with:

    python3 -c "from neutrex.assets import load_assets; a = load_assets('assets/flame.nac'); print(a.num_vertices, a.n_beta, a.n_psi)"
"""

import argparse
import pickle
import sys

import numpy as np

from neutrex.assets import ModelAssets, save_assets


def _densify(x) -> np.ndarray:
    if hasattr(x, "toarray"):  # scipy sparse
        return np.asarray(x.toarray(), dtype=np.float64)
    # chumpy arrays expose .r for the raw ndarray; np.array also works
    return np.asarray(getattr(x, "r", x), dtype=np.float64)


def convert(pkl_path: str, out_path: str, n_shape: int, n_expression: int) -> ModelAssets:
    with open(pkl_path, "rb") as fh:
        # Python 2 pickle: latin1 keeps raw bytes intact
        data = pickle.load(fh, encoding="latin1")

    shapedirs = _densify(data["shapedirs"])
    total = shapedirs.shape[2]
    if n_shape + n_expression != total:
        raise SystemExit(
            f"shapedirs has {total} components; --n-shape {n_shape} + "
            f"--n-expression {n_expression} must match"
        )

    parents = np.asarray(data["kintree_table"], dtype=np.int64)[0].copy()
    parents[parents >= 2**31] = -1  # root sentinel in upstream tables

    assets = ModelAssets(
        template=_densify(data["v_template"]),
        faces=np.asarray(data["f"], dtype=np.int64),
        shape_basis=shapedirs[:, :, :n_shape],
        expression_basis=shapedirs[:, :, n_shape:],
        pose_basis=_densify(data["posedirs"]),
        joint_regressor=_densify(data["J_regressor"]),
        skin_weights=_densify(data["weights"]),
        parents=parents,
    )
    save_assets(out_path, assets)
    return assets


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("pickle_path", help="upstream flame .pkl file")
    parser.add_argument("out_path", help="output .nac container")
    parser.add_argument("--n-shape", type=int, default=300)
    parser.add_argument("--n-expression", type=int, default=100)
    args = parser.parse_args(argv)
    assets = convert(args.pickle_path, args.out_path, args.n_shape, args.n_expression)
    print(
        f"wrote {args.out_path}: {assets.num_vertices} vertices, "
        f"{assets.num_faces} faces, n_beta={assets.n_beta}, n_psi={assets.n_psi}"
    )
    return 0


if __name__ == "__main__":
    sys.exit(main())
