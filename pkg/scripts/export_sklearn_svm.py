#!/usr/bin/env python3
"""Train an RBF-SVM baseline with scikit-learn and export it as model JSON.

The library only evaluates serialized decision functions; this script is the
matching trainer. One-class mode fits on neutral embeddings alone, two-class
mode needs labels (anything other than "neutral" is the negative class):

    python3 scripts/export_sklearn_svm.py --embeddings emb.jsonl \
        --labels labels.csv --mode one-class --nu 0.05 --gamma 0.8 \
        --out svm_model.json

The exported file reproduces sklearn's decision_function bit-for-bit modulo
float64 kernel-sum order; the library's test suite checks 1e-8 agreement.
"""

import argparse
import sys

import numpy as np

from neutrex import formats
from neutrex.svm import SvmModel, save_svm


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--embeddings", required=True, help="embeddings JSONL")
    parser.add_argument("--labels", required=True, help="labels CSV (sample_id,label)")
    parser.add_argument("--mode", choices=("one-class", "two-class"), default="one-class")
    parser.add_argument("--gamma", type=float, default=0.5)
    parser.add_argument("--nu", type=float, default=0.05, help="one-class only")
    parser.add_argument("--c", type=float, default=1.0, help="two-class only")
    parser.add_argument("--out", required=True, help="output model JSON")
    args = parser.parse_args(argv)

    try:
        from sklearn.svm import SVC, OneClassSVM
    except ImportError:
        raise SystemExit("scikit-learn is required: pip install scikit-learn")

    embeddings = formats.read_embeddings_jsonl(args.embeddings)
    labels = formats.read_labels_csv(args.labels)
    missing = [e.sample_id for e in embeddings if e.sample_id not in labels]
    if missing:
        raise SystemExit(f"no label for embedding '{missing[0]}'")

    vectors = np.stack([e.vector for e in embeddings])
    is_neutral = np.array([labels[e.sample_id] == "neutral" for e in embeddings])

    if args.mode == "one-class":
        if not is_neutral.any():
            raise SystemExit("one-class training needs neutral samples")
        fitted = OneClassSVM(nu=args.nu, gamma=args.gamma).fit(vectors[is_neutral])
        nu = args.nu
    else:
        if is_neutral.all() or not is_neutral.any():
            raise SystemExit("two-class training needs both classes")
        # +1 = neutral so that larger decision values mean more neutral
        fitted = SVC(kernel="rbf", gamma=args.gamma, C=args.c).fit(
            vectors, np.where(is_neutral, 1, -1)
        )
        nu = None

    model = SvmModel(
        mode=args.mode,
        gamma=args.gamma,
        support_vectors=fitted.support_vectors_,
        dual_coefs=fitted.dual_coef_.ravel(),
        intercept=float(fitted.intercept_.ravel()[0]),
        nu=nu,
    )
    save_svm(args.out, model)
    print(f"wrote {args.out}: {model.n_support} support vectors, dim {model.dim}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
