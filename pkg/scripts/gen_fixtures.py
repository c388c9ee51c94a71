#!/usr/bin/env python3
"""Regenerate committed test fixtures.

Currently one fixture: the mouth/chin vertex-index mask for the procedural
head, used by the residual-concentration acceptance test. Deterministic, so
rerunning this script reproduces the committed file byte for byte.

Usage: python3 scripts/gen_fixtures.py
"""

from __future__ import annotations

import json
from pathlib import Path

from neutrex import synth

FIXTURES_DIR = Path(__file__).resolve().parent.parent / "tests" / "fixtures"
HEAD_SEED = 20


def main() -> None:
    FIXTURES_DIR.mkdir(parents=True, exist_ok=True)
    assets = synth.make_head_assets(seed=HEAD_SEED)
    mask = synth.mouth_chin_mask(assets)
    payload = {
        "description": "vertex indices of the mouth/chin region of the procedural head",
        "head_seed": HEAD_SEED,
        "num_vertices": assets.num_vertices,
        "y_max": synth.MASK_Y_MAX,
        "z_min": synth.MASK_Z_MIN,
        "indices": mask.tolist(),
    }
    out = FIXTURES_DIR / "mouth_chin_mask.json"
    with open(out, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(payload, fh, sort_keys=True, indent=2)
        fh.write("\n")
    print(f"wrote {out} ({mask.size} vertices)")


if __name__ == "__main__":
    main()
