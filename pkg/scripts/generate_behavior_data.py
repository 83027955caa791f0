#!/usr/bin/env python3
"""Regenerate the bundled synthetic behavior dataset.

Draws evening-meal carbohydrate loads and overnight fasting durations
from a fixed logit-normal and writes src/hypoguard/data/behavior.csv.
Values are rounded to one decimal like a survey export. Run from the
repository root; the output is committed, not built on install.
"""

import csv
import pathlib

import numpy as np

N_ROWS = 500
SEED = 20240817

# Support and logit-space parameters of the generating distribution.
CARBS_LO, CARBS_HI = 12.0, 165.0
FAST_LO, FAST_HI = 5.6, 13.8
MU = np.array([-0.55, -0.25])
SIGMA = np.array([[0.55, 0.08],
                  [0.08, 0.35]])


def main():
    rng = np.random.default_rng(SEED)
    chol = np.linalg.cholesky(SIGMA)
    z = MU + rng.standard_normal((N_ROWS, 2)) @ chol.T
    u = 1.0 / (1.0 + np.exp(-z))
    carbs = CARBS_LO + (CARBS_HI - CARBS_LO) * u[:, 0]
    fast = FAST_LO + (FAST_HI - FAST_LO) * u[:, 1]

    out = pathlib.Path(__file__).resolve().parents[1] / "src" / "hypoguard" / "data" / "behavior.csv"
    out.parent.mkdir(parents=True, exist_ok=True)
    with out.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["carbs_g", "fast_hours"])
        for c, f in zip(carbs, fast):
            writer.writerow([f"{c:.1f}", f"{f:.1f}"])
    print(f"wrote {N_ROWS} rows to {out}")


if __name__ == "__main__":
    main()
