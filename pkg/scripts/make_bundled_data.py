#!/usr/bin/env python3
"""Regenerate the bundled example datasets.

Both CSVs under src/causalcheck/data/ are synthetic replicas, generated
here with pinned seeds so they are reproducible byte for byte:

* roaches.csv -- an observational pest-management study: apartment-level
  trap counts with a pre-treatment infestation level, a senior-building
  indicator, trap-day exposures, and a logistic treatment mechanism.  Counts
  are drawn with variance proportional to the mean (strongly overdispersed
  relative to Poisson), mirroring the published structure of the classic
  cockroach study.
* electric.csv -- a paired educational experiment: four grades, one treated
  and one control classroom per pair, grade-specific pre-score ranges,
  slopes, treatment effects, and residual scales.

Run from the repository root:

    python3 scripts/make_bundled_data.py
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from scipy.special import expit

from causalcheck.core import Dataset, PairStructure, write_dataset_csv

DATA_DIR = Path(__file__).resolve().parents[1] / "src" / "causalcheck" / "data"

ROACHES_SEED = 13
ROACHES_N = 262
ROACHES_DISPERSION = 35.0  # variance = dispersion * mean
ROACHES_ASSIGN_COEF = (-0.35, 0.45, 0.35)  # intercept, senior, roach1
ROACHES_OUTCOME_COEF = (2.9, -0.35, 0.5, -0.55)  # intercept, senior, roach1, treatment

ELECTRIC_SEED = 1
ELECTRIC_PAIRS = (21, 34, 20, 21)
ELECTRIC_PRE_CENTER = (30.0, 60.0, 85.0, 100.0)
ELECTRIC_PRE_PAIR_SD = (4.0, 4.0, 3.0, 3.0)
ELECTRIC_PRE_CLASS_SD = (11.0, 9.0, 3.0, 2.0)
ELECTRIC_SLOPE = (0.45, 0.6, 0.75, 0.85)
ELECTRIC_EFFECT = (16.0, 16.0, 0.0, 0.0)
ELECTRIC_RESID_SD = (3.0, 4.0, 9.0, 15.0)
ELECTRIC_PAIR_SD = (4.0, 4.0, 5.0, 5.0)
ELECTRIC_INTERCEPT = (100.0, 0.0, 60.0, -30.0)


def make_roaches() -> Dataset:
    rng = np.random.default_rng(ROACHES_SEED)
    n = ROACHES_N
    senior = (rng.random(n) < 0.33).astype(float)
    roach1 = np.round(np.minimum(rng.gamma(1.4, 0.75, n), 4.0), 2)
    trapdays = np.round(rng.uniform(0.6, 1.8, n), 2)
    c0, c1, c2 = ROACHES_ASSIGN_COEF
    p_treat = expit(c0 + c1 * senior + c2 * roach1)
    treated = (rng.random(n) < p_treat).astype(int)
    t0, t1, t2, t3 = ROACHES_OUTCOME_COEF
    mu = trapdays * np.exp(t0 + t1 * senior + t2 * roach1 + t3 * treated)
    k = ROACHES_DISPERSION
    lam = rng.gamma(shape=mu / (k - 1.0), scale=k - 1.0)
    counts = rng.poisson(lam).astype(float)
    return Dataset(
        covariates=np.column_stack([senior, roach1]),
        assignments=treated,
        observed_outcomes=counts,
        offsets=trapdays,
        covariate_names=("senior", "roach1"),
    )


def make_electric() -> Dataset:
    rng = np.random.default_rng(ELECTRIC_SEED)
    rows = []
    pair_id = 0
    for g in range(4):
        for _ in range(ELECTRIC_PAIRS[g]):
            base = rng.normal(ELECTRIC_PRE_CENTER[g], ELECTRIC_PRE_PAIR_SD[g])
            intercept = ELECTRIC_INTERCEPT[g] + rng.normal(0, ELECTRIC_PAIR_SD[g])
            pre = np.round(base + rng.normal(0, ELECTRIC_PRE_CLASS_SD[g], size=2), 1)
            treated_first = rng.random() < 0.5
            for cls in range(2):
                arm = 1 if (cls == 0) == treated_first else 0
                score = (
                    intercept
                    + ELECTRIC_SLOPE[g] * pre[cls]
                    + ELECTRIC_EFFECT[g] * arm
                    + rng.normal(0, ELECTRIC_RESID_SD[g])
                )
                rows.append((pair_id, g + 1, arm, pre[cls], round(score, 1)))
            pair_id += 1
    arr = np.array(rows)
    return Dataset(
        covariates=arr[:, 3:4],
        assignments=arr[:, 2].astype(int),
        observed_outcomes=arr[:, 4],
        pair_structure=PairStructure(pair_ids=arr[:, 0].astype(int), grades=arr[:, 1].astype(int)),
        covariate_names=("pre",),
    )


def main() -> None:
    DATA_DIR.mkdir(parents=True, exist_ok=True)
    write_dataset_csv(make_roaches(), DATA_DIR / "roaches.csv")
    write_dataset_csv(make_electric(), DATA_DIR / "electric.csv")
    print(f"wrote {DATA_DIR / 'roaches.csv'}")
    print(f"wrote {DATA_DIR / 'electric.csv'}")


if __name__ == "__main__":
    main()
