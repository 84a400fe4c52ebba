import numpy as np
import pytest
from scipy.special import expit

from causalcheck.core import Dataset, PairStructure


@pytest.fixture
def small_dataset():
    rng = np.random.default_rng(7)
    n, d = 200, 3
    x = rng.random((n, d))
    phi = np.array([1.0, -0.5, 0.25])
    a = (rng.random(n) < expit(x @ phi)).astype(int)
    y = x @ np.array([0.5, -0.3, 0.2]) + a * 1.0 + rng.normal(0, 1, n)
    return Dataset(covariates=x, assignments=a, observed_outcomes=y)


@pytest.fixture
def count_dataset():
    rng = np.random.default_rng(11)
    n = 150
    s = (rng.random(n) < 0.4).astype(float)
    r = rng.gamma(1.5, 0.6, n)
    t = rng.uniform(0.5, 2.0, n)
    a = (rng.random(n) < expit(-0.2 + 0.4 * s + 0.3 * r)).astype(int)
    mu = t * np.exp(2.0 - 0.3 * s + 0.5 * r - 0.4 * a)
    y = rng.poisson(mu).astype(float)
    return Dataset(
        covariates=np.column_stack([s, r]),
        assignments=a,
        observed_outcomes=y,
        offsets=t,
        covariate_names=("senior", "roach1"),
    )


@pytest.fixture
def paired_dataset():
    rng = np.random.default_rng(3)
    rows = []
    pair_id = 0
    for g, (n_pairs, loc, effect, sd) in enumerate(
        [(8, 40.0, 10.0, 4.0), (10, 70.0, 5.0, 5.0), (7, 90.0, 2.0, 4.0)], start=1
    ):
        for _ in range(n_pairs):
            base = rng.normal(loc, 6.0)
            b = 0.4 * loc + rng.normal(0, 4.0)
            pre = base + rng.normal(0, 5.0, size=2)
            first_treated = rng.random() < 0.5
            for cls in range(2):
                arm = 1 if (cls == 0) == first_treated else 0
                yv = b + 0.6 * pre[cls] + effect * arm + rng.normal(0, sd)
                rows.append((pair_id, g, arm, pre[cls], yv))
            pair_id += 1
    arr = np.array(rows)
    return Dataset(
        covariates=arr[:, 3:4],
        assignments=arr[:, 2].astype(int),
        observed_outcomes=arr[:, 4],
        pair_structure=PairStructure(pair_ids=arr[:, 0].astype(int), grades=arr[:, 1].astype(int)),
        covariate_names=("pre",),
    )
