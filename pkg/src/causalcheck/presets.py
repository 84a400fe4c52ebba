"""Bundled study presets: dataset loaders plus default run configuration.

The bundled CSVs are seeded synthetic replicas (see scripts/make_bundled_data.py)
structured after two classic studies: an observational pest-management count
study and a paired completely-randomized educational experiment.
"""

from __future__ import annotations

from importlib import resources
from pathlib import Path

from causalcheck.core import Dataset, load_dataset_csv

__all__ = ["PRESET_NAMES", "load_preset_dataset", "preset_defaults"]

PRESET_NAMES = ("roaches", "electric")


def _data_path(name: str) -> Path:
    return Path(str(resources.files("causalcheck").joinpath(f"data/{name}.csv")))


def load_preset_dataset(name: str) -> Dataset:
    if name not in PRESET_NAMES:
        raise ValueError(f"unknown preset {name!r}; available: {PRESET_NAMES}")
    return load_dataset_csv(_data_path(name))


def preset_defaults(name: str) -> dict:
    """Default config keys for a preset; explicit config entries override."""
    if name == "roaches":
        # Observational count study: logistic assignment on the senior
        # indicator and pre-treatment level, Poisson outcome by default
        # (swap outcome.kind for the overdispersed alternatives), and a
        # 50/50 held-out split for the assignment check.
        return {
            "assignment.kind": "bernoulli_logistic",
            "assignment.intercept": "true",
            "outcome.kind": "poisson_loglinear",
            "outcome.intercept": "true",
            "checks": "assignment_log_score, ate_mse:ipw",
            "holdout_fraction": "0.5",
            "sampler.draws": "1000",
            "sampler.burn_in": "3000",
            "sampler.chains": "4",
            "seed": "1",
        }
    if name == "electric":
        # Paired completely randomized experiment: no assignment model is
        # posited; the within-pair treatment probability is 1/2 by design.
        return {
            "outcome.kind": "paired_hierarchical_normal",
            "checks": "ate_mse:ipw",
            "known_propensity": "0.5",
            "sampler.draws": "1000",
            "sampler.burn_in": "2000",
            "sampler.chains": "2",
            "seed": "11",
        }
    raise ValueError(f"unknown preset {name!r}; available: {PRESET_NAMES}")
