"""Posterior predictive criticism for Bayesian causal models.

The package splits a causal model into its two components -- the treatment
assignment model and the potential-outcome model -- and checks each against
the observed data with posterior predictive discrepancies.  Counterfactual
terms in outcome discrepancies are realized either by inverse-probability
weighting, by model imputation (biased on purpose, kept as a baseline), or
from a known table in synthetic oracle studies.
"""

from causalcheck.core import (
    Dataset,
    PairStructure,
    PosteriorDraws,
    PotentialOutcomeTable,
    ValidationReport,
    dataset_validate,
    select_observed,
)
from causalcheck.ppc import CheckResult, check_assignment, check_outcome, tail_probability, verdict

__all__ = [
    "Dataset",
    "PairStructure",
    "PosteriorDraws",
    "PotentialOutcomeTable",
    "ValidationReport",
    "CheckResult",
    "dataset_validate",
    "select_observed",
    "check_assignment",
    "check_outcome",
    "tail_probability",
    "verdict",
]

__version__ = "0.1.0"
