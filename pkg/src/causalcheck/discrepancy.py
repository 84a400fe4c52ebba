"""Discrepancy functions and realization modes for outcome checks.

Outcome discrepancies here are sums over units of per-arm term functions
plus terms that depend only on the outcome parameters:

    T = combine( sum_i [ f0_i(y_i(0)) + f1_i(y_i(1)) + g_i(theta) ] )

Both the average log-likelihood of the potential outcomes and the adjusted
mean-squared-error of the treatment effect fit this shape once the square is
expanded; the expansion leaves no cross-arm product, which is exactly why
the inverse-probability realization below is available for them.

Realizations of the counterfactual-dependent sum:

* ``realize_ipw`` -- Horvitz-Thompson: each unit contributes its observed
  arm's term, reweighted by the (posterior-marginal) probability of the
  realized assignment.  Unbiased over assignment replications, but only as
  accurate as the assignment model.
* ``realize_impute`` -- missing-arm terms evaluated at outcomes drawn from
  the fitted outcome model.  Kept as a baseline: its bias per treated-arm
  term is (pi_i(1) - 1) (mu*_i(1) - mu_i(1)), vanishing only when the
  outcome model is already correct, which defeats the point of checking it.
* ``oracle_value`` -- both arms taken from a known table (synthetic studies).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from causalcheck.core import Dataset, PotentialOutcomeTable
from causalcheck.models import (
    AssignmentFamily,
    OutcomeFamily,
    assignment_prob1,
    conditional_cate,
    outcome_forward,
    outcome_logpdf_units,
    paired_view,
)

__all__ = [
    "DiscrepancySpec",
    "PropensityVector",
    "TermFunctions",
    "CrossArmTermsError",
    "propensities",
    "constant_propensities",
    "assignment_log_score",
    "log_score_from_marginal",
    "outcome_loglik_T",
    "ate_mse_T",
    "loglik_terms",
    "ate_mse_terms",
    "oracle_value",
    "realize_ipw",
    "realize_impute",
    "extreme_weight_count",
    "sum_discrepancy_terms",
    "PairFrame",
    "pair_frame",
    "paired_effect_expectation",
    "paired_ate_mse",
]

PROPENSITY_CLAMP = 1e-6
EXTREME_WEIGHT = 100.0

DISCREPANCY_KINDS = ("assignment_log_score", "outcome_log_lik", "ate_mse")
REALIZATION_MODES = ("ipw", "imputation", "oracle")


class CrossArmTermsError(ValueError):
    """Raised when an IPW realization is asked to weight a cross-arm product.

    A term like y_i(1) * y_i(0) needs both arms of the same unit, but any
    single assignment reveals only one of them, so no reweighting of observed
    data can estimate it.  Use the oracle or imputation realizations instead.
    """


@dataclass(frozen=True)
class DiscrepancySpec:
    """Which discrepancy to compute and how to realize its observed side."""

    kind: str
    realization_mode: str = "ipw"

    def __post_init__(self) -> None:
        if self.kind not in DISCREPANCY_KINDS:
            raise ValueError(f"unknown discrepancy kind {self.kind!r}")
        if self.realization_mode not in REALIZATION_MODES:
            raise ValueError(f"unknown realization mode {self.realization_mode!r}")

    @property
    def label(self) -> str:
        if self.kind == "assignment_log_score":
            return self.kind
        return f"{self.kind}/{self.realization_mode}"


@dataclass(frozen=True)
class PropensityVector:
    """Posterior-predictive treatment probabilities, clamped away from 0/1."""

    pi1: np.ndarray
    pi_of_realized: np.ndarray

    def __post_init__(self) -> None:
        pi1 = np.clip(np.asarray(self.pi1, dtype=float), PROPENSITY_CLAMP, 1.0 - PROPENSITY_CLAMP)
        pr = np.clip(
            np.asarray(self.pi_of_realized, dtype=float), PROPENSITY_CLAMP, 1.0 - PROPENSITY_CLAMP
        )
        pi1.setflags(write=False)
        pr.setflags(write=False)
        object.__setattr__(self, "pi1", pi1)
        object.__setattr__(self, "pi_of_realized", pr)


def propensities(phi_draws: np.ndarray, family: AssignmentFamily, data: Dataset) -> PropensityVector:
    """Draw-averaged P(a_i = 1) and the probability of each realized assignment."""
    phi_draws = np.atleast_2d(np.asarray(phi_draws, dtype=float))
    S = phi_draws.shape[0]
    if S == 0:
        raise ValueError("propensities need at least one assignment-parameter draw")
    acc = np.zeros(data.n)
    for s in range(S):
        acc += assignment_prob1(family, phi_draws[s], data)
    pi1 = acc / S
    pi_realized = np.where(data.assignments == 1, pi1, 1.0 - pi1)
    return PropensityVector(pi1=pi1, pi_of_realized=pi_realized)


def constant_propensities(pi1_value: float, assignments) -> PropensityVector:
    """Known design propensity (e.g. 0.5 within completely randomized pairs)."""
    a = np.asarray(assignments)
    pi1 = np.full(a.shape[0], float(pi1_value))
    return PropensityVector(pi1=pi1, pi_of_realized=np.where(a == 1, pi1, 1.0 - pi1))


def log_score_from_marginal(prop: PropensityVector, assignments) -> float:
    """Average log of the draw-marginal probability of each assignment."""
    a = np.asarray(assignments)
    p = np.where(a == 1, prop.pi1, 1.0 - prop.pi1)
    return float(np.mean(np.log(p)))


def assignment_log_score(assignments, data: Dataset, phi_draws, family: AssignmentFamily) -> float:
    """(1/n) sum_i log[(1/S) sum_s p(a_i | x_i, phi^s)].

    The average over draws sits inside the log: this is the marginal
    (draw-averaged) per-unit likelihood, so the statistic is a single number
    for a fixed assignment vector.
    """
    prop = propensities(phi_draws, family, data)
    return log_score_from_marginal(prop, assignments)


# ---------------------------------------------------------------------------
# Outcome discrepancies evaluated on a full table (reference side + oracle)
# ---------------------------------------------------------------------------


def outcome_loglik_T(theta, table: PotentialOutcomeTable, data: Dataset, family: OutcomeFamily) -> float:
    """Average joint log-likelihood of both potential outcomes per unit."""
    ll0 = outcome_logpdf_units(family, theta, data, 0, table.y0)
    ll1 = outcome_logpdf_units(family, theta, data, 1, table.y1)
    return float(np.mean(ll0 + ll1))


def ate_mse_T(theta, table: PotentialOutcomeTable, data: Dataset, family: OutcomeFamily) -> float:
    """Adjusted mean squared error of the treatment effect.

    (1/n) sum_i [(d_i - cate_i)^2 - d_i^2] with d_i = y_i(1) - y_i(0);
    algebraically (1/n) sum_i [cate_i^2 - 2 cate_i d_i].
    """
    cate = conditional_cate(family, theta, data)
    diff = table.y1 - table.y0
    return float(np.mean(np.square(diff - cate) - np.square(diff)))


# ---------------------------------------------------------------------------
# Sum-form term functions and their realizations
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TermFunctions:
    """Per-arm term functions of a sum-form discrepancy.

    ``f0``/``f1`` map a length-n outcome vector to per-unit terms (theta and
    x_i are closed over).  ``theta_only`` collects per-unit terms free of
    outcomes; they need no reweighting.  ``combine`` post-processes the
    aggregated sum (averaging, sign flips).  ``f_cross``, when present, is a
    joint term of both arms; it is usable with the oracle and imputation
    realizations but has no inverse-probability realization.
    """

    f0: Callable[[np.ndarray], np.ndarray]
    f1: Callable[[np.ndarray], np.ndarray]
    theta_only: np.ndarray | float = 0.0
    combine: Callable[[float], float] = lambda total: total
    f_cross: Callable[[np.ndarray, np.ndarray], np.ndarray] | None = None


def loglik_terms(family: OutcomeFamily, theta, data: Dataset) -> TermFunctions:
    """Average-log-likelihood discrepancy in sum form."""
    n = data.n
    return TermFunctions(
        f0=lambda y: outcome_logpdf_units(family, theta, data, 0, y),
        f1=lambda y: outcome_logpdf_units(family, theta, data, 1, y),
        theta_only=0.0,
        combine=lambda total: total / n,
    )


def ate_mse_terms(family: OutcomeFamily, theta, data: Dataset) -> TermFunctions:
    """Treatment-effect MSE discrepancy expanded into single-arm monomials.

    cate_i^2 is outcome-free; -2 cate_i y_i(1) and +2 cate_i y_i(0) are the
    only outcome-dependent monomials and each touches one arm, so the IPW
    realization weights them arm by arm.
    """
    n = data.n
    cate = conditional_cate(family, theta, data)
    return TermFunctions(
        f0=lambda y: 2.0 * cate * y,
        f1=lambda y: -2.0 * cate * y,
        theta_only=np.square(cate),
        combine=lambda total: total / n,
    )


def _theta_only_sum(terms: TermFunctions) -> float:
    return float(np.sum(terms.theta_only))


def oracle_value(terms: TermFunctions, table: PotentialOutcomeTable) -> float:
    """Full-information value of the sum-form discrepancy."""
    total = float(np.sum(terms.f0(table.y0))) + float(np.sum(terms.f1(table.y1)))
    total += _theta_only_sum(terms)
    if terms.f_cross is not None:
        total += float(np.sum(terms.f_cross(table.y0, table.y1)))
    return terms.combine(total)


def realize_ipw(terms: TermFunctions, data: Dataset, prop: PropensityVector) -> float:
    """Observed-data realization by inverse probability of assignment.

    Each unit contributes through exactly one arm:

        1[a_i=0]/pi_i(0) * f0(y_i) + 1[a_i=1]/pi_i(1) * f1(y_i)

    The pairing is arm-consistent: the weight for an arm's term is built
    from the indicator of that same arm.
    """
    if terms.f_cross is not None:
        raise CrossArmTermsError(
            "cross-arm product terms cannot be realized by inverse probability "
            "weighting: a single assignment never reveals both arms of a unit"
        )
    a = data.assignments
    y = data.observed_outcomes
    weights = 1.0 / prop.pi_of_realized
    arm_terms = np.where(a == 1, terms.f1(y), terms.f0(y))
    total = float(np.sum(arm_terms * weights)) + _theta_only_sum(terms)
    return terms.combine(total)


def realize_impute(
    terms: TermFunctions,
    family: OutcomeFamily,
    theta,
    data: Dataset,
    rng: np.random.Generator,
) -> float:
    """Observed-data realization that fills missing arms with model draws."""
    a = data.assignments
    y = data.observed_outcomes
    drawn = outcome_forward(family, theta, data, rng)
    y0 = np.where(a == 0, y, drawn.y0)
    y1 = np.where(a == 1, y, drawn.y1)
    total = float(np.sum(terms.f0(y0))) + float(np.sum(terms.f1(y1)))
    total += _theta_only_sum(terms)
    if terms.f_cross is not None:
        total += float(np.sum(terms.f_cross(y0, y1)))
    return terms.combine(total)


def extreme_weight_count(prop: PropensityVector, threshold: float = EXTREME_WEIGHT) -> int:
    """Units whose realized-assignment weight exceeds the threshold."""
    return int(np.sum(1.0 / prop.pi_of_realized > threshold))


# ---------------------------------------------------------------------------
# Paired designs.  A matched pair exposes one treated and one control class,
# so the pair-level effect contrast (treated class score minus control class
# score) is fully observed; its model expectation is m_g (p_T - p_C) + th_g,
# which carries the pre-score slope into the check.  The reference side masks
# a replicated table by the realized within-pair assignment.
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PairFrame:
    treated_rows: np.ndarray
    control_rows: np.ndarray

    @property
    def n_pairs(self) -> int:
        return self.treated_rows.shape[0]


def pair_frame(data: Dataset) -> PairFrame:
    """Treated/control row index per pair; validates the one-of-each design."""
    ps = data.pair_structure
    if ps is None:
        raise ValueError("pair-level evaluation needs a dataset with pair structure")
    labels, inverse = np.unique(ps.pair_ids, return_inverse=True)
    P = labels.size
    counts = np.bincount(inverse, minlength=P)
    if not (counts == 2).all():
        raise ValueError("every pair must contain exactly two rows")
    treated = np.full(P, -1, dtype=int)
    control = np.full(P, -1, dtype=int)
    for row, i in enumerate(inverse):
        if data.assignments[row] == 1:
            treated[i] = row
        else:
            control[i] = row
    if (treated < 0).any() or (control < 0).any():
        raise ValueError("every pair must contain exactly one treated and one control row")
    return PairFrame(treated_rows=treated, control_rows=control)


def paired_effect_expectation(family: OutcomeFamily, theta, data: Dataset, frame: PairFrame) -> np.ndarray:
    """Per-pair E[treated score - control score | theta]: m_g (p_T - p_C) + th_g."""
    theta = np.asarray(getattr(theta, "values", theta), dtype=float)
    view = paired_view(family, data)
    cols = family.design if family.design is not None else tuple(range(data.d))
    pre = data.covariates[:, [j for j in cols if j not in family.drop_columns][0]]
    m = theta[view.sl_m]
    th = theta[view.sl_theta]
    g_pair = view.grade_index[frame.treated_rows]
    m_pair = np.full(frame.n_pairs, m[0]) if family.shared_effect else m[g_pair]
    th_pair = np.full(frame.n_pairs, th[0]) if family.shared_effect else th[g_pair]
    dp = pre[frame.treated_rows] - pre[frame.control_rows]
    return m_pair * dp + th_pair


def paired_ate_mse(
    family: OutcomeFamily,
    theta,
    data: Dataset,
    frame: PairFrame,
    treated_scores: np.ndarray,
    control_scores: np.ndarray,
) -> float:
    """(1/P) sum_i [(delta_i - cate_i)^2 - delta_i^2] on pair-level contrasts."""
    cate = paired_effect_expectation(family, theta, data, frame)
    delta = np.asarray(treated_scores, dtype=float) - np.asarray(control_scores, dtype=float)
    return float(np.mean(np.square(delta - cate) - np.square(delta)))


def sum_discrepancy_terms(
    spec_kind: str, family: OutcomeFamily, theta, data: Dataset
) -> TermFunctions:
    """Term functions for a named outcome discrepancy."""
    if spec_kind == "outcome_log_lik":
        return loglik_terms(family, theta, data)
    if spec_kind == "ate_mse":
        return ate_mse_terms(family, theta, data)
    raise ValueError(f"no sum form for discrepancy kind {spec_kind!r}")
