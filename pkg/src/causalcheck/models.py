"""Assignment-model and outcome-model families.

Each family bundles a prior, a likelihood, a forward sampler, and the
per-unit conditional treatment effect that the discrepancies need.  Families
are immutable and every operation is pure given an explicit rng, so they are
safe to call from concurrent replication workers.

Misspecification is a first-class construction option: an outcome family can
structurally drop design columns, and the shifted assignment variant floors
the treatment probability (success probability in [shift, 1]).  This keeps
wrong models expressible on the fitted side, not only in data generators.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal

import numpy as np
from scipy.special import expit, gammaln

from causalcheck.core import Dataset, PotentialOutcomeTable

__all__ = [
    "AssignmentFamily",
    "OutcomeFamily",
    "ParamLayout",
    "ParamVector",
    "assignment_loglik",
    "assignment_forward",
    "assignment_prob1",
    "assignment_param_layout",
    "outcome_loglik",
    "outcome_logpdf_units",
    "outcome_mean",
    "outcome_forward",
    "outcome_param_layout",
    "outcome_design_matrix",
    "conditional_cate",
    "prior_logdensity",
]

PROB_EPS = 1e-12  # log-probability clamp away from 0/1
VAR_FLOOR = 1e-8  # heteroscedastic variance floor when the mean approaches 0

ASSIGNMENT_KINDS = ("bernoulli_logistic", "bernoulli_logistic_shifted")
OUTCOME_KINDS = (
    "gaussian_linear",
    "poisson_loglinear",
    "negbin_loglinear",
    "heteroscedastic_gaussian_loglinear",
    "paired_hierarchical_normal",
)
COUNT_KINDS = ("poisson_loglinear", "negbin_loglinear")
Arm = Literal[0, 1, "observed"]


@dataclass(frozen=True)
class ParamLayout:
    """Names and positivity constraints for a family's flat parameter vector."""

    names: tuple[str, ...]
    positive: tuple[bool, ...]

    def __post_init__(self) -> None:
        if len(self.names) != len(self.positive):
            raise ValueError("layout names/positive length mismatch")

    @property
    def size(self) -> int:
        return len(self.names)

    def positive_mask(self) -> np.ndarray:
        return np.asarray(self.positive, dtype=bool)

    def validate(self, values: np.ndarray) -> None:
        values = np.asarray(values, dtype=float)
        if values.shape != (self.size,):
            raise ValueError(f"parameter vector has shape {values.shape}, layout needs ({self.size},)")
        mask = self.positive_mask()
        if mask.any() and not (values[mask] > 0).all():
            bad = [self.names[i] for i in np.nonzero(mask & ~(values > 0))[0]]
            raise ValueError(f"constrained parameters must be positive: {bad}")


@dataclass(frozen=True)
class ParamVector:
    values: np.ndarray
    layout: ParamLayout

    def __post_init__(self) -> None:
        vals = np.asarray(self.values, dtype=float)
        self.layout.validate(vals)
        vals = vals.copy()
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)


def _values(params) -> np.ndarray:
    if isinstance(params, ParamVector):
        return params.values
    return np.asarray(params, dtype=float)


@dataclass(frozen=True)
class AssignmentFamily:
    """Bernoulli treatment assignment with a logistic (optionally floored) link.

    The shifted variant maps the success probability into [shift, 1]:
    P(a=1) = shift + (1 - shift) * logistic(w'phi).
    """

    kind: str = "bernoulli_logistic"
    design: tuple[int, ...] | None = None
    includes_intercept: bool = False
    prior_scale: float = 1.0
    shift: float = 0.7

    def __post_init__(self) -> None:
        if self.kind not in ASSIGNMENT_KINDS:
            raise ValueError(f"unknown assignment family kind {self.kind!r}")
        if self.design is not None:
            object.__setattr__(self, "design", tuple(int(j) for j in self.design))
        if self.kind == "bernoulli_logistic_shifted" and not (0.0 <= self.shift < 1.0):
            raise ValueError("shift must lie in [0, 1)")


@dataclass(frozen=True)
class OutcomeFamily:
    """Potential-outcome model with an additive treatment coefficient.

    ``drop_columns`` removes covariates from the design *structurally* (the
    dropped coefficient does not exist, rather than being pinned at zero).
    ``variance_prior`` is the gamma (shape, rate) prior on the family's
    variance/dispersion parameter where it has one; for the paired family it
    applies to the per-grade residual and intercept scales.
    """

    kind: str
    design: tuple[int, ...] | None = None
    includes_intercept: bool = False
    drop_columns: tuple[int, ...] = ()
    coef_prior_var: float = 1.0
    variance_prior: tuple[float, float] = (1.0, 1.0)
    # paired-family simplifications: share theta/m across grades, or force a
    # single intercept for all pairs
    shared_effect: bool = False
    shared_intercept: bool = False

    def __post_init__(self) -> None:
        if self.kind not in OUTCOME_KINDS:
            raise ValueError(f"unknown outcome family kind {self.kind!r}")
        if self.design is not None:
            object.__setattr__(self, "design", tuple(int(j) for j in self.design))
        object.__setattr__(self, "drop_columns", tuple(int(j) for j in self.drop_columns))
        shape, rate = self.variance_prior
        if shape <= 0 or rate <= 0:
            raise ValueError("variance_prior shape and rate must be positive")
        if self.kind == "paired_hierarchical_normal" and self.coef_prior_var == 1.0:
            # flat-ish location priors; informative gamma(10,1) on the scales
            object.__setattr__(self, "coef_prior_var", 1e4)
            if self.variance_prior == (1.0, 1.0):
                object.__setattr__(self, "variance_prior", (10.0, 1.0))


# ---------------------------------------------------------------------------
# Design matrices
# ---------------------------------------------------------------------------


def _effective_columns(design, drop, d: int) -> tuple[int, ...]:
    cols = tuple(range(d)) if design is None else design
    cols = tuple(j for j in cols if j not in drop)
    for j in cols:
        if not 0 <= j < d:
            raise ValueError(f"design column {j} outside covariate matrix with d={d}")
    return cols

def _assignment_design(family: AssignmentFamily, data: Dataset) -> np.ndarray:
    cols = _effective_columns(family.design, (), data.d)
    blocks = [np.ones((data.n, 1))] if family.includes_intercept else []
    blocks.append(data.covariates[:, cols])
    return np.hstack(blocks) if blocks else np.empty((data.n, 0))


def _outcome_design(family: OutcomeFamily, data: Dataset) -> np.ndarray:
    cols = _effective_columns(family.design, family.drop_columns, data.d)
    blocks = [np.ones((data.n, 1))] if family.includes_intercept else []
    blocks.append(data.covariates[:, cols])
    return np.hstack(blocks)


def outcome_design_matrix(family: OutcomeFamily, data: Dataset) -> np.ndarray:
    """Covariate design for the regression families (treatment column excluded)."""
    return _outcome_design(family, data)


def assignment_param_layout(family: AssignmentFamily, data: Dataset) -> ParamLayout:
    cols = _effective_columns(family.design, (), data.d)
    names = (("intercept",) if family.includes_intercept else ()) + tuple(
        f"phi_{data.covariate_names[j]}" for j in cols
    )
    return ParamLayout(names=names, positive=(False,) * len(names))


def outcome_param_layout(family: OutcomeFamily, data: Dataset) -> ParamLayout:
    if family.kind == "paired_hierarchical_normal":
        return _paired_layout(family, data)
    cols = _effective_columns(family.design, family.drop_columns, data.d)
    names = (("intercept",) if family.includes_intercept else ()) + tuple(
        f"beta_{data.covariate_names[j]}" for j in cols
    )
    names = names + ("treat",)
    positive = [False] * len(names)
    if family.kind == "gaussian_linear":
        names = names + ("sigma2",)
        positive.append(True)
    elif family.kind in ("negbin_loglinear", "heteroscedastic_gaussian_loglinear"):
        names = names + ("dispersion",)
        positive.append(True)
    return ParamLayout(names=tuple(names), positive=tuple(positive))


# ---------------------------------------------------------------------------
# Assignment model operations
# ---------------------------------------------------------------------------


def assignment_prob1(family: AssignmentFamily, phi, data: Dataset) -> np.ndarray:
    """Per-unit P(a_i = 1 | x_i, phi)."""
    phi = _values(phi)
    layout = assignment_param_layout(family, data)
    layout.validate(phi)
    base = expit(_assignment_design(family, data) @ phi)
    if family.kind == "bernoulli_logistic_shifted":
        return family.shift + (1.0 - family.shift) * base
    return base


def assignment_loglik(family: AssignmentFamily, phi, data: Dataset) -> float:
    """Sum of per-unit Bernoulli log-likelihoods of the realized assignments."""
    p1 = np.clip(assignment_prob1(family, phi, data), PROB_EPS, 1.0 - PROB_EPS)
    a = data.assignments
    return float(np.sum(np.where(a == 1, np.log(p1), np.log1p(-p1))))


def assignment_forward(
    family: AssignmentFamily, phi, data: Dataset, rng: np.random.Generator
) -> np.ndarray:
    """Draw one replicated assignment vector from the family."""
    p1 = assignment_prob1(family, phi, data)
    return (rng.random(data.n) < p1).astype(int)


# ---------------------------------------------------------------------------
# Outcome model internals: per-unit means and variances by arm
# ---------------------------------------------------------------------------


def _paired_layout(family: OutcomeFamily, data: Dataset) -> ParamLayout:
    ps = data.pair_structure
    if ps is None:
        raise ValueError("paired_hierarchical_normal requires dataset pair structure")
    pair_labels = tuple(int(p) for p in np.unique(ps.pair_ids))
    grade_labels = tuple(int(g) for g in np.unique(ps.grades))
    n_b = 1 if family.shared_intercept else len(pair_labels)
    n_loc = 1 if family.shared_effect else len(grade_labels)
    n_hyper = 1 if family.shared_intercept else len(grade_labels)
    names: list[str] = []
    positive: list[bool] = []
    if family.shared_intercept:
        names.append("b")
    else:
        names.extend(f"b_{p}" for p in pair_labels)
    positive.extend([False] * n_b)
    for stem, count in (("m", n_loc), ("theta", n_loc)):
        if count == 1 and family.shared_effect:
            names.append(stem)
        else:
            names.extend(f"{stem}_{g}" for g in grade_labels)
        positive.extend([False] * count)
    if family.shared_intercept:
        names.append("mu")
    else:
        names.extend(f"mu_{g}" for g in grade_labels)
    positive.extend([False] * n_hyper)
    names.extend(f"sigma_{g}" for g in grade_labels)
    positive.extend([True] * len(grade_labels))
    if family.shared_intercept:
        names.append("tau")
    else:
        names.extend(f"tau_{g}" for g in grade_labels)
    positive.extend([True] * n_hyper)
    return ParamLayout(names=tuple(names), positive=tuple(positive))


@dataclass(frozen=True)
class _PairedView:
    """Index maps and parameter slices for the paired hierarchical family."""

    pair_index: np.ndarray  # row -> 0..P-1 (zeros when intercept shared)
    grade_index: np.ndarray  # row -> 0..G-1
    n_pairs: int
    n_grades: int
    sl_b: slice
    sl_m: slice
    sl_theta: slice
    sl_mu: slice
    sl_sigma: slice
    sl_tau: slice

    def unpack(self, theta: np.ndarray):
        b = theta[self.sl_b]
        m = theta[self.sl_m]
        th = theta[self.sl_theta]
        mu = theta[self.sl_mu]
        sigma = theta[self.sl_sigma]
        tau = theta[self.sl_tau]
        return b, m, th, mu, sigma, tau


def paired_view(family: OutcomeFamily, data: Dataset) -> _PairedView:
    ps = data.pair_structure
    if ps is None:
        raise ValueError("paired_hierarchical_normal requires dataset pair structure")
    pair_labels, pair_index = np.unique(ps.pair_ids, return_inverse=True)
    grade_labels, grade_index = np.unique(ps.grades, return_inverse=True)
    P = 1 if family.shared_intercept else len(pair_labels)
    G = len(grade_labels)
    L = 1 if family.shared_effect else G
    H = 1 if family.shared_intercept else G
    if family.shared_intercept:
        pair_index = np.zeros_like(pair_index)
    off = 0
    sl_b = slice(off, off + P); off += P
    sl_m = slice(off, off + L); off += L
    sl_theta = slice(off, off + L); off += L
    sl_mu = slice(off, off + H); off += H
    sl_sigma = slice(off, off + G); off += G
    sl_tau = slice(off, off + H); off += H
    return _PairedView(
        pair_index=pair_index,
        grade_index=grade_index,
        n_pairs=P,
        n_grades=G,
        sl_b=sl_b,
        sl_m=sl_m,
        sl_theta=sl_theta,
        sl_mu=sl_mu,
        sl_sigma=sl_sigma,
        sl_tau=sl_tau,
    )


def _paired_mean_var(family, theta, data, arm_vec):
    view = paired_view(family, data)
    b, m, th, _, sigma, _ = view.unpack(theta)
    g = view.grade_index
    m_row = m[0] if family.shared_effect else m[g]
    th_row = th[0] if family.shared_effect else th[g]
    # paired family uses exactly one covariate column (the pre-treatment score)
    cols = _effective_columns(family.design, family.drop_columns, data.d)
    pre = data.covariates[:, cols[0]]
    mean = b[view.pair_index] + m_row * pre + arm_vec * th_row
    var = np.square(sigma[g])
    return mean, var


def _regression_eta(family: OutcomeFamily, theta: np.ndarray, data: Dataset, arm_vec) -> np.ndarray:
    W = _outcome_design(family, data)
    k = W.shape[1]
    coef = theta[:k]
    treat = theta[k]
    return W @ coef + arm_vec * treat


def _mean_var(family: OutcomeFamily, theta: np.ndarray, data: Dataset, arm):
    """Per-unit mean and variance of y(arm); arm may be scalar or a 0/1 vector."""
    arm_vec = np.full(data.n, arm, dtype=float) if np.isscalar(arm) else np.asarray(arm, dtype=float)
    if family.kind == "paired_hierarchical_normal":
        return _paired_mean_var(family, theta, data, arm_vec)
    eta = _regression_eta(family, theta, data, arm_vec)
    if family.kind == "gaussian_linear":
        return eta, np.full(data.n, theta[-1])
    offsets = data.offsets if data.offsets is not None else np.ones(data.n)
    mu = offsets * np.exp(eta)
    if family.kind == "poisson_loglinear":
        return mu, mu
    if family.kind == "negbin_loglinear":
        return mu, mu + np.square(mu) / theta[-1]
    if family.kind == "heteroscedastic_gaussian_loglinear":
        return mu, np.maximum(theta[-1] * mu, VAR_FLOOR)
    raise AssertionError(family.kind)


def outcome_mean(family: OutcomeFamily, theta, data: Dataset, arm) -> np.ndarray:
    """E[Y_i(arm) | theta, x_i] per unit."""
    theta = _values(theta)
    outcome_param_layout(family, data).validate(theta)
    return _mean_var(family, theta, data, arm)[0]


def outcome_logpdf_units(family: OutcomeFamily, theta, data: Dataset, arm, y) -> np.ndarray:
    """Per-unit log p(y_i | theta, x_i, arm).  ``arm`` may be 0/1 or a vector."""
    theta = _values(theta)
    outcome_param_layout(family, data).validate(theta)
    y = np.asarray(y, dtype=float)
    mean, var = _mean_var(family, theta, data, arm)
    if family.kind in COUNT_KINDS:
        if (y < 0).any():
            raise ValueError(f"{family.kind} requires nonnegative counts")
        if family.kind == "poisson_loglinear":
            return y * np.log(mean) - mean - gammaln(y + 1.0)
        k = theta[-1]
        # negative binomial with mean mu and variance mu + mu^2/k
        mu = mean
        return (
            gammaln(y + k)
            - gammaln(k)
            - gammaln(y + 1.0)
            + k * np.log(k / (k + mu))
            + y * np.log(mu / (k + mu))
        )
    if (var <= 0).any():
        raise ValueError("non-positive variance in gaussian outcome density")
    return -0.5 * (np.log(2.0 * np.pi * var) + np.square(y - mean) / var)


def outcome_loglik(
    family: OutcomeFamily, theta, data: Dataset, arm: Arm = "observed", outcomes=None
) -> float:
    """Sum of per-unit log densities for one arm.

    ``arm="observed"`` scores y_i(a_i) with the realized a_i in the design
    (the fitting target).  For arm 0 or 1 the caller supplies that arm's
    outcomes, which only exist in oracle or replicated contexts.
    """
    if arm == "observed":
        y = data.observed_outcomes if outcomes is None else np.asarray(outcomes, dtype=float)
        arm_vec = data.assignments
        return float(np.sum(outcome_logpdf_units(family, theta, data, arm_vec, y)))
    if arm not in (0, 1):
        raise ValueError(f"arm must be 0, 1, or 'observed', got {arm!r}")
    if outcomes is None:
        raise ValueError("outcomes are required when scoring a single arm")
    return float(np.sum(outcome_logpdf_units(family, theta, data, arm, outcomes)))


def outcome_forward(
    family: OutcomeFamily, theta, data: Dataset, rng: np.random.Generator
) -> PotentialOutcomeTable:
    """Draw both potential outcomes for every unit, independently across arms."""
    theta = _values(theta)
    outcome_param_layout(family, data).validate(theta)
    draws = []
    for arm in (0, 1):
        mean, var = _mean_var(family, theta, data, arm)
        if family.kind == "poisson_loglinear":
            draws.append(rng.poisson(mean).astype(float))
        elif family.kind == "negbin_loglinear":
            k = theta[-1]
            lam = rng.gamma(shape=k, scale=mean / k)
            draws.append(rng.poisson(lam).astype(float))
        else:
            draws.append(rng.normal(mean, np.sqrt(var)))
    return PotentialOutcomeTable(y0=draws[0], y1=draws[1])


def conditional_cate(family: OutcomeFamily, theta, data: Dataset) -> np.ndarray:
    """Per-unit E[Y(1) - Y(0) | theta, x_i]."""
    theta = _values(theta)
    outcome_param_layout(family, data).validate(theta)
    if family.kind == "paired_hierarchical_normal":
        view = paired_view(family, data)
        th = theta[view.sl_theta]
        if family.shared_effect:
            return np.full(data.n, th[0])
        return th[view.grade_index]
    if family.kind == "gaussian_linear":
        W = _outcome_design(family, data)
        return np.full(data.n, theta[W.shape[1]])
    mu0, _ = _mean_var(family, theta, data, 0)
    W = _outcome_design(family, data)
    treat = theta[W.shape[1]]
    return mu0 * (np.exp(treat) - 1.0)


# ---------------------------------------------------------------------------
# Priors
# ---------------------------------------------------------------------------


def _normal_logpdf(x, var) -> np.ndarray:
    return -0.5 * (np.log(2.0 * np.pi * var) + np.square(x) / var)


def gamma_logpdf(x, shape: float, rate: float):
    """log Gamma(x; shape, rate); -inf outside the positive support."""
    x = np.asarray(x, dtype=float)
    out = np.full(x.shape, -np.inf)
    ok = x > 0
    out[ok] = shape * np.log(rate) + (shape - 1.0) * np.log(x[ok]) - rate * x[ok] - gammaln(shape)
    return out if out.shape else float(out)


def prior_logdensity(family, params, data: Dataset | None = None) -> float:
    """Joint log prior over a family's parameter vector.

    Returns -inf (not an exception) when a constrained parameter sits outside
    its support, so samplers can treat the draw as rejected.
    """
    values = _values(params)
    if isinstance(family, AssignmentFamily):
        if data is not None:
            assignment_param_layout(family, data).validate(values)
        return float(np.sum(_normal_logpdf(values, family.prior_scale**2)))
    if family.kind == "paired_hierarchical_normal":
        if data is None:
            raise ValueError("paired family prior needs the dataset for its layout")
        expected = outcome_param_layout(family, data).size
        if values.shape != (expected,):
            raise ValueError(f"parameter vector has shape {values.shape}, layout needs ({expected},)")
        return _paired_prior(family, values, data)
    total = 0.0
    shape, rate = family.variance_prior
    if family.kind == "gaussian_linear" or family.kind in (
        "negbin_loglinear",
        "heteroscedastic_gaussian_loglinear",
    ):
        coef, positive = values[:-1], values[-1]
        lp = gamma_logpdf(positive, shape, rate)
        if not np.isfinite(lp):
            return float("-inf")
        total += float(lp)
    else:
        coef = values
    total += float(np.sum(_normal_logpdf(coef, family.coef_prior_var)))
    return total


def _paired_prior(family: OutcomeFamily, theta: np.ndarray, data: Dataset) -> float:
    view = paired_view(family, data)
    b, m, th, mu, sigma, tau = view.unpack(theta)
    if (sigma <= 0).any() or (tau <= 0).any():
        return float("-inf")
    shape, rate = family.variance_prior
    total = float(np.sum(gamma_logpdf(sigma, shape, rate)))
    total += float(np.sum(gamma_logpdf(tau, shape, rate)))
    for block in (m, th, mu):
        total += float(np.sum(_normal_logpdf(block, family.coef_prior_var)))
    # hierarchical prior on the pair intercepts
    if family.shared_intercept:
        total += float(np.sum(_normal_logpdf(b - mu, np.square(tau))))
    else:
        pair_grade = _pair_grades(view)
        total += float(np.sum(_normal_logpdf(b - mu[pair_grade], np.square(tau[pair_grade]))))
    return total


def _pair_grades(view: _PairedView) -> np.ndarray:
    """Grade index of each pair (pairs never straddle grades)."""
    pg = np.zeros(view.n_pairs, dtype=int)
    pg[view.pair_index] = view.grade_index
    return pg
