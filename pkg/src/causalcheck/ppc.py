"""Posterior predictive checks for the two causal model components.

``check_assignment`` replicates assignment vectors from the fitted
assignment model and locates the observed assignments' marginal log score
inside that reference distribution.  The score marginalizes the parameter
draws, so the realized value is a single number; it is emitted as a
constant length-S sequence to keep ``CheckResult`` uniform across checks
(and so plots can overlay a point mass on the reference histogram).

``check_outcome`` replicates full potential-outcome tables from the fitted
outcome model and compares the discrepancy on replicated tables against its
realization on the observed data (inverse probability weighting, model
imputation, or a known oracle table).

Replications are independent jobs: each draw index owns a pre-spawned rng
stream and results are gathered in draw order, so output is identical for
any worker count.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from causalcheck.core import (
    Dataset,
    PosteriorDraws,
    PotentialOutcomeTable,
    dataset_validate,
    spawn_rngs,
)
from causalcheck.discrepancy import (
    DiscrepancySpec,
    PropensityVector,
    constant_propensities,
    extreme_weight_count,
    log_score_from_marginal,
    oracle_value,
    pair_frame,
    paired_ate_mse,
    propensities,
    realize_impute,
    realize_ipw,
    sum_discrepancy_terms,
)
from causalcheck.models import (
    AssignmentFamily,
    OutcomeFamily,
    assignment_prob1,
    outcome_forward,
)

__all__ = [
    "CheckResult",
    "check_assignment",
    "check_outcome",
    "tail_probability",
    "verdict",
    "check_result_to_json",
    "check_result_from_json",
]

SCHEMA_VERSION = "v1"
DEFAULT_ALPHA = 0.05


@dataclass(frozen=True)
class CheckResult:
    """Reference draws, realized draws, tail probability, and a verdict."""

    t_rep: np.ndarray
    t_obs: np.ndarray
    tail_prob: float
    verdict: str
    metadata: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        t_rep = np.asarray(self.t_rep, dtype=float)
        t_obs = np.asarray(self.t_obs, dtype=float)
        if t_rep.shape != t_obs.shape:
            raise ValueError("t_rep and t_obs must have equal length")
        t_rep.setflags(write=False)
        t_obs.setflags(write=False)
        object.__setattr__(self, "t_rep", t_rep)
        object.__setattr__(self, "t_obs", t_obs)

    @property
    def S(self) -> int:
        return self.t_rep.shape[0]


def tail_probability(t_rep, t_obs) -> float:
    """Paired exceedance frequency (1/S) sum_s 1[t_rep_s >= t_obs_s].

    Ties count as exceedance, which makes the degenerate self-comparison
    deterministic.
    """
    t_rep = np.asarray(t_rep, dtype=float)
    t_obs = np.asarray(t_obs, dtype=float)
    if t_rep.shape != t_obs.shape:
        raise ValueError("t_rep and t_obs must have equal length")
    if t_rep.size == 0:
        raise ValueError("tail_probability needs at least one replication")
    return float(np.mean(t_rep >= t_obs))


def verdict(tail_prob: float, alpha: float = DEFAULT_ALPHA) -> str:
    """Two-sided decision with a warning band of width alpha inside each cut.

    The underlying plots are the real evidence; this threshold rule is a
    convention, not a property of the checked model.
    """
    if not 0.0 < alpha < 0.25:
        raise ValueError("alpha must lie in (0, 0.25)")
    if not 0.0 <= tail_prob <= 1.0:
        raise ValueError("tail_prob must lie in [0, 1]")
    if tail_prob < alpha or tail_prob > 1.0 - alpha:
        return "fail"
    if tail_prob < 2.0 * alpha or tail_prob > 1.0 - 2.0 * alpha:
        return "warn"
    return "pass"


def _phi_matrix(phi_draws) -> np.ndarray:
    if isinstance(phi_draws, PosteriorDraws):
        if phi_draws.phi_draws is None:
            raise ValueError("posterior draws carry no assignment parameters")
        return phi_draws.phi_draws
    return np.atleast_2d(np.asarray(phi_draws, dtype=float))


def _theta_matrix(theta_draws) -> np.ndarray:
    if isinstance(theta_draws, PosteriorDraws):
        if theta_draws.theta_draws is None:
            raise ValueError("posterior draws carry no outcome parameters")
        return theta_draws.theta_draws
    return np.atleast_2d(np.asarray(theta_draws, dtype=float))


def _thin_rows(matrix: np.ndarray, S: int) -> np.ndarray:
    avail = matrix.shape[0]
    if S > avail:
        raise ValueError(f"requested S={S} replications but only {avail} draws are available")
    if S == avail:
        return matrix
    idx = np.round(np.linspace(0, avail - 1, S)).astype(int)
    return matrix[idx]


def _parallel_map(fn, count: int, workers: int) -> list:
    if workers <= 1:
        return [fn(s) for s in range(count)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, range(count)))


def check_assignment(
    assignment_family: AssignmentFamily,
    data: Dataset,
    phi_draws,
    S: int | None = None,
    rng: np.random.Generator | None = None,
    alpha: float = DEFAULT_ALPHA,
    workers: int = 1,
) -> CheckResult:
    """Criticize the assignment model with the marginal assignment log score."""
    report = dataset_validate(data)
    if not report.ok:
        raise ValueError("dataset failed validation: " + "; ".join(report.issues))
    phi = _phi_matrix(phi_draws)
    S = phi.shape[0] if S is None else int(S)
    phi_sub = _thin_rows(phi, S)
    rng = np.random.default_rng(0) if rng is None else rng

    # Marginal (full-draw-set) per-unit treatment probability defines the
    # statistic; per-replication variation enters through a^rep only.
    prop = propensities(phi, assignment_family, data)
    t_obs_value = log_score_from_marginal(prop, data.assignments)

    rngs = spawn_rngs(rng, S)
    prob_rows = [assignment_prob1(assignment_family, phi_sub[s], data) for s in range(S)]

    def one_rep(s: int) -> float:
        a_rep = (rngs[s].random(data.n) < prob_rows[s]).astype(int)
        return log_score_from_marginal(prop, a_rep)

    t_rep = np.asarray(_parallel_map(one_rep, S, workers))
    t_obs = np.full(S, t_obs_value)
    p = tail_probability(t_rep, t_obs)
    return CheckResult(
        t_rep=t_rep,
        t_obs=t_obs,
        tail_prob=p,
        verdict=verdict(p, alpha),
        metadata={
            "kind": "assignment_log_score",
            "realization_mode": None,
            "S": S,
            "alpha": alpha,
            "warnings": [],
        },
    )


def check_outcome(
    outcome_family: OutcomeFamily,
    data: Dataset,
    theta_draws,
    spec: DiscrepancySpec,
    S: int | None = None,
    rng: np.random.Generator | None = None,
    assignment_family: AssignmentFamily | None = None,
    phi_draws=None,
    table: PotentialOutcomeTable | None = None,
    propensity: PropensityVector | None = None,
    alpha: float = DEFAULT_ALPHA,
    workers: int = 1,
) -> CheckResult:
    """Criticize the outcome model with a counterfactual-dependent discrepancy.

    Reference side: per draw s, a replicated table from p(y(0), y(1) | x,
    theta^s).  Realized side: the spec's realization mode applied to the
    observed data with the same theta^s (IPW uses the draw-averaged
    propensities from the full phi set; imputation draws fresh counterfactual
    fills per s; oracle uses the supplied true table).
    """
    if spec.kind == "assignment_log_score":
        raise ValueError("assignment_log_score is checked by check_assignment")
    report = dataset_validate(data)
    if not report.ok and spec.realization_mode != "oracle":
        raise ValueError("dataset failed validation: " + "; ".join(report.issues))

    theta = _theta_matrix(theta_draws)
    S = theta.shape[0] if S is None else int(S)
    theta_sub = _thin_rows(theta, S)
    rng = np.random.default_rng(0) if rng is None else rng
    warnings: list[str] = []

    # Matched-pair designs realize the treatment-effect contrast at the pair
    # level: each pair reveals one treated and one control score, so the
    # contrast is fully observed and the pre-score slope enters through the
    # two classes' differing covariates.  The reference side masks replicated
    # tables by the realized within-pair assignment.
    if (
        outcome_family.kind == "paired_hierarchical_normal"
        and spec.kind == "ate_mse"
        and spec.realization_mode in ("ipw", "oracle")
    ):
        return _check_outcome_paired(
            outcome_family, data, theta_sub, spec, S, rng, alpha, workers
        )

    prop = propensity
    if spec.realization_mode == "ipw":
        if prop is None:
            if phi_draws is None or assignment_family is None:
                raise ValueError(
                    "ipw realization needs assignment-parameter draws (or a known propensity)"
                )
            prop = propensities(_phi_matrix(phi_draws), assignment_family, data)
        extreme = extreme_weight_count(prop)
        if extreme:
            warnings.append(f"{extreme} units carry inverse-probability weight > 100")
    elif spec.realization_mode == "oracle":
        if table is None:
            raise ValueError("oracle realization needs a PotentialOutcomeTable")
        if table.n != data.n:
            raise ValueError("oracle table length != dataset length")

    rngs = spawn_rngs(rng, S)

    def one_rep(s: int) -> tuple[float, float]:
        theta_s = theta_sub[s]
        terms = sum_discrepancy_terms(spec.kind, outcome_family, theta_s, data)
        table_rep = outcome_forward(outcome_family, theta_s, data, rngs[s])
        t_rep_s = oracle_value(terms, table_rep)
        if spec.realization_mode == "ipw":
            t_obs_s = realize_ipw(terms, data, prop)
        elif spec.realization_mode == "imputation":
            t_obs_s = realize_impute(terms, outcome_family, theta_s, data, rngs[s])
        else:
            t_obs_s = oracle_value(terms, table)
        return t_rep_s, t_obs_s

    pairs = _parallel_map(one_rep, S, workers)
    t_rep = np.asarray([p[0] for p in pairs])
    t_obs = np.asarray([p[1] for p in pairs])
    p = tail_probability(t_rep, t_obs)
    return CheckResult(
        t_rep=t_rep,
        t_obs=t_obs,
        tail_prob=p,
        verdict=verdict(p, alpha),
        metadata={
            "kind": spec.kind,
            "realization_mode": spec.realization_mode,
            "S": S,
            "alpha": alpha,
            "warnings": warnings,
        },
    )


def _check_outcome_paired(outcome_family, data, theta_sub, spec, S, rng, alpha, workers):
    frame = pair_frame(data)
    y = data.observed_outcomes
    obs_treated = y[frame.treated_rows]
    obs_control = y[frame.control_rows]
    rngs = spawn_rngs(rng, S)

    def one_rep(s: int) -> tuple[float, float]:
        theta_s = theta_sub[s]
        table_rep = outcome_forward(outcome_family, theta_s, data, rngs[s])
        t_rep_s = paired_ate_mse(
            outcome_family,
            theta_s,
            data,
            frame,
            table_rep.y1[frame.treated_rows],
            table_rep.y0[frame.control_rows],
        )
        t_obs_s = paired_ate_mse(outcome_family, theta_s, data, frame, obs_treated, obs_control)
        return t_rep_s, t_obs_s

    pairs = _parallel_map(one_rep, S, workers)
    t_rep = np.asarray([p[0] for p in pairs])
    t_obs = np.asarray([p[1] for p in pairs])
    p = tail_probability(t_rep, t_obs)
    return CheckResult(
        t_rep=t_rep,
        t_obs=t_obs,
        tail_prob=p,
        verdict=verdict(p, alpha),
        metadata={
            "kind": spec.kind,
            "realization_mode": spec.realization_mode,
            "S": S,
            "alpha": alpha,
            "warnings": [],
            "notes": ["pair design: contrasts realized directly, one class per arm"],
        },
    )


# ---------------------------------------------------------------------------
# JSON document, schema v1
# ---------------------------------------------------------------------------


def check_result_to_json(result: CheckResult, seed: int | None = None) -> str:
    meta = result.metadata
    doc = {
        "schema_version": SCHEMA_VERSION,
        "spec": {
            "kind": meta.get("kind"),
            "realization_mode": meta.get("realization_mode"),
        },
        "S": result.S,
        "seed": meta.get("seed", seed),
        "alpha": meta.get("alpha", DEFAULT_ALPHA),
        "t_rep": [float(v) for v in result.t_rep],
        "t_obs": [float(v) for v in result.t_obs],
        "tail_prob": result.tail_prob,
        "verdict": result.verdict,
        "warnings": list(meta.get("warnings", [])),
    }
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def check_result_from_json(text: str | Path) -> CheckResult:
    if isinstance(text, Path):
        text = text.read_text()
    doc = json.loads(text)
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise ValueError(f"unsupported check result schema {doc.get('schema_version')!r}")
    meta = {
        "kind": doc["spec"]["kind"],
        "realization_mode": doc["spec"]["realization_mode"],
        "S": doc["S"],
        "seed": doc.get("seed"),
        "alpha": doc.get("alpha", DEFAULT_ALPHA),
        "warnings": doc.get("warnings", []),
    }
    return CheckResult(
        t_rep=np.asarray(doc["t_rep"], dtype=float),
        t_obs=np.asarray(doc["t_obs"], dtype=float),
        tail_prob=float(doc["tail_prob"]),
        verdict=str(doc["verdict"]),
        metadata=meta,
    )
