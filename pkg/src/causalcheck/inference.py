"""Posterior sampling for assignment and outcome parameters.

The posterior factorizes under unconfoundedness, so the two fits are fully
independent: ``fit_assignment`` never reads outcomes and ``fit_outcome``
never reads more of the assignments than the realized design column.

Samplers:

* adaptive random-walk Metropolis (diagonal proposal, Robbins-Monro scale
  adaptation toward a target acceptance rate, adaptation frozen after
  burn-in so the retained draws satisfy detailed balance);
* Gibbs for the gaussian linear family (conjugate coefficient block, scalar
  Metropolis on log sigma^2 under its gamma prior);
* Metropolis-within-Gibbs for the paired hierarchical family (closed-form
  normal updates for intercepts and location blocks, scalar log-scale
  Metropolis for the scale parameters).

Positive parameters are sampled on the log scale with the Jacobian term
included, which removes boundary rejections.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from causalcheck.core import Dataset, PosteriorDraws, purpose_seedseq
from causalcheck.models import (
    AssignmentFamily,
    OutcomeFamily,
    assignment_loglik,
    assignment_param_layout,
    gamma_logpdf,
    outcome_design_matrix,
    outcome_loglik,
    outcome_param_layout,
    paired_view,
    prior_logdensity,
)

__all__ = [
    "SamplerConfig",
    "Diagnostics",
    "FitResult",
    "fit_assignment",
    "fit_outcome",
    "effective_sample_size",
    "potential_scale_reduction",
    "combine_draws",
    "export_draws_csv",
    "import_draws_csv",
]

# Convergence gates; violations warn rather than abort.
RHAT_GATE = 1.05
ESS_GATE = 100.0
_SCALAR_ACCEPT_TARGET = 0.44  # standard univariate random-walk target


@dataclass(frozen=True)
class SamplerConfig:
    draws_S: int = 1000
    burn_in: int = 2000
    chains: int = 4
    step_scale: float = 0.5
    adapt_target: float = 0.30
    seed: int = 0

    def __post_init__(self) -> None:
        if self.draws_S < 1:
            raise ValueError("draws_S must be >= 1")
        if self.chains < 1:
            raise ValueError("chains must be >= 1")
        if not 0.0 < self.adapt_target < 1.0:
            raise ValueError("adapt_target must lie in (0, 1)")
        if self.burn_in < 0:
            raise ValueError("burn_in must be >= 0")


@dataclass(frozen=True)
class Diagnostics:
    ess: np.ndarray
    rhat: np.ndarray
    acceptance_rate: tuple[float, ...]
    warnings: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "ess", np.asarray(self.ess, dtype=float))
        object.__setattr__(self, "rhat", np.asarray(self.rhat, dtype=float))


@dataclass(frozen=True)
class FitResult:
    """Thinned posterior draws plus the per-chain sequences behind them."""

    draws: np.ndarray  # (S, p)
    names: tuple[str, ...]
    diagnostics: Diagnostics
    chains: tuple[np.ndarray, ...] = ()
    frozen_scales: tuple[float, ...] = ()
    initial_scale: float = float("nan")


# ---------------------------------------------------------------------------
# Diagnostics
# ---------------------------------------------------------------------------


def effective_sample_size(chain) -> float:
    """Initial-positive-sequence (Geyer) effective sample size.

    Returns a value in (0, n]; a constant chain yields 0.0 (flagged upstream
    in ``Diagnostics.warnings`` rather than raised).
    """
    x = np.asarray(chain, dtype=float)
    n = x.shape[0]
    if n < 10:
        raise ValueError("effective_sample_size needs a chain of length >= 10")
    x = x - x.mean()
    var0 = np.dot(x, x) / n
    if var0 == 0.0:
        return 0.0
    nfft = 1 << int(2 * n - 1).bit_length()
    f = np.fft.rfft(x, nfft)
    acov = np.fft.irfft(f * np.conj(f), nfft)[:n] / n
    rho = acov / acov[0]

    # Geyer: sum consecutive lag pairs while the pair sums stay positive.
    tau = -1.0
    k = 0
    while 2 * k + 1 < n:
        pair = rho[2 * k] + rho[2 * k + 1]
        if pair <= 0.0:
            break
        tau += 2.0 * pair
        k += 1
    tau = max(tau, 1.0 / n)
    return float(min(n / tau, n))


def potential_scale_reduction(chains) -> float:
    """Split R-hat over two or more equal-length chains."""
    seqs = [np.asarray(c, dtype=float) for c in chains]
    if len(seqs) < 2:
        raise ValueError("potential_scale_reduction needs at least 2 chains")
    length = seqs[0].shape[0]
    if any(s.shape[0] != length for s in seqs):
        raise ValueError("chains must have equal length")
    if length < 10:
        raise ValueError("chains must have length >= 10")

    half = length // 2
    splits = []
    for s in seqs:
        splits.append(s[:half])
        splits.append(s[half : 2 * half])
    arr = np.stack(splits)  # (2M, half)
    within = arr.var(axis=1, ddof=1).mean()
    between = half * arr.mean(axis=1).var(ddof=1)
    if within == 0.0:
        return 1.0 if between == 0.0 else float("inf")
    var_plus = (half - 1) / half * within + between / half
    return float(max(math.sqrt(var_plus / within), 1.0))


def _build_diagnostics(chains: list[np.ndarray], names, accept_rates) -> Diagnostics:
    p = chains[0].shape[1]
    ess = np.zeros(p)
    rhat = np.ones(p)
    warnings: list[str] = []
    total = sum(c.shape[0] for c in chains)
    for j in range(p):
        per_chain = [effective_sample_size(c[:, j]) for c in chains]
        if all(v == 0.0 for v in per_chain):
            warnings.append(f"constant chain for parameter {names[j]}")
        ess[j] = min(sum(per_chain), total)
        if len(chains) >= 2:
            rhat[j] = potential_scale_reduction([c[:, j] for c in chains])
    for j in range(p):
        if rhat[j] > RHAT_GATE:
            warnings.append(f"rhat {rhat[j]:.3f} > {RHAT_GATE} for parameter {names[j]}")
        if 0.0 < ess[j] < ESS_GATE:
            warnings.append(f"ess {ess[j]:.0f} < {ESS_GATE:.0f} for parameter {names[j]}")
    return Diagnostics(
        ess=ess,
        rhat=rhat,
        acceptance_rate=tuple(float(a) for a in accept_rates),
        warnings=tuple(warnings),
    )


def _thin_across_chains(chains: list[np.ndarray], S: int) -> np.ndarray:
    """Evenly subsample the retained chains down to exactly S rows, chain order."""
    n_chains = len(chains)
    per = [S // n_chains + (1 if c < S % n_chains else 0) for c in range(n_chains)]
    parts = []
    for c, k in enumerate(per):
        if k == 0:
            continue
        length = chains[c].shape[0]
        idx = np.unique(np.round(np.linspace(0, length - 1, k)).astype(int))
        # linspace rounding can collide only when k > length, which _run guards
        parts.append(chains[c][idx])
    return np.vstack(parts)


# ---------------------------------------------------------------------------
# Adaptive random-walk Metropolis
# ---------------------------------------------------------------------------


def _adaptive_rwm_chain(logpost, x0, keep, burn_in, rng, step_scale, adapt_target):
    """One chain; returns (retained draws, acceptance rate, frozen scale).

    The proposal is x + scale * L eps with L the Cholesky factor of the
    running burn-in sample covariance (identity until the chain has moved
    enough to estimate one) and the global scale adapted by Robbins-Monro
    toward the target acceptance rate.  Both freeze at the end of burn-in,
    so detailed balance holds exactly on the retained segment.
    """
    x = np.asarray(x0, dtype=float).copy()
    p = x.shape[0]
    lp = logpost(x)
    if not np.isfinite(lp):
        raise ValueError("non-finite target density at initialization")

    log_scale = math.log(step_scale)
    chol = np.eye(p)
    # The covariance window opens at mid burn-in so the estimate is not
    # contaminated by the approach from the (arbitrary) starting point.
    cov_start = burn_in // 2
    mean = np.zeros(p)
    cov_acc = np.zeros((p, p))
    cov_count = 0
    burn_accepts = 0

    out = np.empty((keep, p))
    accepted = 0
    total = burn_in + keep
    for t in range(total):
        adapting = t < burn_in
        scale = math.exp(log_scale)
        prop = x + scale * (chol @ rng.standard_normal(p))
        lp_prop = logpost(prop)
        log_alpha = lp_prop - lp
        alpha = 1.0 if log_alpha >= 0 else math.exp(log_alpha)
        if rng.random() < alpha:
            x = prop
            lp = lp_prop
            if adapting:
                burn_accepts += 1
            else:
                accepted += 1
        if adapting:
            gamma = (t + 1.0) ** -0.6
            log_scale += gamma * (alpha - adapt_target)
            if t >= cov_start:
                cov_count += 1
                delta = x - mean
                mean += delta / cov_count
                cov_acc += np.outer(delta, x - mean)
                refresh = cov_count >= max(100, 4 * p) and (
                    cov_count % 50 == 0 or t == burn_in - 1
                )
                if refresh:
                    cov = cov_acc / cov_count
                    ridge = 1e-6 * max(np.trace(cov) / p, 1e-8)
                    try:
                        chol = np.linalg.cholesky(cov + ridge * np.eye(p))
                    except np.linalg.LinAlgError:
                        pass  # keep the previous factor
            if t == burn_in - 1 and burn_accepts == 0:
                raise RuntimeError(
                    "all proposals rejected across burn-in; proposal scaling is pathological"
                )
        else:
            out[t - burn_in] = x
    rate = accepted / keep if keep else 0.0
    return out, rate, math.exp(log_scale)


def _run_chains(logpost, x0, config: SamplerConfig, seedseq) -> tuple[list, list, list]:
    if config.draws_S < config.chains:
        raise ValueError("draws_S must be >= chains so thinning can keep one draw per chain")
    chains, rates, scales = [], [], []
    for child in seedseq.spawn(config.chains):
        rng = np.random.Generator(np.random.PCG64(child))
        draws, rate, scale = _adaptive_rwm_chain(
            logpost,
            x0,
            keep=config.draws_S,
            burn_in=config.burn_in,
            rng=rng,
            step_scale=config.step_scale,
            adapt_target=config.adapt_target,
        )
        chains.append(draws)
        rates.append(rate)
        scales.append(scale)
    return chains, rates, scales


def _fit_seedseq(config: SamplerConfig, purpose: str) -> np.random.SeedSequence:
    return purpose_seedseq(config.seed, f"inference_{purpose}")


def _metadata(config: SamplerConfig, names, rates) -> dict:
    return {
        "chains": config.chains,
        "burn_in": config.burn_in,
        "chain_length": config.draws_S,
        "seed": config.seed,
        "names": tuple(names),
        "acceptance_rate": tuple(float(r) for r in rates),
    }


def fit_assignment(
    family: AssignmentFamily, data: Dataset, config: SamplerConfig
) -> tuple[FitResult, Diagnostics]:
    """Sample p(phi | a, x) by adaptive random-walk Metropolis.

    Outcomes play no role here (factorized posterior).
    """
    layout = assignment_param_layout(family, data)

    def logpost(phi: np.ndarray) -> float:
        lp = prior_logdensity(family, phi)
        if not np.isfinite(lp):
            return float("-inf")
        return lp + assignment_loglik(family, phi, data)

    x0 = np.zeros(layout.size)
    chains, rates, scales = _run_chains(logpost, x0, config, _fit_seedseq(config, "assignment"))
    diag = _build_diagnostics(chains, layout.names, rates)
    draws = _thin_across_chains(chains, config.draws_S)
    result = FitResult(
        draws=draws,
        names=layout.names,
        diagnostics=diag,
        chains=tuple(chains),
        frozen_scales=tuple(scales),
        initial_scale=config.step_scale,
    )
    return result, diag


def fit_outcome(
    family: OutcomeFamily, data: Dataset, config: SamplerConfig
) -> tuple[FitResult, Diagnostics]:
    """Sample p(theta | y(a), a, x); the likelihood uses only the observed arm."""
    if family.kind == "gaussian_linear":
        return _fit_gaussian_gibbs(family, data, config)
    if family.kind == "paired_hierarchical_normal":
        return _fit_paired_gibbs(family, data, config)
    return _fit_outcome_rwm(family, data, config)


def _fit_outcome_rwm(family, data, config):
    layout = outcome_param_layout(family, data)
    pos = layout.positive_mask()

    def to_natural(z: np.ndarray) -> np.ndarray:
        v = z.copy()
        v[pos] = np.exp(z[pos])
        return v

    def logpost(z: np.ndarray) -> float:
        v = to_natural(z)
        lp = prior_logdensity(family, v, data)
        if not np.isfinite(lp):
            return float("-inf")
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            ll = outcome_loglik(family, v, data, arm="observed")
        if not np.isfinite(ll):
            return float("-inf")
        return lp + ll + float(z[pos].sum())  # log-Jacobian of exp transform

    x0 = np.zeros(layout.size)  # coefficients 0, positive parameters exp(0)=1
    chains_z, rates, scales = _run_chains(logpost, x0, config, _fit_seedseq(config, "outcome"))
    chains = []
    for cz in chains_z:
        cv = cz.copy()
        cv[:, pos] = np.exp(cz[:, pos])
        chains.append(cv)
    diag = _build_diagnostics(chains, layout.names, rates)
    draws = _thin_across_chains(chains, config.draws_S)
    result = FitResult(
        draws=draws,
        names=layout.names,
        diagnostics=diag,
        chains=tuple(chains),
        frozen_scales=tuple(scales),
        initial_scale=config.step_scale,
    )
    return result, diag


# ---------------------------------------------------------------------------
# Gaussian linear family: conjugate coefficient Gibbs + Metropolis on sigma^2
# ---------------------------------------------------------------------------


class _ScalarLogStep:
    """Random-walk Metropolis on log(v) with Robbins-Monro scale adaptation."""

    def __init__(self, value: float, step: float = 0.5):
        self.u = math.log(value)
        self.log_scale = math.log(step)
        self.t = 0
        self.accepts = 0
        self.trials = 0

    def step(self, logdens, rng, adapting: bool) -> float:
        # logdens takes the natural-scale value; Jacobian added here.
        u_cur = self.u
        lp_cur = logdens(math.exp(u_cur)) + u_cur
        prop = u_cur + math.exp(self.log_scale) * rng.standard_normal()
        lp_prop = logdens(math.exp(prop)) + prop
        log_alpha = lp_prop - lp_cur
        alpha = 1.0 if log_alpha >= 0 else math.exp(log_alpha)
        self.trials += 1
        if rng.random() < alpha:
            self.u = prop
            self.accepts += 1
        if adapting:
            self.t += 1
            self.log_scale += self.t**-0.6 * (alpha - _SCALAR_ACCEPT_TARGET)
        return math.exp(self.u)


def _fit_gaussian_gibbs(family, data, config):
    layout = outcome_param_layout(family, data)
    W = np.column_stack([outcome_design_matrix(family, data), data.assignments.astype(float)])
    y = data.observed_outcomes
    n, k = W.shape
    WtW = W.T @ W
    Wty = W.T @ y
    shape, rate = family.variance_prior
    prior_prec = np.eye(k) / family.coef_prior_var

    def run_chain(rng):
        sigma2 = 1.0
        beta = np.zeros(k)
        sig_step = _ScalarLogStep(sigma2, step=0.5)
        keep = config.draws_S
        out = np.empty((keep, k + 1))
        total = config.burn_in + keep
        for t in range(total):
            adapting = t < config.burn_in
            # conjugate coefficient block
            prec = prior_prec + WtW / sigma2
            chol = np.linalg.cholesky(prec)
            mean = np.linalg.solve(prec, Wty / sigma2)
            z = rng.standard_normal(k)
            beta = mean + np.linalg.solve(chol.T, z)
            # scalar Metropolis on log sigma^2 under the gamma prior
            resid = y - W @ beta
            ssr = float(resid @ resid)

            def logdens(v: float) -> float:
                return -0.5 * n * math.log(2.0 * math.pi * v) - ssr / (2.0 * v) + float(
                    gamma_logpdf(v, shape, rate)
                )

            sigma2 = sig_step.step(logdens, rng, adapting)
            if not adapting:
                out[t - config.burn_in, :k] = beta
                out[t - config.burn_in, k] = sigma2
        rate_acc = sig_step.accepts / sig_step.trials if sig_step.trials else 0.0
        return out, rate_acc, math.exp(sig_step.log_scale)

    chains, rates, scales = [], [], []
    for child in _fit_seedseq(config, "outcome").spawn(config.chains):
        rng = np.random.Generator(np.random.PCG64(child))
        draws, rate_acc, scale = run_chain(rng)
        chains.append(draws)
        rates.append(rate_acc)
        scales.append(scale)
    diag = _build_diagnostics(chains, layout.names, rates)
    draws = _thin_across_chains(chains, config.draws_S)
    result = FitResult(
        draws=draws,
        names=layout.names,
        diagnostics=diag,
        chains=tuple(chains),
        frozen_scales=tuple(scales),
        initial_scale=0.5,
    )
    return result, diag


# ---------------------------------------------------------------------------
# Paired hierarchical family: Metropolis-within-Gibbs
# ---------------------------------------------------------------------------


def _fit_paired_gibbs(family, data, config):
    """Gibbs for the paired hierarchical family.

    Blocks: location parameters (mu, m, theta) drawn jointly from their
    conditional with the pair intercepts integrated out (kills the ridge
    between intercept levels and the pre-score slope), then the intercepts
    in closed form, then scalar log-scale Metropolis for every sigma_g and
    tau.  Stationary law is unchanged by the collapse; mixing is not.
    """
    layout = outcome_param_layout(family, data)
    view = paired_view(family, data)
    cols = family.design if family.design is not None else tuple(range(data.d))
    pre = data.covariates[:, [j for j in cols if j not in family.drop_columns][0]]
    y = data.observed_outcomes
    a = data.assignments.astype(float)
    g_row = view.grade_index
    pair_row = view.pair_index
    G, P = view.n_grades, view.n_pairs
    shape, rate = family.variance_prior
    V0 = family.coef_prior_var
    n_loc = 1 if family.shared_effect else G
    n_hyper = 1 if family.shared_intercept else G

    # location design: [mu block | m block | theta block]
    ind = np.zeros((data.n, G))
    ind[np.arange(data.n), g_row] = 1.0
    if family.shared_intercept:
        mu_block = np.ones((data.n, 1))
    else:
        mu_block = ind
    if family.shared_effect:
        m_block = pre[:, None]
        a_block = a[:, None]
    else:
        m_block = ind * pre[:, None]
        a_block = ind * a[:, None]
    V = np.hstack([mu_block, m_block, a_block])
    q = V.shape[1]

    rows_by_grade = [np.nonzero(g_row == g)[0] for g in range(G)]
    pair_grade = _pair_grade_of(view)
    pairs_by_grade = [np.nonzero(pair_grade == g)[0] for g in range(G)]
    grade_counts = np.array([rows.size for rows in rows_by_grade], dtype=float)

    # per-grade Gram pieces for the collapsed location draw
    gram = [V[rows].T @ V[rows] for rows in rows_by_grade]
    vty = [V[rows].T @ y[rows] for rows in rows_by_grade]
    if family.shared_intercept:
        colsum = [V[rows].sum(axis=0) for rows in rows_by_grade]
        ysum = [float(y[rows].sum()) for rows in rows_by_grade]
    else:
        pair_mat = np.zeros((P, data.n))
        pair_mat[pair_row, np.arange(data.n)] = 1.0
        S_v = pair_mat @ V  # per-pair sums of design rows
        t_pair = pair_mat @ y
        K = [S_v[pg].T @ S_v[pg] for pg in pairs_by_grade]
        w = [S_v[pg].T @ t_pair[pg] for pg in pairs_by_grade]

    prior_prec = np.eye(q) / V0

    def draw_location(sigma, tau, rng):
        sig2 = np.square(sigma)
        A = prior_prec.copy()
        rhs = np.zeros(q)
        for g in range(G):
            A += gram[g] / sig2[g]
            rhs += vty[g] / sig2[g]
        if family.shared_intercept:
            t2 = tau[0] ** 2
            h = np.zeros(q)
            s0 = 0.0
            uy = 0.0
            for g in range(G):
                h += colsum[g] / sig2[g]
                s0 += grade_counts[g] / sig2[g]
                uy += ysum[g] / sig2[g]
            kappa = t2 / (1.0 + t2 * s0)
            A -= kappa * np.outer(h, h)
            rhs -= kappa * h * uy
        else:
            t2 = np.square(tau)
            for g in range(G):
                coef = t2[g] / (sig2[g] * (sig2[g] + 2.0 * t2[g]))
                A -= coef * K[g]
                rhs -= coef * w[g]
        chol = np.linalg.cholesky(A)
        mean = np.linalg.solve(A, rhs)
        return mean + np.linalg.solve(chol.T, rng.standard_normal(q))

    def run_chain(rng):
        b = np.zeros(P)
        mu = np.zeros(n_hyper)
        m = np.zeros(n_loc)
        th = np.zeros(n_loc)
        sigma = np.ones(G)
        tau = np.ones(n_hyper)
        sig_steps = [_ScalarLogStep(1.0) for _ in range(G)]
        tau_steps = [_ScalarLogStep(1.0) for _ in range(n_hyper)]
        keep = config.draws_S
        out = np.empty((keep, layout.size))
        total = config.burn_in + keep

        for t in range(total):
            adapting = t < config.burn_in

            # --- (mu, m, theta) jointly, pair intercepts integrated out
            loc = draw_location(sigma, tau, rng)
            mu = loc[:n_hyper]
            m = loc[n_hyper : n_hyper + n_loc]
            th = loc[n_hyper + n_loc :]

            m_row = m[g_row] if n_loc == G else np.full(data.n, m[0])
            th_row = th[g_row] if n_loc == G else np.full(data.n, th[0])
            sig2_row = np.square(sigma[g_row])

            # --- pair intercepts: conditionally normal, closed form
            resid = y - m_row * pre - th_row * a
            if family.shared_intercept:
                prec = float(np.sum(1.0 / sig2_row)) + 1.0 / tau[0] ** 2
                mean_b = (float(np.sum(resid / sig2_row)) + mu[0] / tau[0] ** 2) / prec
                b[:] = mean_b + rng.standard_normal() / math.sqrt(prec)
            else:
                prec_p = np.bincount(pair_row, weights=1.0 / sig2_row, minlength=P)
                num_p = np.bincount(pair_row, weights=resid / sig2_row, minlength=P)
                tau_p = tau[pair_grade]
                mu_p = mu[pair_grade]
                prec = prec_p + 1.0 / np.square(tau_p)
                mean_b = (num_p + mu_p / np.square(tau_p)) / prec
                b = mean_b + rng.standard_normal(P) / np.sqrt(prec)

            # --- residual scales sigma_g (gamma prior on the sd)
            fitted = b[pair_row] + m_row * pre + th_row * a
            for g in range(G):
                rows = rows_by_grade[g]
                ssr = float(np.sum(np.square(y[rows] - fitted[rows])))
                n_g = rows.size

                def logdens(s: float, ssr=ssr, n_g=n_g) -> float:
                    return (
                        -n_g * math.log(s)
                        - ssr / (2.0 * s * s)
                        + float(gamma_logpdf(s, shape, rate))
                    )

                sigma[g] = sig_steps[g].step(logdens, rng, adapting)

            # --- intercept-prior scales tau
            if family.shared_intercept:
                dev2 = float(np.square(b[0] - mu[0]))

                def logdens_tau(s: float, dev2=dev2) -> float:
                    return -math.log(s) - dev2 / (2.0 * s * s) + float(gamma_logpdf(s, shape, rate))

                tau[0] = tau_steps[0].step(logdens_tau, rng, adapting)
            else:
                for g in range(G):
                    pg = pairs_by_grade[g]
                    dev2 = float(np.sum(np.square(b[pg] - mu[g])))
                    cnt = pg.size

                    def logdens_tau(s: float, dev2=dev2, cnt=cnt) -> float:
                        return (
                            -cnt * math.log(s)
                            - dev2 / (2.0 * s * s)
                            + float(gamma_logpdf(s, shape, rate))
                        )

                    tau[g] = tau_steps[g].step(logdens_tau, rng, adapting)

            if not adapting:
                row = out[t - config.burn_in]
                row[view.sl_b] = b
                row[view.sl_m] = m
                row[view.sl_theta] = th
                row[view.sl_mu] = mu
                row[view.sl_sigma] = sigma
                row[view.sl_tau] = tau

        trials = sum(s.trials for s in sig_steps + tau_steps)
        accepts = sum(s.accepts for s in sig_steps + tau_steps)
        rate_acc = accepts / trials if trials else 0.0
        scale = math.exp(sig_steps[0].log_scale)
        return out, rate_acc, scale

    chains, rates, scales = [], [], []
    for child in _fit_seedseq(config, "outcome").spawn(config.chains):
        rng = np.random.Generator(np.random.PCG64(child))
        draws, rate_acc, scale = run_chain(rng)
        chains.append(draws)
        rates.append(rate_acc)
        scales.append(scale)
    diag = _build_diagnostics(chains, layout.names, rates)
    draws = _thin_across_chains(chains, config.draws_S)
    result = FitResult(
        draws=draws,
        names=layout.names,
        diagnostics=diag,
        chains=tuple(chains),
        frozen_scales=tuple(scales),
        initial_scale=1.0,
    )
    return result, diag


def _pair_grade_of(view) -> np.ndarray:
    pg = np.zeros(view.n_pairs, dtype=int)
    pg[view.pair_index] = view.grade_index
    return pg


# ---------------------------------------------------------------------------
# Assembly and CSV interchange
# ---------------------------------------------------------------------------


def combine_draws(
    phi_fit: FitResult | None, theta_fit: FitResult | None, config: SamplerConfig
) -> PosteriorDraws:
    S = None
    meta: dict = {"seed": config.seed, "chains": config.chains, "burn_in": config.burn_in}
    for label, fit in (("phi", phi_fit), ("theta", theta_fit)):
        if fit is None:
            continue
        if S is None:
            S = fit.draws.shape[0]
        elif fit.draws.shape[0] != S:
            raise ValueError("phi and theta fits must carry the same number of draws")
        meta[f"{label}_names"] = fit.names
    if S is None:
        raise ValueError("at least one of phi_fit/theta_fit is required")
    return PosteriorDraws(
        phi_draws=None if phi_fit is None else phi_fit.draws,
        theta_draws=None if theta_fit is None else theta_fit.draws,
        draw_count=S,
        chain_metadata=meta,
    )


def export_draws_csv(draws: np.ndarray, names, path: str | Path) -> None:
    """One row per draw, named columns; the import side accepts the same format."""
    draws = np.atleast_2d(np.asarray(draws, dtype=float))
    names = tuple(names)
    if draws.shape[1] != len(names):
        raise ValueError("draw matrix width does not match column names")
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(names)
        for row in draws:
            writer.writerow([repr(float(v)) for v in row])


def import_draws_csv(path: str | Path, expected_names=None) -> tuple[np.ndarray, tuple[str, ...]]:
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            names = tuple(h.strip() for h in next(reader))
        except StopIteration:
            raise ValueError(f"{path}: empty draws file") from None
        rows = [[float(c) for c in row] for row in reader if row]
    if not rows:
        raise ValueError(f"{path}: no draws")
    if expected_names is not None and tuple(expected_names) != names:
        raise ValueError(f"{path}: draw columns {names} do not match expected {tuple(expected_names)}")
    return np.asarray(rows, dtype=float), names
