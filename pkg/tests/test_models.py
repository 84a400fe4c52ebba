import numpy as np
import pytest
from scipy import stats
from scipy.special import expit

from causalcheck.core import Dataset
from causalcheck.models import (
    AssignmentFamily,
    OutcomeFamily,
    ParamVector,
    assignment_forward,
    assignment_loglik,
    assignment_param_layout,
    assignment_prob1,
    conditional_cate,
    outcome_forward,
    outcome_loglik,
    outcome_logpdf_units,
    outcome_mean,
    outcome_param_layout,
    prior_logdensity,
)


def _flat_dataset(n, d=1, a=None, y=None, offsets=None):
    x = np.full((n, d), 0.5)
    a = np.zeros(n, dtype=int) if a is None else np.asarray(a)
    y = np.zeros(n) if y is None else np.asarray(y, dtype=float)
    return Dataset(covariates=x, assignments=a, observed_outcomes=y, offsets=offsets)


# ---------------------------------------------------------------------------
# assignment families
# ---------------------------------------------------------------------------


def test_assignment_loglik_zero_phi_is_n_log_half():
    data = _flat_dataset(10, d=2, a=[0, 1] * 5)
    value = assignment_loglik(AssignmentFamily(), np.zeros(2), data)
    assert value == pytest.approx(-6.931471805599453)  # 10 log(1/2)


def test_shifted_family_zero_phi_contributions():
    # success probability 0.7 + 0.3 * 0.5 = 0.85
    fam = AssignmentFamily(kind="bernoulli_logistic_shifted", shift=0.7)
    data1 = _flat_dataset(1, a=[1])
    data0 = _flat_dataset(1, a=[0])
    assert assignment_loglik(fam, [0.0], data1) == pytest.approx(-0.16251892949777494)
    assert assignment_loglik(fam, [0.0], data0) == pytest.approx(-1.8971199848858813)


def test_assignment_loglik_scalar_oracle():
    data = Dataset(covariates=[[2.0]], assignments=[0], observed_outcomes=[0.0])
    value = assignment_loglik(AssignmentFamily(), [1.0], data)
    assert value == pytest.approx(-2.1269280110429714)  # log(1 - logistic(2))


def test_assignment_forward_mean_plain():
    data = _flat_dataset(100_000, d=2, a=None)
    rng = np.random.default_rng(0)
    draws = assignment_forward(AssignmentFamily(), np.zeros(2), data, rng)
    assert abs(draws.mean() - 0.5) < 0.005


def test_assignment_forward_mean_shifted():
    fam = AssignmentFamily(kind="bernoulli_logistic_shifted", shift=0.7)
    data = _flat_dataset(100_000)
    draws = assignment_forward(fam, [0.0], data, np.random.default_rng(1))
    assert abs(draws.mean() - 0.85) < 0.005


def test_assignment_forward_saturates():
    data = Dataset(covariates=np.full((50, 1), 10.0), assignments=np.zeros(50, dtype=int),
                   observed_outcomes=np.zeros(50))
    draws = assignment_forward(AssignmentFamily(), [50.0], data, np.random.default_rng(2))
    assert draws.tolist() == [1] * 50


def test_assignment_forward_matches_model_probabilities():
    # per-unit empirical frequency within 4 standard errors of the model value
    rng = np.random.default_rng(5)
    data = Dataset(covariates=rng.random((5, 2)), assignments=np.zeros(5, dtype=int),
                   observed_outcomes=np.zeros(5))
    fam = AssignmentFamily()
    phi = np.array([1.2, -0.7])
    p = assignment_prob1(fam, phi, data)
    reps = 100_000
    counts = np.zeros(5)
    draw_rng = np.random.default_rng(6)
    for _ in range(100):
        counts += (draw_rng.random((1000, 5)) < p).sum(axis=0)
    freq = counts / reps
    se = np.sqrt(p * (1 - p) / reps)
    assert (np.abs(freq - p) < 4 * se).all()


def test_assignment_layout_mismatch_raises():
    data = _flat_dataset(4, d=3)
    with pytest.raises(ValueError):
        assignment_loglik(AssignmentFamily(), np.zeros(2), data)


# ---------------------------------------------------------------------------
# outcome families: log-likelihoods
# ---------------------------------------------------------------------------


def test_gaussian_standard_normal_at_zero():
    data = _flat_dataset(5, d=2)
    fam = OutcomeFamily(kind="gaussian_linear")
    theta = np.array([0.0, 0.0, 0.0, 1.0])  # coefs, treat, sigma2
    assert outcome_loglik(fam, theta, data) == pytest.approx(-4.594692666023363)


def test_poisson_offset_scalar_oracle():
    # t=2, linear predictor 0 -> mu=2; y=2 contributes 2 log 2 - 2 - log 2!
    data = Dataset(covariates=[[0.5]], assignments=[0], observed_outcomes=[2.0], offsets=[2.0])
    fam = OutcomeFamily(kind="poisson_loglinear")
    theta = np.array([0.0, 0.0])
    assert outcome_loglik(fam, theta, data) == pytest.approx(-1.3068528194400546)


def test_poisson_matches_scipy_pmf(count_dataset):
    fam = OutcomeFamily(kind="poisson_loglinear", includes_intercept=True)
    theta = np.array([1.5, -0.2, 0.4, -0.3])
    mu = outcome_mean(fam, theta, count_dataset, count_dataset.assignments)
    expected = stats.poisson.logpmf(count_dataset.observed_outcomes, mu).sum()
    assert outcome_loglik(fam, theta, count_dataset) == pytest.approx(expected)


def test_negbin_matches_scipy_pmf(count_dataset):
    fam = OutcomeFamily(kind="negbin_loglinear", includes_intercept=True)
    k = 3.5
    theta = np.array([1.5, -0.2, 0.4, -0.3, k])
    mu = outcome_mean(fam, theta, count_dataset, count_dataset.assignments)
    # scipy parameterization: n=k, p=k/(k+mu) gives mean mu, var mu + mu^2/k
    expected = stats.nbinom.logpmf(count_dataset.observed_outcomes, k, k / (k + mu)).sum()
    assert outcome_loglik(fam, theta, count_dataset) == pytest.approx(expected)


def test_heteroscedastic_reduces_to_poisson_variance_gaussian(count_dataset):
    # dispersion 1 gives a gaussian with variance equal to the mean
    fam = OutcomeFamily(kind="heteroscedastic_gaussian_loglinear", includes_intercept=True)
    theta = np.array([1.5, -0.2, 0.4, -0.3, 1.0])
    mu = outcome_mean(fam, theta, count_dataset, count_dataset.assignments)
    expected = stats.norm.logpdf(count_dataset.observed_outcomes, mu, np.sqrt(mu)).sum()
    assert outcome_loglik(fam, theta, count_dataset) == pytest.approx(expected)


def test_hetero_and_poisson_share_mean_function(count_dataset):
    theta = np.array([1.5, -0.2, 0.4, -0.3])
    pois = OutcomeFamily(kind="poisson_loglinear", includes_intercept=True)
    het = OutcomeFamily(kind="heteroscedastic_gaussian_loglinear", includes_intercept=True)
    mu_p = outcome_mean(pois, theta, count_dataset, 1)
    mu_h = outcome_mean(het, np.append(theta, 2.0), count_dataset, 1)
    assert np.allclose(mu_p, mu_h)


def test_count_family_rejects_negative_counts():
    data = Dataset(covariates=[[0.5]], assignments=[0], observed_outcomes=[-1.0], offsets=[1.0])
    fam = OutcomeFamily(kind="poisson_loglinear")
    with pytest.raises(ValueError, match="nonnegative"):
        outcome_loglik(fam, np.array([0.0, 0.0]), data)


def test_single_arm_requires_outcomes(small_dataset):
    fam = OutcomeFamily(kind="gaussian_linear")
    theta = np.zeros(5)
    theta[-1] = 1.0
    with pytest.raises(ValueError, match="outcomes"):
        outcome_loglik(fam, theta, small_dataset, arm=1)


def test_densities_normalize():
    # exp of the per-unit log-density integrates/sums to 1 within 1e-4
    data = Dataset(covariates=[[0.8]], assignments=[1], observed_outcomes=[1.0], offsets=[1.3])
    grid_y = np.arange(0, 4000)
    for kind, theta in [
        ("poisson_loglinear", np.array([1.2, 0.3])),
        ("negbin_loglinear", np.array([1.2, 0.3, 2.0])),
    ]:
        fam = OutcomeFamily(kind=kind)
        ll = np.array(
            [outcome_logpdf_units(fam, theta, data, 1, [float(y)])[0] for y in grid_y]
        )
        assert np.exp(ll).sum() == pytest.approx(1.0, abs=1e-4)
    for kind, theta in [
        ("gaussian_linear", np.array([0.4, 0.7, 2.0])),
        ("heteroscedastic_gaussian_loglinear", np.array([0.4, 0.7, 3.0])),
    ]:
        fam = OutcomeFamily(kind=kind)
        mean = outcome_mean(fam, theta, data, 1)[0]
        span = np.linspace(mean - 40, mean + 40, 20001)
        ll = outcome_logpdf_units(fam, theta, data, 1, span[:, None] * np.ones((1, 1)))
        dens = np.exp(np.array([l[0] for l in ll]))
        assert np.trapezoid(dens, span) == pytest.approx(1.0, abs=1e-4)


# ---------------------------------------------------------------------------
# forward samplers
# ---------------------------------------------------------------------------


def test_gaussian_forward_degenerate_noise(small_dataset):
    fam = OutcomeFamily(kind="gaussian_linear")
    theta = np.array([0.5, -0.3, 0.2, 1.5, 1e-12])
    table = outcome_forward(fam, theta, small_dataset, np.random.default_rng(0))
    mu0 = outcome_mean(fam, theta, small_dataset, 0)
    mu1 = outcome_mean(fam, theta, small_dataset, 1)
    assert np.abs(table.y0 - mu0).max() < 1e-5
    assert np.abs(table.y1 - mu1).max() < 1e-5


def test_gaussian_forward_treatment_effect_mc():
    n = 100_000
    data = Dataset(covariates=np.random.default_rng(1).random((n, 2)),
                   assignments=np.zeros(n, dtype=int), observed_outcomes=np.zeros(n))
    fam = OutcomeFamily(kind="gaussian_linear")
    tau, sigma2 = 2.5, 1.0
    theta = np.array([0.4, -0.2, tau, sigma2])
    table = outcome_forward(fam, theta, data, np.random.default_rng(2))
    se = np.sqrt(2 * sigma2 / n)
    assert abs((table.y1 - table.y0).mean() - tau) < 3 * se


def test_count_forward_support(count_dataset):
    fam = OutcomeFamily(kind="poisson_loglinear", includes_intercept=True)
    theta = np.array([1.5, -0.2, 0.4, -0.3])
    table = outcome_forward(fam, theta, count_dataset, np.random.default_rng(3))
    for arr in (table.y0, table.y1):
        assert (arr >= 0).all()
        assert np.allclose(arr, np.round(arr))


def test_negbin_forward_moments():
    n = 200_000
    data = Dataset(covariates=np.full((n, 1), 1.0), assignments=np.zeros(n, dtype=int),
                   observed_outcomes=np.zeros(n), offsets=np.full(n, 1.0))
    k = 4.0
    fam = OutcomeFamily(kind="negbin_loglinear")
    theta = np.array([2.0, 0.5, k])  # mu0 = e^2 ~ 7.39
    mu = float(np.exp(2.0))
    table = outcome_forward(fam, theta, data, np.random.default_rng(4))
    var = mu + mu * mu / k
    assert abs(table.y0.mean() - mu) < 4 * np.sqrt(var / n)
    assert abs(table.y0.var() - var) / var < 0.05


# ---------------------------------------------------------------------------
# conditional treatment effects
# ---------------------------------------------------------------------------


def test_cate_gaussian_constant(small_dataset):
    fam = OutcomeFamily(kind="gaussian_linear")
    theta = np.array([0.1, 0.2, 0.3, 2.5, 1.0])
    assert np.allclose(conditional_cate(fam, theta, small_dataset), 2.5)


def test_cate_poisson_closed_form():
    data = Dataset(covariates=[[0.0]], assignments=[0], observed_outcomes=[1.0], offsets=[1.0])
    fam = OutcomeFamily(kind="poisson_loglinear")
    theta = np.array([0.0, np.log(2.0)])
    assert conditional_cate(fam, theta, data)[0] == pytest.approx(1.0)


def test_cate_null_effect(count_dataset):
    fam = OutcomeFamily(kind="negbin_loglinear", includes_intercept=True)
    theta = np.array([1.0, 0.5, -0.5, 0.0, 2.0])
    assert np.allclose(conditional_cate(fam, theta, count_dataset), 0.0)


def test_cate_paired_is_grade_effect(paired_dataset):
    fam = OutcomeFamily(kind="paired_hierarchical_normal")
    layout = outcome_param_layout(fam, paired_dataset)
    theta = np.zeros(layout.size)
    names = layout.names
    for i, nm in enumerate(names):
        if nm.startswith("theta_"):
            theta[i] = 10.0 * int(nm.split("_")[1])
        if nm.startswith(("sigma", "tau")):
            theta[i] = 1.0
    cate = conditional_cate(fam, theta, paired_dataset)
    grades = paired_dataset.pair_structure.grades
    assert np.allclose(cate, 10.0 * grades)


# ---------------------------------------------------------------------------
# priors
# ---------------------------------------------------------------------------


def test_standard_normal_prior_at_zero():
    fam = AssignmentFamily()
    assert prior_logdensity(fam, np.zeros(3)) == pytest.approx(3 * (-0.5 * np.log(2 * np.pi)))


def test_gamma_unit_prior_at_one_contributes_minus_one():
    fam = OutcomeFamily(kind="gaussian_linear")
    base = prior_logdensity(fam, np.array([0.0, 1.0]))  # one coef at 0, sigma2 = 1
    coef_part = -0.5 * np.log(2 * np.pi)
    assert base - coef_part == pytest.approx(-1.0)


def test_gamma_10_1_prior_scalar_oracle():
    # gamma(shape 10, rate 1) log pdf at 10: 9 log 10 - 10 - log Gamma(10)
    from causalcheck.models import gamma_logpdf

    assert gamma_logpdf(10.0, 10.0, 1.0) == pytest.approx(-2.078561643135055)
    assert gamma_logpdf(10.0, 10.0, 1.0) == pytest.approx(
        stats.gamma.logpdf(10.0, a=10.0, scale=1.0)
    )


def test_prior_outside_support_is_minus_inf():
    fam = OutcomeFamily(kind="gaussian_linear")
    assert prior_logdensity(fam, np.array([0.0, -1.0])) == float("-inf")


def test_paired_prior_matches_manual(paired_dataset):
    fam = OutcomeFamily(kind="paired_hierarchical_normal")
    layout = outcome_param_layout(fam, paired_dataset)
    rng = np.random.default_rng(0)
    theta = rng.normal(0, 1, layout.size)
    theta[layout.positive_mask()] = np.abs(theta[layout.positive_mask()]) + 0.5
    value = prior_logdensity(fam, theta, paired_dataset)

    names = layout.names
    idx = {nm: i for i, nm in enumerate(names)}
    manual = 0.0
    grades = sorted({int(nm.split("_")[1]) for nm in names if nm.startswith("mu_")})
    for g in grades:
        for stem in ("m", "theta", "mu"):
            manual += stats.norm.logpdf(theta[idx[f"{stem}_{g}"]], 0, 100.0)
        for stem in ("sigma", "tau"):
            manual += stats.gamma.logpdf(theta[idx[f"{stem}_{g}"]], a=10.0, scale=1.0)
    ps = paired_dataset.pair_structure
    pair_ids = np.unique(ps.pair_ids)
    for p in pair_ids:
        g = int(ps.grades[ps.pair_ids == p][0])
        b = theta[idx[f"b_{p}"]]
        manual += stats.norm.logpdf(b, theta[idx[f"mu_{g}"]], theta[idx[f"tau_{g}"]])
    assert value == pytest.approx(manual)


def test_param_vector_validates_layout(small_dataset):
    fam = OutcomeFamily(kind="gaussian_linear")
    layout = outcome_param_layout(fam, small_dataset)
    with pytest.raises(ValueError):
        ParamVector(values=np.zeros(layout.size), layout=layout)  # sigma2 = 0 not positive
    ok = np.zeros(layout.size)
    ok[-1] = 2.0
    vec = ParamVector(values=ok, layout=layout)
    assert outcome_loglik(fam, vec, small_dataset) < 0


def test_dropped_design_column_is_structural(small_dataset):
    fam = OutcomeFamily(kind="gaussian_linear", drop_columns=(0,))
    layout = outcome_param_layout(fam, small_dataset)
    assert "beta_x1" not in layout.names
    assert layout.size == 2 + 1 + 1  # two remaining covariates, treat, sigma2


def test_assignment_param_layout_names(count_dataset):
    fam = AssignmentFamily(includes_intercept=True)
    layout = assignment_param_layout(fam, count_dataset)
    assert layout.names == ("intercept", "phi_senior", "phi_roach1")
