import math
import time

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import special
from scipy.special import logsumexp

from antipodal.errors import DiagnosticError, DomainError, ResourceError
from antipodal.importance import (
    LemmaIntegralSpec,
    importance_Z,
    lemma_J_mc,
    lemma_log_integrand,
    pairwise_power_sums,
    wrapped_normal_logpdf,
)
from antipodal.model import ModelParams
from antipodal.quadrature import (
    QuadratureSpec,
    exact_I,
    exact_I_converged,
    exact_mean_linear,
    exact_mgf,
    gaussian_slice_log_integral,
    gaussian_slice_log_integral_det,
    log_Z2_closed_form,
    truncated_gaussian_log_integral,
)
from antipodal.testfunc import COS, constant

LOG_8PI2 = math.log(8 * math.pi**2)
LOG_16PI = math.log(16 * math.pi)


def bessel_i0_series(x, terms=20):
    return sum((x / 2) ** (2 * k) / math.factorial(k) ** 2 for k in range(terms))


def test_closed_form_two_points():
    assert log_Z2_closed_form(2.0) == pytest.approx(LOG_8PI2, abs=1e-14)
    assert log_Z2_closed_form(1.0) == pytest.approx(LOG_16PI, abs=1e-14)
    assert LOG_16PI == pytest.approx(3.917319, abs=1e-6)


def test_quadrature_two_points_even_beta_exact():
    p = ModelParams(2, 2.0)
    assert exact_I(p, spec=QuadratureSpec(64, reduce_rotation=True)) == pytest.approx(LOG_8PI2, abs=1e-12)
    assert exact_I(p, spec=QuadratureSpec(64)) == pytest.approx(LOG_8PI2, abs=1e-12)


def test_quadrature_two_points_kinked():
    res = exact_I_converged(ModelParams(2, 1.0), spec=QuadratureSpec(256, reduce_rotation=True))
    assert abs(res.log_value - LOG_16PI) < 1e-4
    assert abs(res.extrapolated_log_value - LOG_16PI) < 1e-9
    assert abs(res.log_value - LOG_16PI) <= res.convergence_estimate


@pytest.mark.parametrize("beta", [0.5, 1.5, 3.0, 6.0])
def test_quadrature_two_points_other_beta(beta):
    res = exact_I_converged(ModelParams(2, beta), spec=QuadratureSpec(1024, reduce_rotation=True))
    assert res.extrapolated_log_value == pytest.approx(log_Z2_closed_form(beta), abs=1e-7)


def test_single_point_bessel():
    for beta in (0.5, 1.0, 3.0):
        lv = exact_I(ModelParams(1, beta), COS, 1.0, "none", QuadratureSpec(64))
        assert lv == pytest.approx(math.log(2 * math.pi * bessel_i0_series(1.0)), abs=1e-13)
    assert bessel_i0_series(1.0) == pytest.approx(1.266066, abs=1e-6)


def test_constant_test_function_factors_out():
    p = ModelParams(3, 2.0)
    base = exact_I(p, spec=QuadratureSpec(32))
    assert exact_I(p, constant(0.7), 2.0, "n", QuadratureSpec(32)) == pytest.approx(base + 2.0 * 0.7, abs=1e-12)


@pytest.mark.parametrize("n", [2, 3, 4, 5])
@pytest.mark.parametrize("beta", [0.5, 1.0, 2.0])
def test_rotation_reduction_is_invariant(n, beta):
    m = {2: 64, 3: 32, 4: 16, 5: 12}[n]
    full = exact_I(ModelParams(n, beta), spec=QuadratureSpec(m))
    reduced = exact_I(ModelParams(n, beta), spec=QuadratureSpec(m, reduce_rotation=True))
    assert reduced == pytest.approx(full, rel=1e-9)


def test_rotation_reduction_requires_invariant_integrand():
    with pytest.raises(DomainError):
        exact_I(ModelParams(3, 1.0), COS, 1.0, "n", QuadratureSpec(16, reduce_rotation=True))


def test_resource_guards():
    with pytest.raises(ResourceError):
        exact_I(ModelParams(8, 1.0), spec=QuadratureSpec(8))
    with pytest.raises(ResourceError):
        exact_I(ModelParams(13, 1.0), spec=QuadratureSpec(8, reduce_rotation=True))
    with pytest.raises(ResourceError):
        exact_I(ModelParams(4, 1.0), spec=QuadratureSpec(1024))
    with pytest.raises(DomainError):
        QuadratureSpec(4)


@pytest.mark.parametrize("beta", [1.0, 3.0])
def test_refinement_is_within_convergence_estimate(beta):
    p = ModelParams(3, beta)
    coarse = exact_I_converged(p, COS, 1.0, spec=QuadratureSpec(32))
    fine = exact_I(p, COS, 1.0, "n", QuadratureSpec(64))
    assert abs(fine - coarse.log_value) < coarse.convergence_estimate


def test_mgf_and_mean_small_n():
    p = ModelParams(3, 2.0)
    # rotation invariance makes the mean of cos zero
    assert exact_mean_linear(p, COS, 32) == pytest.approx(0.0, abs=1e-9)
    mgf = exact_mgf(p, COS, 1.0, "n", 32)
    assert 1.0 < mgf < bessel_i0_series(1.0)


def test_quadrature_runtime_small():
    start = time.perf_counter()
    exact_I(ModelParams(4, 1.0), spec=QuadratureSpec(64, reduce_rotation=True))
    assert time.perf_counter() - start < 5.0


# ---------------------------------------------------------------- wrapped normal


@pytest.mark.parametrize("sd", [0.05, 0.5, 1.5, 4.0])
def test_wrapped_normal_density(sd):
    x = np.linspace(-math.pi, math.pi, 201)
    k = np.arange(-40, 41)
    ref = (logsumexp(-0.5 * ((x[:, None] + 2 * math.pi * k) / sd) ** 2, axis=1)
           - math.log(sd * math.sqrt(2 * math.pi)))
    np.testing.assert_allclose(wrapped_normal_logpdf(x, sd), ref, atol=1e-12)
    grid = np.linspace(-math.pi, math.pi, 4096, endpoint=False)
    total = np.exp(wrapped_normal_logpdf(grid, sd)).sum() * 2 * math.pi / 4096
    assert total == pytest.approx(1.0, abs=1e-10)


# ---------------------------------------------------------------- importance sampling


def test_importance_two_points_closed_form():
    est = importance_Z(ModelParams(2, 2.0), 10**5, seed=1)
    assert abs(est.z_score(LOG_8PI2)) < 3


def test_importance_three_points_against_quadrature():
    q = exact_I_converged(ModelParams(3, 1.0), spec=QuadratureSpec(256, reduce_rotation=True))
    est = importance_Z(ModelParams(3, 1.0), 10**5, seed=2)
    assert abs(est.z_score(q.extrapolated_log_value, q.convergence_estimate)) < 3


def test_importance_error_scaling():
    p = ModelParams(2, 2.0)
    se = [importance_Z(p, m, seed=3).std_error for m in (10**3, 10**4, 10**5)]
    for a, b in zip(se, se[1:]):
        assert 2.5 <= a / b <= 4.0


def test_importance_is_deterministic():
    p = ModelParams(4, 1.0)
    a = importance_Z(p, 5000, seed=7, shards=3)
    b = importance_Z(p, 5000, seed=7, shards=3)
    assert a.value == b.value and a.std_error == b.std_error


def test_importance_reports_degenerate_weights():
    with pytest.raises(DiagnosticError) as info:
        importance_Z(ModelParams(12, 2.0), 1000, seed=0, spread=3.0)
    assert info.value.ess < 10


def test_importance_preconditions():
    with pytest.raises(DomainError):
        importance_Z(ModelParams(1, 2.0), 10**4, seed=0)
    with pytest.raises(DomainError):
        importance_Z(ModelParams(3, 2.0), 999, seed=0)


def _split_half_agreement(estimator, reps=100):
    hits = 0
    for r in range(reps):
        a, b = estimator(2 * r), estimator(2 * r + 1)
        hits += abs(a.value - b.value) < 4 * math.hypot(a.std_error, b.std_error)
    return hits / reps


def test_importance_standard_error_self_consistent():
    p = ModelParams(3, 2.0)
    assert _split_half_agreement(lambda s: importance_Z(p, 1000, seed=s)) >= 0.95


def test_lemma_standard_error_self_consistent():
    spec = LemmaIntegralSpec(20, 1.0, -0.2, 0.0, 0.2, 2000)
    assert _split_half_agreement(lambda s: lemma_J_mc(spec, s)) >= 0.95
    assert _split_half_agreement(lambda s: lemma_J_mc(spec, s, proposal="uniform")) >= 0.95


# ---------------------------------------------------------------- box integrals


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 20), st.integers(0, 2**32 - 1))
def test_power_sums_match_brute_force(m, seed):
    x = np.random.default_rng(seed).normal(0, 1.5, size=(m,))
    s2, s4 = pairwise_power_sums(x)
    d = np.subtract.outer(x, x)[np.triu_indices(m, 1)]
    assert s2 == pytest.approx(np.sum(d**2), rel=1e-10, abs=1e-12)
    assert s4 == pytest.approx(np.sum(d**4), rel=1e-10, abs=1e-12)


def test_power_sums_thousand_vectors():
    rng = np.random.default_rng(11)
    for _ in range(1000):
        m = int(rng.integers(2, 21))
        x = rng.uniform(-1, 1, size=m)
        d = np.subtract.outer(x, x)[np.triu_indices(m, 1)]
        s2, s4 = pairwise_power_sums(x)
        assert abs(s2 - np.sum(d**2)) <= 1e-10 * np.sum(d**2)
        assert abs(s4 - np.sum(d**4)) <= 1e-10 * np.sum(d**4)


def test_lemma_integrand_includes_pinned_point():
    spec = LemmaIntegralSpec(3, 0.5, 0.1, 2.0, 0.1)
    t = np.array([0.2, -0.1])
    full = [0.2, -0.1, 0.0]
    d = [full[j] - full[k] for j in range(3) for k in range(j + 1, 3)]
    ref = -0.5 * sum(x**2 for x in d) + 0.1 * sum(x**4 for x in d) + 2.0 / math.sqrt(3) * 0.1
    assert lemma_log_integrand(spec, t) == pytest.approx(ref, abs=1e-14)


@pytest.mark.parametrize("a, h", [(1.0, 0.3), (0.25, 0.7), (3.0, 1.2)])
def test_lemma_two_points_erf(a, h):
    spec = LemmaIntegralSpec(2, a, 0.0, 0.0, 0.1, 10**5)
    exact = math.sqrt(math.pi / a) * special.erf(math.sqrt(a) * spec.half_width)
    est = lemma_J_mc(spec, seed=5)
    assert abs(est.z_score(math.log(exact))) < 4
    assert truncated_gaussian_log_integral(2, a, spec.half_width) == pytest.approx(math.log(exact), abs=1e-10)


def test_lemma_wide_box_matches_truncated_gaussian():
    spec = LemmaIntegralSpec(200, 1.0, 0.0, 0.0, 0.2, 10**5)
    est = lemma_J_mc(spec, seed=0)
    exact = truncated_gaussian_log_integral(200, 1.0, spec.half_width)
    assert abs(est.z_score(exact)) < 4
    assert est.diagnostics["ess"] > 0.99 * spec.sample_count
    # the box cuts about 3 standard deviations per coordinate; over 199
    # coordinates that costs ~0.24 against the untruncated formula
    untruncated = 0.5 * math.log(200) + 199 / 2 * math.log(math.pi / 200)
    assert exact - untruncated == pytest.approx(-0.243, abs=0.005)


def test_lemma_uniform_proposal_agrees_on_narrow_box():
    spec = LemmaIntegralSpec(50, 0.25, -1 / 96, 0.0, 0.1, 10**5)
    gauss = lemma_J_mc(spec, seed=1)
    unif = lemma_J_mc(spec, seed=1, proposal="uniform")
    assert abs(unif.z_score(gauss.value, gauss.std_error)) < 4


def test_lemma_uniform_proposal_degenerates_on_wide_box():
    spec = LemmaIntegralSpec(200, 1.0, 0.0, 0.0, 0.2, 10**4)
    assert lemma_J_mc(spec, seed=0, proposal="uniform").diagnostics["ess"] < 10


@pytest.mark.parametrize("n", range(2, 11))
@pytest.mark.parametrize("a", [0.25, 1.0, 3.0])
def test_gaussian_determinant_identity(n, a):
    closed = gaussian_slice_log_integral(n, a)
    dense = gaussian_slice_log_integral_det(n, a)
    assert closed == pytest.approx(dense, rel=1e-10)


def test_truncated_gaussian_tends_to_untruncated():
    a = 0.25
    deficits = [truncated_gaussian_log_integral(n, a, 10.0 * math.sqrt(1 / (a * n))) - gaussian_slice_log_integral(n, a)
                for n in (10, 100)]
    assert all(abs(d) < 1e-9 for d in deficits)


def test_lemma_spec_validation():
    with pytest.raises(DomainError):
        LemmaIntegralSpec(1, 1.0)
    with pytest.raises(DomainError):
        LemmaIntegralSpec(5, 0.0)
    with pytest.raises(DomainError):
        LemmaIntegralSpec(5, 1.0, epsilon=0.5)
