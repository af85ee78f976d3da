import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from acbvar import (ShrinkageConfig, assemble_prior, build_blocks, compute_posterior,
                    log_marginal_likelihood, posterior_equation, sample_posterior,
                    structural_to_reduced, udl_factorize)
from acbvar import conjugate
from acbvar.conjugate import (NumericalError, StructuralDraw, equation_log_ml, impact_matrix,
                              posterior_summaries)
from acbvar.prior import NIGParams
from acbvar.testkit import oracle_dense_posterior, student_t_logpdf
from conftest import random_spd

SCALAR = NIGParams(np.zeros(1), np.ones(1), 1.0, 0.5)


def test_scalar_hand_case():
    eq = posterior_equation(np.array([0.0]), np.ones((1, 1)), SCALAR)
    np.testing.assert_allclose(eq.K, [[2.0]])
    assert eq.theta_hat[0] == 0.0
    assert eq.S_hat == 0.5
    assert eq.nu_hat == 1.5
    assert equation_log_ml(eq) == pytest.approx(-1.03972, abs=1e-5)
    assert equation_log_ml(eq) == pytest.approx(student_t_logpdf(0.0, 2.0), abs=1e-12)


def test_empty_data_returns_prior():
    prior = NIGParams(np.array([1.0, -2.0]), np.array([0.5, 2.0]), 2.0, 3.0)
    eq = posterior_equation(np.zeros(0), np.zeros((0, 2)), prior)
    np.testing.assert_allclose(eq.theta_hat, prior.m)
    np.testing.assert_allclose(eq.K, np.diag(1 / prior.V))
    assert eq.S_hat == pytest.approx(prior.S)
    assert equation_log_ml(eq) == pytest.approx(0.0, abs=1e-12)
    summary = posterior_summaries(conjugate.PosteriorNIG((eq,), 1, 0, 0))[0]
    np.testing.assert_allclose(summary.theta_mean, prior.m, rtol=1e-14)


def _random_instance(rng, k, T, dense):
    X = rng.standard_normal((T, k))
    y = rng.standard_normal(T)
    V = random_spd(rng, k) if dense else rng.uniform(0.1, 3.0, k)
    return y, X, NIGParams(rng.standard_normal(k), V, rng.uniform(0.5, 4), rng.uniform(0.1, 3))


@given(st.integers(1, 10), st.integers(0, 30), st.booleans(), st.integers(0, 2**31))
def test_matches_dense_oracle(k, T, dense, seed):
    y, X, prior = _random_instance(np.random.default_rng(seed), k, T, dense)
    eq = posterior_equation(y, X, prior)
    theta, K, S_hat = oracle_dense_posterior(y, X, prior)
    np.testing.assert_allclose(eq.theta_hat, theta, rtol=1e-10, atol=1e-10)
    np.testing.assert_allclose(eq.K, K, rtol=1e-10, atol=1e-10)
    assert eq.S_hat == pytest.approx(S_hat, rel=1e-10, abs=1e-10)
    assert eq.S_hat > 0
    assert eq.nu_hat >= eq.nu
    assert np.linalg.norm(eq.chol @ eq.chol.T - K) <= 1e-8 * np.linalg.norm(K)


@given(st.integers(0, 2**31))
def test_row_order_is_irrelevant(seed):
    rng = np.random.default_rng(seed)
    y, X, prior = _random_instance(rng, 4, 15, False)
    perm = rng.permutation(15)
    a, b = posterior_equation(y, X, prior), posterior_equation(y[perm], X[perm], prior)
    np.testing.assert_allclose(a.theta_hat, b.theta_hat, rtol=1e-10, atol=1e-12)
    assert equation_log_ml(a) == pytest.approx(equation_log_ml(b), rel=1e-10)


def test_scale_shift_in_no_regressor_case():
    """Rescaling y by c with (m, V, S) adjusted shifts the log-ML by exactly -T log c."""
    rng = np.random.default_rng(4)
    T, c = 12, 3.7
    y = rng.standard_normal(T)
    X = np.ones((T, 1))
    base = NIGParams(np.array([0.3]), np.array([2.0]), 2.0, 1.5)
    scaled = NIGParams(c * base.m, base.V, base.nu, c**2 * base.S)
    a = equation_log_ml(posterior_equation(y, X, base))
    b = equation_log_ml(posterior_equation(c * y, X, scaled))
    assert b - a == pytest.approx(-T * math.log(c), rel=1e-12)


def test_additivity_and_equation_independence(small_var):
    _, blocks, prior = small_var
    post = compute_posterior(blocks, prior)
    terms = log_marginal_likelihood(post, prior, per_equation=True)
    assert log_marginal_likelihood(post) == pytest.approx(terms.sum(), rel=1e-14)
    # change only equation 2's prior
    eqs = list(prior.equations)
    eqs[2] = NIGParams(eqs[2].m + 1.0, eqs[2].V * 2.0, eqs[2].nu, eqs[2].S)
    changed = compute_posterior(blocks, type(prior)(tuple(eqs), prior.n, prior.p))
    other = log_marginal_likelihood(changed, per_equation=True)
    np.testing.assert_array_equal(other[:2], terms[:2])
    assert other[2] != terms[2]


def test_threads_do_not_change_posterior(small_var):
    _, blocks, prior = small_var
    a = compute_posterior(blocks, prior, threads=1)
    b = compute_posterior(blocks, prior, threads=4)
    for x, y in zip(a, b):
        np.testing.assert_array_equal(x.theta_hat, y.theta_hat)
        assert x.S_hat == y.S_hat


def test_non_positive_definite_is_hard_error():
    prior = NIGParams(np.zeros(2), [[1.0, 0.0], [0.0, 1.0]], 1.0, 1.0)
    object.__setattr__(prior, "V", np.array([[1.0, 2.0], [2.0, 1.0]]))
    with pytest.raises(NumericalError):
        posterior_equation(np.zeros(0), np.zeros((0, 2)), prior)


def test_one_factorization_per_equation(small_var):
    _, blocks, prior = small_var
    before = conjugate.FACTORIZATIONS["count"]
    post = compute_posterior(blocks, prior)
    sample_posterior(post, 2000, seed=1)
    assert conjugate.FACTORIZATIONS["count"] - before == blocks.n


def test_sampler_determinism_and_validity(small_var):
    _, blocks, prior = small_var
    post = compute_posterior(blocks, prior)
    a = sample_posterior(post, 1500, seed=9, threads=1)
    b = sample_posterior(post, 1500, seed=9, threads=8)
    c = sample_posterior(post, 1500, seed=10)
    for x, y in zip(a.theta, b.theta):
        assert x.tobytes() == y.tobytes()
    assert a.sigma2.tobytes() == b.sigma2.tobytes()
    assert a.sigma2.tobytes() != c.sigma2.tobytes()
    assert np.all(a.sigma2 > 0)
    assert all(np.all(np.isfinite(t)) for t in a.theta)
    assert [t.shape for t in a.theta] == [(1500, blocks.k(i)) for i in range(3)]
    with pytest.raises(ValueError):
        sample_posterior(post, 0, seed=1)


def test_sampler_prefix_property(small_var):
    """Draw j depends only on (seed, equation, chunk), so shorter runs are prefixes."""
    _, blocks, prior = small_var
    post = compute_posterior(blocks, prior)
    short, long = sample_posterior(post, 700, seed=2), sample_posterior(post, 1400, seed=2)
    np.testing.assert_array_equal(short.sigma2, long.sigma2[:700])


def test_scalar_sampler_moments():
    eq = posterior_equation(np.array([0.0]), np.ones((1, 1)), SCALAR)
    post = conjugate.PosteriorNIG((eq,), 1, 0, 1)
    draws = sample_posterior(post, 100_000, seed=12)
    s = draws.sigma2[:, 0]
    summary = posterior_summaries(post)[0]
    assert summary.sigma2_mean == pytest.approx(1.0)
    assert abs(s.mean() - 1.0) <= 3 * s.std(ddof=1) / math.sqrt(s.size)


def test_moments_unavailable_for_small_shape():
    eq = posterior_equation(np.zeros(0), np.zeros((0, 1)), SCALAR)
    summary = posterior_summaries(conjugate.PosteriorNIG((eq,), 1, 0, 0))[0]
    assert summary.sigma2_mean is None and summary.theta_var is None


def _draw(alpha, sigma2, n=2, p=1, beta=None):
    theta = []
    for i in range(n):
        b = np.zeros(n * p + 1) if beta is None else beta[i]
        theta.append(np.concatenate([b, alpha[i]]))
    return StructuralDraw(tuple(theta), np.asarray(sigma2, dtype=float), n, p)


def test_identity_impact_keeps_structural_form():
    beta = [np.array([1.0, 0.5, 0.1]), np.array([-1.0, 0.2, 0.3])]
    red = structural_to_reduced(_draw([[], [0.0]], [2.0, 3.0], beta=beta))
    np.testing.assert_allclose(red.Sigma, np.diag([2.0, 3.0]), rtol=1e-15, atol=0)
    np.testing.assert_array_equal(red.intercept, [1.0, -1.0])
    np.testing.assert_array_equal(red.B[0], [[0.5, 0.1], [0.2, 0.3]])


def test_two_variable_hand_case():
    a, s1, s2 = 0.7, 2.0, 0.5
    red = structural_to_reduced(_draw([[], [a]], [s1, s2]))
    expected = [[s1, -a * s1], [-a * s1, a * a * s1 + s2]]
    np.testing.assert_allclose(red.Sigma, expected, rtol=1e-14)
    np.testing.assert_array_equal(red.Sigma, red.Sigma.T)


@given(st.integers(1, 6), st.integers(0, 2**31))
def test_reduced_form_round_trip(n, seed):
    rng = np.random.default_rng(seed)
    alpha = [rng.uniform(-1, 1, i) for i in range(n)]
    sigma2 = rng.uniform(0.2, 3.0, n)
    draw = _draw(alpha, sigma2, n=n, p=0)
    red = structural_to_reduced(draw)
    np.linalg.cholesky(red.Sigma)
    np.testing.assert_allclose(red.root @ red.root.T, red.Sigma, rtol=1e-12)
    fac = udl_factorize(np.linalg.inv(red.Sigma))
    np.testing.assert_allclose(fac.T, impact_matrix(draw), atol=1e-8)
    np.testing.assert_allclose(1.0 / fac.d, sigma2, rtol=1e-8)


def test_posterior_from_prior_spec(small_var):
    _, blocks, prior = small_var
    post = compute_posterior(blocks, prior)
    assert [eq.k for eq in post] == [blocks.k(i) for i in range(3)]
    with pytest.raises(ValueError):
        compute_posterior(build_blocks(np.ones((10, 2)) + np.eye(10, 2), 2), prior)


def test_structural_and_reduced_modes_differ(small_var):
    _, blocks, _ = small_var
    s2 = [1.0, 1.5, 0.8]
    red = assemble_prior(ShrinkageConfig(0.1, 0.02, mode="reduced"), s2, 2)
    st_ = assemble_prior(ShrinkageConfig(0.1, 0.02, mode="structural"), s2, 2)
    a = log_marginal_likelihood(compute_posterior(blocks, red))
    b = log_marginal_likelihood(compute_posterior(blocks, st_))
    assert math.isfinite(a) and math.isfinite(b) and a != b
