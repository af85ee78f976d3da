import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import linalg

from acbvar import (ShrinkageConfig, assemble_prior, error_prior_from_iw, general_iw_to_nig,
                    minnesota_v_beta, reduced_to_structural, udl_factorize)
from acbvar.prior import (NIGParams, draw_error_prior, iw_from_error_prior, prior_from_dict,
                          prior_to_dict)
from acbvar.testkit import oracle_iw_moments
from conftest import random_spd


def test_error_prior_values():
    blocks = error_prior_from_iw([1.0, 1.0, 1.0], nu0=5)
    assert [b.nu for b in blocks] == [1.5, 2.0, 2.5]
    assert all(b.S == 0.5 for b in blocks)
    assert blocks[0].m_alpha.size == 0 and blocks[0].V_alpha.size == 0
    np.testing.assert_array_equal(blocks[2].V_alpha, [1.0, 1.0])


def test_error_prior_default_nu0():
    blocks = error_prior_from_iw([2.0, 4.0])
    assert [b.nu for b in blocks] == [1.5, 2.0]
    np.testing.assert_array_equal(blocks[1].V_alpha, [0.5])
    with pytest.raises(ValueError):
        error_prior_from_iw([1.0, 1.0], nu0=1.0)


def test_minnesota_hand_case():
    cfg = ShrinkageConfig(0.04, 0.0016, 100.0)
    m, v = minnesota_v_beta(cfg, [1.0, 4.0], i=0, p=1)
    np.testing.assert_allclose(v, [100.0, 0.04, 0.0004])
    np.testing.assert_array_equal(m, 0.0)


def test_minnesota_lag_decay_and_levels():
    cfg = ShrinkageConfig(0.2, 0.1, 5.0, levels=(True, False))
    m, v = minnesota_v_beta(cfg, [1.0, 2.0], i=0, p=2)
    # layout: const, L1.y1, L1.y2, L2.y1, L2.y2
    np.testing.assert_allclose(v, [5.0, 0.2, 0.05, 0.05, 0.0125])
    np.testing.assert_array_equal(m, [0, 1, 0, 0, 0])
    m1, _ = minnesota_v_beta(cfg, [1.0, 2.0], i=1, p=2)
    np.testing.assert_array_equal(m1, 0.0)


def test_shrinkage_validation():
    with pytest.raises(ValueError):
        ShrinkageConfig(0.0, 0.1)
    with pytest.raises(ValueError):
        ShrinkageConfig(0.1, 0.1, mode="other")
    with pytest.raises(ValueError):
        ShrinkageConfig(0.1, 0.1, levels=(True,)).level_flags(2)


def test_udl_identity_and_hand_case():
    fac = udl_factorize(np.eye(4))
    np.testing.assert_array_equal(fac.T, np.eye(4))
    np.testing.assert_array_equal(fac.d, np.ones(4))
    fac = udl_factorize([[2.0, 1.0], [1.0, 1.0]])
    np.testing.assert_allclose(fac.T, [[1.0, 0.0], [1.0, 1.0]], atol=1e-15)
    np.testing.assert_allclose(fac.d, [1.0, 1.0])
    np.testing.assert_allclose(fac.reconstruct(), [[2.0, 1.0], [1.0, 1.0]], atol=1e-15)


@given(st.integers(1, 50), st.integers(0, 2**31))
def test_udl_reconstruction(n, seed):
    W = random_spd(np.random.default_rng(seed), n, cond=1e4)
    fac = udl_factorize(W)
    assert np.all(fac.d > 0)
    np.testing.assert_array_equal(np.diag(fac.T), 1.0)
    assert np.allclose(fac.T, np.tril(fac.T), rtol=0, atol=0)
    assert np.linalg.norm(fac.reconstruct() - W) <= 1e-10 * np.linalg.norm(W)


def test_udl_rejects_bad_input():
    with pytest.raises(ValueError):
        udl_factorize(np.ones((2, 3)))
    with pytest.raises(ValueError):
        udl_factorize([[1.0, 2.0], [0.0, 1.0]])
    with pytest.raises(ValueError):
        udl_factorize([[1.0, 2.0], [2.0, 1.0]])


def test_general_reduces_to_diagonal():
    s2 = np.array([0.5, 2.0, 3.0])
    a = error_prior_from_iw(s2, 6.0)
    b = general_iw_to_nig(6.0, np.diag(s2))
    for x, y in zip(a, b):
        assert x.nu == y.nu
        assert x.S == pytest.approx(y.S, rel=1e-14)
        np.testing.assert_allclose(y.m_alpha, x.m_alpha, atol=1e-15)
        np.testing.assert_allclose(y.V_alpha, np.diag(x.V_alpha), rtol=1e-14)


@given(st.integers(1, 10), st.integers(0, 2**31))
def test_general_round_trip(n, seed):
    R = random_spd(np.random.default_rng(seed), n)
    nu0, back = iw_from_error_prior(general_iw_to_nig(n + 3.0, R))
    assert nu0 == pytest.approx(n + 3.0)
    assert np.linalg.norm(back - R) <= 1e-8 * np.linalg.norm(R)


def test_diagonal_round_trip_is_exact():
    s2 = np.array([1.0, 2.0, 3.0, 4.0])
    nu0, R = iw_from_error_prior(error_prior_from_iw(s2, 7.0))
    assert nu0 == 7.0
    np.testing.assert_array_equal(R, np.diag(s2))


def test_inverse_map_rejects_foreign_blocks():
    blocks = error_prior_from_iw([1.0, 2.0, 3.0], 6.0)
    blocks[1] = type(blocks[1])(nu=blocks[1].nu + 1, S=blocks[1].S, m_alpha=blocks[1].m_alpha,
                                V_alpha=blocks[1].V_alpha)
    with pytest.raises(ValueError, match="degrees of freedom"):
        iw_from_error_prior(blocks)


@given(st.permutations(range(4)))
def test_permutation_equivariance(perm):
    """IW(nu0, P S P') maps to the per-equation priors of the reordered diagonal."""
    s2 = np.array([1.0, 2.0, 3.0, 4.0])
    P = np.eye(4)[list(perm)]
    general = general_iw_to_nig(6.0, P @ np.diag(s2) @ P.T)
    direct = error_prior_from_iw(s2[list(perm)], 6.0)
    for g, d in zip(general, direct):
        assert g.nu == d.nu
        assert g.S == pytest.approx(d.S, rel=1e-12)
        np.testing.assert_allclose(g.m_alpha, 0.0, atol=1e-12)
        np.testing.assert_allclose(g.V_alpha, np.diag(d.V_alpha), rtol=1e-12)


def test_permuted_iw_moments():
    s2 = np.array([4.0, 1.0, 3.0, 2.0])
    blocks = error_prior_from_iw(s2, 6.0)
    mean, se, target = oracle_iw_moments(6.0, np.diag(s2),
                                         lambda N, rng: draw_error_prior(blocks, N, rng), 100_000, 21)
    assert np.all(np.abs(mean - target) <= 3 * se + 1e-12)


def test_scalar_iw_is_inverse_gamma():
    blocks = error_prior_from_iw([2.0], 4.0)
    mean, se, target = oracle_iw_moments(4.0, np.array([[2.0]]),
                                         lambda N, rng: draw_error_prior(blocks, N, rng), 100_000, 5)
    assert target[0, 0] == pytest.approx(1.0)
    assert abs(mean[0, 0] - target[0, 0]) <= 3 * se[0, 0]


def test_reduced_to_structural_hand_case():
    m = [np.array([0.0, 1.0, 0.0]), np.zeros(3)]
    v = [np.full(3, 0.1), np.full(3, 0.1)]
    means, variances = reduced_to_structural(m, v, [4.0, 1.0])
    np.testing.assert_array_equal(variances[0], v[0])
    # entries: const, cross lag (variable 1), own lag (variable 2)
    np.testing.assert_allclose(variances[1][1:], [0.45, 0.2])
    np.testing.assert_array_equal(means[1], m[1])


@given(st.integers(1, 5), st.integers(0, 2**31))
def test_reduced_to_structural_zero_means(n, seed):
    rng = np.random.default_rng(seed)
    v = [rng.uniform(0.1, 1.0, 4) for _ in range(n)]
    _, variances = reduced_to_structural([np.zeros(4)] * n, v, np.ones(n))
    for i in range(n):
        np.testing.assert_allclose(variances[i][1:], np.sum([x[1:] for x in v[:i + 1]], axis=0))
        assert variances[i][0] == v[i][0]


@given(st.integers(1, 4), st.integers(0, 3), st.sampled_from(["structural", "reduced"]),
       st.booleans())
def test_assembled_prior_shapes(n, p, mode, levels):
    s2 = np.linspace(0.5, 2.0, n)
    prior = assemble_prior(ShrinkageConfig(0.1, 0.01, mode=mode, levels=levels), s2, p)
    assert len(prior) == n
    for i, eq in enumerate(prior):
        assert eq.k == n * p + i + 1
        linalg.cholesky(eq.dense_V())
        assert eq.nu > 0 and eq.S > 0


def test_single_variable_prior_has_no_alpha():
    prior = assemble_prior(ShrinkageConfig(0.1, 0.01), [1.0], 2)
    assert prior[0].k == 3


def test_general_scale_gives_dense_block():
    rng = np.random.default_rng(0)
    R = random_spd(rng, 3)
    prior = assemble_prior(ShrinkageConfig(0.1, 0.01), np.diag(R), 1, nu0=6.0, R=R)
    assert not prior[2].is_diagonal
    linalg.cholesky(prior[2].V)
    assert prior.metadata["iw_scale"] == "general"


def test_json_round_trip(tmp_path):
    R = random_spd(np.random.default_rng(1), 3)
    prior = assemble_prior(ShrinkageConfig(0.1, 0.01, mode="reduced"), np.diag(R), 2, R=R)
    doc = json.loads(json.dumps(prior_to_dict(prior)))
    back = prior_from_dict(doc)
    for a, b in zip(prior, back):
        np.testing.assert_array_equal(a.m, b.m)
        np.testing.assert_array_equal(a.V, b.V)
        assert (a.nu, a.S) == (b.nu, b.S)


def test_nig_validation():
    with pytest.raises(ValueError):
        NIGParams(np.zeros(2), np.ones(3), 1.0, 1.0)
    with pytest.raises(ValueError):
        NIGParams(np.zeros(2), [[1.0, 0.5], [0.0, 1.0]], 1.0, 1.0)
    with pytest.raises(ValueError):
        NIGParams(np.zeros(1), np.ones(1), 0.0, 1.0)
    with pytest.raises(ValueError):
        NIGParams(np.zeros(1), np.ones(1), 1.0, -1.0)
