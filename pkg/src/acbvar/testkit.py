"""Brute-force reference computations for the test suite.

These deliberately avoid the optimized code paths: dense inverses instead of
triangular solves, Monte Carlo integration instead of closed forms, and
companion-matrix powers instead of the impulse-response recursion.
"""

from __future__ import annotations

import math

import numpy as np


def oracle_dense_posterior(y, X, prior):
    """``(theta_hat, K, S_hat)`` from explicit matrix inverses."""
    y = np.asarray(y, dtype=float).ravel()
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        X = X.reshape(y.size, -1)
    V = np.diag(prior.V) if np.ndim(prior.V) == 1 else np.asarray(prior.V)
    V_inv = np.linalg.inv(V)
    K = V_inv + X.T @ X
    theta = np.linalg.inv(K) @ (V_inv @ prior.m + X.T @ y)
    S_hat = prior.S + 0.5 * (y @ y + prior.m @ V_inv @ prior.m - theta @ K @ theta)
    return theta, K, S_hat


def _logmeanexp(logw):
    top = logw.max()
    w = np.exp(logw - top)
    mean = w.mean()
    se = w.std(ddof=1) / math.sqrt(w.size) / mean
    return top + math.log(mean), se


def oracle_mc_prior_predictive(y, X, prior, N: int, seed: int, batch: int = 100_000):
    """Monte Carlo estimate of ``log p(y_i)`` for one equation.

    Averages the Gaussian likelihood over ``N`` prior draws; returns the
    estimate and its delta-method standard error.
    """
    rng = np.random.default_rng(seed)
    y = np.asarray(y, dtype=float).ravel()
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        X = X.reshape(y.size, -1)
    T = y.size
    V = np.diag(prior.V) if np.ndim(prior.V) == 1 else np.asarray(prior.V)
    root = np.linalg.cholesky(V)
    logw = np.empty(N)
    for lo in range(0, N, batch):
        m = min(batch, N - lo)
        s2 = prior.S / rng.gamma(prior.nu, 1.0, size=m)
        theta = prior.m + (rng.standard_normal((m, prior.m.size)) @ root.T) * np.sqrt(s2)[:, None]
        resid = y[None, :] - theta @ X.T
        logw[lo:lo + m] = -0.5 * T * np.log(2 * np.pi * s2) - 0.5 * np.sum(resid**2, axis=1) / s2
    return _logmeanexp(logw)


def oracle_mc_system(blocks, prior, N: int, seed: int):
    """Sum of per-equation Monte Carlo log marginal likelihoods and combined SE."""
    total, var = 0.0, 0.0
    for i in range(blocks.n):
        est, se = oracle_mc_prior_predictive(blocks.y(i), blocks.X(i), prior[i], N, seed + i)
        total += est
        var += se**2
    return total, math.sqrt(var)


def student_t_logpdf(x: float, df: float, loc: float = 0.0, scale: float = 1.0) -> float:
    z = (x - loc) / scale
    return (math.lgamma((df + 1) / 2) - math.lgamma(df / 2) - 0.5 * math.log(df * math.pi)
            - math.log(scale) - (df + 1) / 2 * math.log1p(z * z / df))


def oracle_iw_moments(nu0: float, S, sampler, N: int, seed: int):
    """Empirical mean of ``Sigma~ = A^-1 Sigma A^-T`` against the inverse-Wishart mean.

    ``sampler(N, rng)`` returns ``(sigma2, A)`` draws.  Returns
    ``(mean, se, target)`` elementwise.
    """
    S = np.asarray(S, dtype=float)
    n = S.shape[0]
    rng = np.random.default_rng(seed)
    sigma2, A = sampler(N, rng)
    A_inv = np.linalg.inv(A)
    Sig = np.einsum("nij,nj,nkj->nik", A_inv, sigma2, A_inv)
    mean = Sig.mean(axis=0)
    se = Sig.std(axis=0, ddof=1) / math.sqrt(N)
    return mean, se, S / (nu0 - n - 1)


def companion(B) -> np.ndarray:
    B = np.asarray(B, dtype=float)
    p, n, _ = B.shape
    F = np.zeros((n * p, n * p))
    F[:n, :] = np.hstack(list(B))
    F[n:, :-n] = np.eye(n * (p - 1))
    return F


def oracle_companion_irf(B, impact, H: int) -> np.ndarray:
    """``J F^h J' impact`` for ``h = 0..H``; shape ``(n, shocks, H + 1)``."""
    B = np.asarray(B, dtype=float)
    p, n, _ = B.shape
    F = companion(B)
    J = np.zeros((n, n * p))
    J[:, :n] = np.eye(n)
    out = []
    Fh = np.eye(n * p)
    for _ in range(H + 1):
        out.append(J @ Fh @ J.T @ impact)
        Fh = Fh @ F
    return np.stack(out, axis=-1)
