"""Conjugate posterior, marginal likelihood and direct sampling.

Under the asymmetric conjugate prior the posterior factorises into ``n``
independent normal-inverse-gamma distributions, one per structural
equation::

    K_i     = V_i^{-1} + X_i'X_i
    theta_i = K_i^{-1} (V_i^{-1} m_i + X_i'y_i)
    S_hat_i = S_i + (y_i'y_i + m_i'V_i^{-1}m_i - theta_i'K_i theta_i) / 2
    nu_hat  = nu_i + T/2

``K_i`` is factored once per equation; posterior means and draws only use
triangular solves against that factor.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import linalg
from scipy.special import gammaln

from . import streams
from .data_io import RegressionBlocks
from .prior import PriorSpec

# number of K-matrix Cholesky factorisations performed, for instrumentation
FACTORIZATIONS = {"count": 0}


class NumericalError(ArithmeticError):
    """Raised when the conjugate update breaks down numerically."""


@dataclass(frozen=True)
class EquationPosterior:
    theta_hat: np.ndarray
    chol: np.ndarray  # lower-triangular C with C C' = K
    nu_hat: float
    S_hat: float
    nu: float
    S: float
    logdet_V: float
    logdet_K: float
    T_eff: int

    @property
    def k(self) -> int:
        return self.theta_hat.size

    @property
    def K(self) -> np.ndarray:
        return self.chol @ self.chol.T


@dataclass(frozen=True)
class PosteriorNIG:
    equations: tuple
    n: int
    p: int
    T_eff: int

    def __getitem__(self, i: int) -> EquationPosterior:
        return self.equations[i]

    def __iter__(self):
        return iter(self.equations)

    def __len__(self):
        return len(self.equations)


def _factor(K: np.ndarray, i: int) -> np.ndarray:
    FACTORIZATIONS["count"] += 1
    try:
        return linalg.cholesky(K, lower=True, check_finite=True)
    except linalg.LinAlgError as exc:
        raise NumericalError(
            f"equation {i}: K = V^-1 + X'X is not positive definite; "
            "check the prior variances and data scaling"
        ) from exc


def posterior_equation(y: np.ndarray, X: np.ndarray, prior, i: int = 0) -> EquationPosterior:
    """Conjugate update for one equation."""
    y = np.asarray(y, dtype=float).ravel()
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        X = X.reshape(y.size, -1)
    if X.shape[1] != prior.k:
        raise ValueError(f"equation {i}: design has {X.shape[1]} columns, prior has {prior.k}")
    if prior.is_diagonal:
        prec_diag = 1.0 / prior.V
        K = X.T @ X
        K[np.diag_indices_from(K)] += prec_diag
        prior_term = prec_diag * prior.m
    else:
        try:
            P = prior.precision()
        except linalg.LinAlgError as exc:
            raise NumericalError(f"equation {i}: prior V is not positive definite") from exc
        K = P + X.T @ X
        prior_term = P @ prior.m
    K = 0.5 * (K + K.T)
    C = _factor(K, i)
    rhs = prior_term + X.T @ y
    z = linalg.solve_triangular(C, rhs, lower=True)
    theta = linalg.solve_triangular(C.T, z, lower=False)
    # y'y + m'V^-1 m - theta'K theta, regrouped as two non-negative quadratic forms
    resid = y - X @ theta
    dev = theta - prior.m
    if prior.is_diagonal:
        prior_quad = float(dev @ (dev / prior.V))
    else:
        prior_quad = float(dev @ (P @ dev))
    S_hat = prior.S + 0.5 * (float(resid @ resid) + prior_quad)
    if not (S_hat > 0 and math.isfinite(S_hat)):
        raise NumericalError(f"equation {i}: posterior scale S_hat={S_hat!r} is not positive")
    return EquationPosterior(
        theta_hat=theta,
        chol=C,
        nu_hat=prior.nu + y.size / 2.0,
        S_hat=S_hat,
        nu=prior.nu,
        S=prior.S,
        logdet_V=prior.logdet_V(),
        logdet_K=2.0 * float(np.sum(np.log(np.diag(C)))),
        T_eff=y.size,
    )


def compute_posterior(blocks: RegressionBlocks, prior: PriorSpec,
                      threads: Optional[int] = None) -> PosteriorNIG:
    """Equation-by-equation posterior for the structural VAR."""
    if len(prior) != blocks.n:
        raise ValueError(f"prior has {len(prior)} equations, data has {blocks.n}")

    def one(i):
        return posterior_equation(blocks.y(i), blocks.X(i), prior[i], i)

    if threads and threads > 1 and blocks.n > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            eqs = tuple(pool.map(one, range(blocks.n)))
    else:
        eqs = tuple(one(i) for i in range(blocks.n))
    return PosteriorNIG(equations=eqs, n=blocks.n, p=blocks.p, T_eff=blocks.T_eff)


def equation_log_ml(eq: EquationPosterior) -> float:
    T = eq.T_eff
    return (
        -0.5 * T * math.log(2.0 * math.pi)
        - 0.5 * (eq.logdet_V + eq.logdet_K)
        + float(gammaln(eq.nu + T / 2.0))
        + eq.nu * math.log(eq.S)
        - float(gammaln(eq.nu))
        - (eq.nu + T / 2.0) * math.log(eq.S_hat)
    )


def log_marginal_likelihood(post: PosteriorNIG, prior: Optional[PriorSpec] = None,
                            per_equation: bool = False):
    """Closed-form log marginal likelihood, the sum of per-equation terms.

    ``prior`` is accepted for call-site symmetry; the posterior already
    caches every prior quantity the formula needs.
    """
    if prior is not None and len(prior) != len(post):
        raise ValueError("prior and posterior disagree on the number of equations")
    terms = np.array([equation_log_ml(eq) for eq in post])
    if per_equation:
        return terms
    return float(terms.sum())


@dataclass(frozen=True)
class StructuralDraw:
    """One joint draw; ``theta[i]`` is ``(beta_i, alpha_i)`` for equation ``i``."""

    theta: tuple
    sigma2: np.ndarray
    n: int
    p: int

    def beta(self, i: int) -> np.ndarray:
        return self.theta[i][: self.n * self.p + 1]

    def alpha(self, i: int) -> np.ndarray:
        return self.theta[i][self.n * self.p + 1:]


@dataclass(frozen=True)
class StructuralDraws:
    """``M`` draws stored per equation: ``theta[i]`` has shape ``(M, k_i)``."""

    theta: tuple
    sigma2: np.ndarray
    n: int
    p: int
    seed: int

    @property
    def M(self) -> int:
        return self.sigma2.shape[0]

    def __len__(self):
        return self.M

    def __getitem__(self, j: int) -> StructuralDraw:
        return StructuralDraw(tuple(t[j] for t in self.theta), self.sigma2[j], self.n, self.p)

    def __iter__(self):
        for j in range(self.M):
            yield self[j]


def sample_equation(eq: EquationPosterior, M: int, seed: int, i: int):
    """Draw ``M`` samples of ``(theta_i, sigma_i^2)`` for one equation.

    Draws are produced in fixed-size chunks, each from a stream keyed by
    ``(seed, POSTERIOR, i, chunk)``.
    """
    theta = np.empty((M, eq.k))
    sigma2 = np.empty(M)
    for c, lo, hi in streams.chunks(M):
        rng = streams.stream(seed, streams.POSTERIOR, i, c)
        m = hi - lo
        s2 = eq.S_hat / rng.standard_gamma(eq.nu_hat, size=m)
        u = rng.standard_normal((eq.k, m)) * np.sqrt(s2)
        z = linalg.solve_triangular(eq.chol.T, u, lower=False, check_finite=False)
        theta[lo:hi] = (eq.theta_hat[:, None] + z).T
        sigma2[lo:hi] = s2
    return theta, sigma2


def sample_posterior(post: PosteriorNIG, M: int, seed: int,
                     threads: Optional[int] = None) -> StructuralDraws:
    """``M`` independent draws from the joint posterior."""
    if M < 1:
        raise ValueError(f"draw count must be positive, got {M}")

    def one(i):
        return sample_equation(post[i], M, seed, i)

    if threads and threads > 1 and post.n > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one, range(post.n)))
    else:
        results = [one(i) for i in range(post.n)]
    theta = tuple(r[0] for r in results)
    sigma2 = np.column_stack([r[1] for r in results])
    return StructuralDraws(theta=theta, sigma2=sigma2, n=post.n, p=post.p, seed=seed)


@dataclass(frozen=True)
class ReducedDraw:
    """Reduced-form parameters; ``root`` satisfies ``root @ root.T == Sigma``."""

    intercept: np.ndarray
    B: np.ndarray  # (p, n, n)
    Sigma: np.ndarray
    root: np.ndarray

    @property
    def n(self) -> int:
        return self.intercept.size

    @property
    def p(self) -> int:
        return self.B.shape[0]


def impact_matrix(draw: StructuralDraw) -> np.ndarray:
    """Unit lower-triangular ``A`` assembled from the ``alpha`` blocks."""
    n = draw.n
    A = np.eye(n)
    for i in range(1, n):
        A[i, :i] = draw.alpha(i)
    return A


def structural_to_reduced(draw: StructuralDraw) -> ReducedDraw:
    n, p = draw.n, draw.p
    A = impact_matrix(draw)
    beta = np.vstack([draw.beta(i) for i in range(n)])
    b = beta[:, 0]
    B = beta[:, 1:].reshape(n, p, n).transpose(1, 0, 2)
    solve = lambda rhs: linalg.solve_triangular(A, rhs, lower=True, unit_diagonal=True)
    root = solve(np.diag(np.sqrt(draw.sigma2)))
    B_red = np.stack([solve(B[j]) for j in range(p)]) if p else np.zeros((0, n, n))
    return ReducedDraw(intercept=solve(b), B=B_red, Sigma=root @ root.T, root=root)


@dataclass(frozen=True)
class EquationSummary:
    theta_mean: np.ndarray
    sigma2_mean: Optional[float]
    theta_var: Optional[np.ndarray]


def posterior_summaries(post: PosteriorNIG) -> list[EquationSummary]:
    """Analytic posterior moments; ``None`` where a moment does not exist."""
    out = []
    for eq in post:
        if eq.nu_hat > 1:
            s2_mean = eq.S_hat / (eq.nu_hat - 1.0)
            C_inv = linalg.solve_triangular(eq.chol, np.eye(eq.k), lower=True)
            var = s2_mean * np.sum(C_inv**2, axis=0)
        else:
            s2_mean, var = None, None
        out.append(EquationSummary(theta_mean=eq.theta_hat.copy(), sigma2_mean=s2_mean, theta_var=var))
    return out
