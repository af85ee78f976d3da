"""Prior elicitation for the asymmetric conjugate prior.

Each equation ``i`` gets a normal-inverse-gamma prior on
``theta_i = (beta_i', alpha_i')'`` and ``sigma_i^2``::

    theta_i | sigma_i^2 ~ N(m_i, sigma_i^2 V_i),   sigma_i^2 ~ IG(nu_i, S_i)

with the inverse-gamma density proportional to
``(sigma^2)^-(nu+1) exp(-S / sigma^2)``.

The ``alpha`` block (free entries of the unit lower-triangular impact matrix)
and ``(nu_i, S_i)`` are derived from an inverse-Wishart prior on the
reduced-form error covariance; the ``beta`` block uses Minnesota-style
shrinkage with separate own-lag and cross-lag tightness.  Equations are
indexed from 0 throughout.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np
from scipy import linalg

from .data_io import ScaleVector


@dataclass(frozen=True)
class NIGParams:
    """Normal-inverse-gamma hyperparameters ``(m, V, nu, S)``.

    ``V`` is either a vector (diagonal storage) or a dense symmetric matrix.
    """

    m: np.ndarray
    V: np.ndarray
    nu: float
    S: float

    def __post_init__(self):
        m = np.asarray(self.m, dtype=float).ravel()
        V = np.asarray(self.V, dtype=float)
        if V.ndim == 1:
            if V.shape != m.shape:
                raise ValueError(f"V has {V.size} entries, m has {m.size}")
            if not np.all(V > 0):
                raise ValueError("diagonal V must be strictly positive")
        elif V.ndim == 2:
            if V.shape != (m.size, m.size):
                raise ValueError(f"V has shape {V.shape}, expected {(m.size, m.size)}")
            if not np.allclose(V, V.T, rtol=1e-12, atol=0.0):
                raise ValueError("V must be symmetric")
        else:
            raise ValueError("V must be a vector or a square matrix")
        if not self.nu > 0:
            raise ValueError(f"shape nu must be positive, got {self.nu}")
        if not self.S > 0:
            raise ValueError(f"scale S must be positive, got {self.S}")
        object.__setattr__(self, "m", m)
        object.__setattr__(self, "V", V)
        object.__setattr__(self, "nu", float(self.nu))
        object.__setattr__(self, "S", float(self.S))

    @property
    def k(self) -> int:
        return self.m.size

    @property
    def is_diagonal(self) -> bool:
        return self.V.ndim == 1

    def dense_V(self) -> np.ndarray:
        return np.diag(self.V) if self.is_diagonal else self.V

    def precision(self) -> np.ndarray:
        """Dense ``V^{-1}``."""
        if self.is_diagonal:
            return np.diag(1.0 / self.V)
        if self.k == 0:
            return np.zeros((0, 0))
        return linalg.cho_solve(linalg.cho_factor(self.V, lower=True), np.eye(self.k))

    def logdet_V(self) -> float:
        if self.is_diagonal:
            return float(np.sum(np.log(self.V)))
        if self.k == 0:
            return 0.0
        C = linalg.cholesky(self.V, lower=True)
        return 2.0 * float(np.sum(np.log(np.diag(C))))


@dataclass(frozen=True)
class ErrorBlock:
    """Prior on ``(alpha_i, sigma_i^2)`` for one equation."""

    nu: float
    S: float
    m_alpha: np.ndarray
    V_alpha: np.ndarray


@dataclass(frozen=True)
class ShrinkageConfig:
    """Minnesota-style tightness settings.

    In ``"reduced"`` mode the kappas apply to the reduced-form coefficients
    and are translated to the structural form.  ``levels`` flags variables
    whose first own lag has prior mean one (a bool applies to all).
    """

    kappa1: float
    kappa2: float
    kappa3: float = 100.0
    mode: str = "structural"
    levels: Union[bool, tuple] = False

    def __post_init__(self):
        for name in ("kappa1", "kappa2", "kappa3"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if self.mode not in ("structural", "reduced"):
            raise ValueError(f"mode must be 'structural' or 'reduced', got {self.mode!r}")
        if not isinstance(self.levels, bool):
            object.__setattr__(self, "levels", tuple(bool(x) for x in self.levels))

    def level_flags(self, n: int) -> tuple:
        if isinstance(self.levels, bool):
            return (self.levels,) * n
        if len(self.levels) != n:
            raise ValueError(f"{len(self.levels)} level flags for {n} variables")
        return self.levels


@dataclass(frozen=True)
class UdlFactorization:
    """``W = T' diag(d) T`` with ``T`` unit lower triangular and ``d > 0``."""

    T: np.ndarray
    d: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return self.T.T @ (self.d[:, None] * self.T)


@dataclass(frozen=True)
class PriorSpec:
    equations: tuple
    n: int
    p: int
    metadata: dict = field(default_factory=dict)

    def __getitem__(self, i: int) -> NIGParams:
        return self.equations[i]

    def __len__(self):
        return len(self.equations)

    def __iter__(self):
        return iter(self.equations)


def _scales(s2) -> np.ndarray:
    return s2.s2 if isinstance(s2, ScaleVector) else np.asarray(s2, dtype=float).ravel()


def error_prior_from_iw(s2, nu0: Optional[float] = None) -> list[ErrorBlock]:
    """Per-equation NIG prior implied by ``IW(nu0, diag(s2))`` on the reduced-form covariance.

    ``nu0`` defaults to ``n + 2`` which centres the covariance prior on
    ``diag(s2)``.
    """
    s2 = _scales(s2)
    n = s2.size
    if nu0 is None:
        nu0 = n + 2
    if not nu0 > n - 1:
        raise ValueError(f"nu0 must exceed n - 1 = {n - 1}, got {nu0}")
    out = []
    for i in range(n):
        out.append(ErrorBlock(
            nu=(nu0 + (i + 1) - n) / 2.0,
            S=s2[i] / 2.0,
            m_alpha=np.zeros(i),
            V_alpha=1.0 / s2[:i],
        ))
    return out


def minnesota_v_beta(cfg: ShrinkageConfig, s2, i: int, p: int):
    """Prior mean and diagonal variance for ``beta_i`` (intercept, then lags 1..p).

    The entry for lag ``l`` of variable ``j`` sits at ``1 + (l-1)*n + j``.
    """
    s2 = _scales(s2)
    n = s2.size
    lag = np.repeat(np.arange(1, p + 1), n)
    var = np.tile(np.arange(n), p)
    kappa = np.where(var == i, cfg.kappa1, cfg.kappa2)
    v = np.concatenate([[cfg.kappa3], kappa / (lag**2 * s2[var])])
    m = np.zeros(n * p + 1)
    if p >= 1 and cfg.level_flags(n)[i]:
        m[1 + i] = 1.0
    return m, v


def udl_factorize(W) -> UdlFactorization:
    """Factor an SPD matrix as ``T' diag(d) T`` with ``T`` unit lower triangular.

    The reversed matrix ``J W J`` has an ordinary Cholesky factor ``G``;
    undoing the reversal turns ``G`` into the required upper/lower pair.
    """
    W = np.asarray(W, dtype=float)
    if W.ndim != 2 or W.shape[0] != W.shape[1]:
        raise ValueError(f"W must be square, got shape {W.shape}")
    scale = np.abs(W).max() if W.size else 0.0
    if not np.allclose(W, W.T, rtol=0.0, atol=1e-12 * scale):
        raise ValueError("W must be symmetric")
    try:
        G = linalg.cholesky(W[::-1, ::-1], lower=True)
    except linalg.LinAlgError as exc:
        raise ValueError("W is not positive definite") from exc
    g = np.diag(G)
    T = (G / g)[::-1, ::-1].T
    return UdlFactorization(T=np.ascontiguousarray(T), d=(g**2)[::-1].copy())


def general_iw_to_nig(nu0: float, R) -> list[ErrorBlock]:
    """NIG prior on ``(alpha_i, sigma_i^2)`` implied by ``IW(nu0, R)`` for SPD ``R``.

    ``R^{-1} = L' S^{-1} L``; equation ``i`` gets mean ``L[i, :i]`` and scale
    ``L[:i, :i]' S[:i, :i]^{-1} L[:i, :i]`` for its impact coefficients.
    """
    R = np.asarray(R, dtype=float)
    n = R.shape[0]
    if not nu0 > n - 1:
        raise ValueError(f"nu0 must exceed n - 1 = {n - 1}, got {nu0}")
    try:
        R_inv = linalg.cho_solve(linalg.cho_factor(R, lower=True), np.eye(n))
    except linalg.LinAlgError as exc:
        raise ValueError("R is not positive definite") from exc
    fac = udl_factorize(0.5 * (R_inv + R_inv.T))
    L, s2 = fac.T, 1.0 / fac.d
    out = []
    for i in range(n):
        Li = L[:i, :i]
        out.append(ErrorBlock(
            nu=(nu0 + (i + 1) - n) / 2.0,
            S=s2[i] / 2.0,
            m_alpha=L[i, :i].copy(),
            V_alpha=Li.T @ (Li / s2[:i, None]),
        ))
    return out


def iw_from_error_prior(blocks: Sequence[ErrorBlock], atol: float = 1e-10):
    """Invert the IW -> NIG mapping: recover ``(nu0, R)`` from per-equation blocks.

    Raises ``ValueError`` if the blocks are not the image of any
    inverse-Wishart prior.
    """
    n = len(blocks)
    nu0s = [2.0 * b.nu - (i + 1) + n for i, b in enumerate(blocks)]
    if not np.allclose(nu0s, nu0s[0], rtol=0.0, atol=atol):
        raise ValueError(f"inconsistent degrees of freedom across equations: {nu0s}")
    s2 = np.array([2.0 * b.S for b in blocks])
    L = np.eye(n)
    for i, b in enumerate(blocks):
        L[i, :i] = b.m_alpha
    for i, b in enumerate(blocks):
        Li = L[:i, :i]
        expected = Li.T @ (Li / s2[:i, None])
        V = np.diag(b.V_alpha) if np.ndim(b.V_alpha) == 1 else np.asarray(b.V_alpha)
        if not np.allclose(V, expected, rtol=1e-9, atol=atol):
            raise ValueError(f"equation {i}: impact-coefficient scale is not of inverse-Wishart form")
    L_inv = linalg.solve_triangular(L, np.eye(n), lower=True, unit_diagonal=True)
    R = L_inv @ (s2[:, None] * L_inv.T)
    return nu0s[0], 0.5 * (R + R.T)


def draw_error_prior(blocks: Sequence[ErrorBlock], N: int, rng: np.random.Generator):
    """Sample ``(sigma^2, A)`` from per-equation error priors.

    Returns ``sigma2`` of shape ``(N, n)`` and unit lower-triangular ``A`` of
    shape ``(N, n, n)``.
    """
    n = len(blocks)
    sigma2 = np.empty((N, n))
    A = np.broadcast_to(np.eye(n), (N, n, n)).copy()
    for i, b in enumerate(blocks):
        sigma2[:, i] = b.S / rng.standard_gamma(b.nu, size=N)
        if i == 0:
            continue
        V = np.diag(b.V_alpha) if np.ndim(b.V_alpha) == 1 else np.asarray(b.V_alpha)
        chol = linalg.cholesky(V, lower=True)
        z = rng.standard_normal((N, i))
        A[:, i, :i] = b.m_alpha + np.sqrt(sigma2[:, i])[:, None] * (z @ chol.T)
    return sigma2, A


def reduced_to_structural(m_tilde: Sequence, v_tilde: Sequence, s2):
    """Translate reduced-form coefficient priors into structural-form ones.

    Means pass through unchanged.  For equation ``i`` the variance on each
    lag coefficient is ``v~_i + sum_{l<i} (v~_l + m~_l^2 / s_l^2)``, with
    cross-coefficient correlations dropped.  Intercepts keep their
    reduced-form variance.
    """
    s2 = _scales(s2)
    n = len(m_tilde)
    if len(v_tilde) != n or s2.size != n:
        raise ValueError("need one mean, one variance vector and one scale per equation")
    m_tilde = [np.asarray(m, dtype=float) for m in m_tilde]
    v_tilde = [np.asarray(v, dtype=float) for v in v_tilde]
    width = m_tilde[0].size
    if any(m.size != width for m in m_tilde) or any(v.size != width for v in v_tilde):
        raise ValueError("all equations must have the same number of coefficients")
    means, variances = [], []
    acc = np.zeros(width)
    for i in range(n):
        v = v_tilde[i] + acc
        v[0] = v_tilde[i][0]
        means.append(m_tilde[i].copy())
        variances.append(v)
        acc = acc + v_tilde[i] + m_tilde[i] ** 2 / s2[i]
    return means, variances


def assemble_prior(cfg: ShrinkageConfig, s2, p: int, nu0: Optional[float] = None,
                   R=None, names: Sequence[str] = ()) -> PriorSpec:
    """Per-equation priors aligned with :meth:`RegressionBlocks.X` columns.

    ``R`` (optional) gives a non-diagonal inverse-Wishart scale for the
    reduced-form covariance; by default ``R = diag(s2)``.
    """
    s2v = _scales(s2)
    n = s2v.size
    if nu0 is None:
        nu0 = n + 2
    if R is None:
        errors = error_prior_from_iw(s2v, nu0)
    else:
        errors = general_iw_to_nig(nu0, R)
    beta = [minnesota_v_beta(cfg, s2v, i, p) for i in range(n)]
    m_beta = [b[0] for b in beta]
    v_beta = [b[1] for b in beta]
    if cfg.mode == "reduced":
        m_beta, v_beta = reduced_to_structural(m_beta, v_beta, s2v)

    equations = []
    for i in range(n):
        e = errors[i]
        m = np.concatenate([m_beta[i], e.m_alpha])
        if np.ndim(e.V_alpha) == 1:
            V = np.concatenate([v_beta[i], e.V_alpha])
        else:
            V = linalg.block_diag(np.diag(v_beta[i]), e.V_alpha)
        equations.append(NIGParams(m=m, V=V, nu=e.nu, S=e.S))
    meta = {
        "nu0": float(nu0),
        "s2": [float(x) for x in s2v],
        "kappa1": cfg.kappa1,
        "kappa2": cfg.kappa2,
        "kappa3": cfg.kappa3,
        "mode": cfg.mode,
        "levels": list(cfg.level_flags(n)),
        "iw_scale": "diag(s2)" if R is None else "general",
    }
    if isinstance(s2, ScaleVector):
        meta["scale_fit"] = s2.metadata
    if names:
        meta["names"] = list(names)
    return PriorSpec(equations=tuple(equations), n=n, p=p, metadata=meta)


def prior_to_dict(prior: PriorSpec) -> dict:
    eqs = []
    for i, e in enumerate(prior.equations):
        eqs.append({
            "equation": i,
            "k": e.k,
            "m": e.m.tolist(),
            "V_storage": "diagonal" if e.is_diagonal else "dense",
            "V": e.V.tolist(),
            "nu": e.nu,
            "S": e.S,
        })
    return {"n": prior.n, "p": prior.p, "metadata": prior.metadata, "equations": eqs}


def prior_from_dict(doc: dict) -> PriorSpec:
    eqs = tuple(NIGParams(m=e["m"], V=e["V"], nu=e["nu"], S=e["S"]) for e in doc["equations"])
    return PriorSpec(equations=eqs, n=doc["n"], p=doc["p"], metadata=doc.get("metadata", {}))
