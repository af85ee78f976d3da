"""Shrinkage hyperparameter selection by marginal likelihood.

The objective is the closed-form log marginal likelihood as a function of
the reduced-form tightness pair ``(kappa1, kappa2)`` on ``(0, 1)^2``; all
VAR coefficients and variances are integrated out analytically.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import optimize
from scipy.special import expit, logit

from .conjugate import compute_posterior, log_marginal_likelihood
from .data_io import RegressionBlocks
from .prior import ShrinkageConfig, assemble_prior

STARTS = (0.01, 0.05, 0.2)


class LogMLObjective:
    """Memoised log marginal likelihood over reduced-form ``(kappa1, kappa2)``."""

    def __init__(self, blocks: RegressionBlocks, s2, kappa3: float = 100.0,
                 levels=False, nu0: Optional[float] = None):
        self.blocks = blocks
        self.s2 = s2
        self.kappa3 = kappa3
        self.levels = levels
        self.nu0 = nu0
        self.cache: dict = {}
        self.hits = 0

    def config(self, kappa1: float, kappa2: float) -> ShrinkageConfig:
        return ShrinkageConfig(kappa1, kappa2, self.kappa3, mode="reduced", levels=self.levels)

    def __call__(self, kappa1: float, kappa2: float) -> float:
        key = (float(kappa1), float(kappa2))
        if key in self.cache:
            self.hits += 1
            return self.cache[key]
        prior = assemble_prior(self.config(*key), self.s2, self.blocks.p, nu0=self.nu0)
        value = log_marginal_likelihood(compute_posterior(self.blocks, prior))
        self.cache[key] = value
        return value

    def symmetric(self, kappa: float) -> float:
        return self(kappa, kappa)


def logml_objective(kappa1: float, kappa2: float, blocks: RegressionBlocks, s2,
                    kappa3: float = 100.0, levels=False, nu0: Optional[float] = None) -> float:
    return LogMLObjective(blocks, s2, kappa3, levels, nu0)(kappa1, kappa2)


@dataclass
class HyperResult:
    kappa1: float
    kappa2: float
    logml: float
    converged: bool
    boundary: bool
    trace: list = field(default_factory=list)


@dataclass
class HyperSelection:
    """Asymmetric and symmetric (``kappa1 == kappa2``) optima side by side."""

    asymmetric: HyperResult
    symmetric: HyperResult

    def table(self) -> list[dict]:
        return [
            {"prior": "symmetric", "kappa1": self.symmetric.kappa1, "kappa2": self.symmetric.kappa2,
             "logml": self.symmetric.logml},
            {"prior": "asymmetric", "kappa1": self.asymmetric.kappa1, "kappa2": self.asymmetric.kappa2,
             "logml": self.asymmetric.logml},
        ]


def _on_boundary(x, eps=1e-6) -> bool:
    return any(v < eps or v > 1.0 - eps for v in x)


def _search(f, starts, dim):
    """Nelder-Mead on the logit scale from each start; returns best and trace."""
    trace = []

    def neg(z):
        kappa = expit(np.asarray(z))
        args = (kappa[0], kappa[0]) if dim == 1 else (kappa[0], kappa[1])
        value = f(*args)
        trace.append((float(args[0]), float(args[1]), value))
        return -value if math.isfinite(value) else np.inf

    best = None
    for x0 in starts:
        res = optimize.minimize(neg, logit(np.asarray(x0, dtype=float)), method="Nelder-Mead",
                                options={"xatol": 1e-5, "fatol": 1e-6, "maxiter": 2000})
        if not math.isfinite(res.fun):
            continue
        if best is None or res.fun < best.fun:
            best = res
    return best, trace


def _result(best, trace, dim) -> HyperResult:
    kappa = expit(best.x)
    k1, k2 = (kappa[0], kappa[0]) if dim == 1 else (kappa[0], kappa[1])
    value = -float(best.fun)
    # the optimizer's reported point may be beaten by an evaluated vertex
    top = max(trace, key=lambda t: t[2])
    if top[2] > value:
        k1, k2, value = top
    return HyperResult(kappa1=float(k1), kappa2=float(k2), logml=value,
                       converged=bool(best.success), boundary=_on_boundary((k1, k2)), trace=trace)


def optimize_hyperparameters(objective: LogMLObjective, starts=STARTS) -> HyperSelection:
    """Maximise the log marginal likelihood over ``(kappa1, kappa2)`` and over ``kappa1 == kappa2``.

    The symmetric optimum is added as a start for the asymmetric search so
    the nested comparison is never lost to a poor local optimum.
    """
    sym_best, sym_trace = _search(objective, [[s] for s in starts], 1)
    if sym_best is None:
        raise ArithmeticError("log marginal likelihood is not finite at any start")
    symmetric = _result(sym_best, sym_trace, 1)

    grid = [[a, b] for a in starts for b in starts]
    grid.append([symmetric.kappa1, symmetric.kappa2])
    asym_best, asym_trace = _search(objective, grid, 2)
    if asym_best is None:
        raise ArithmeticError("log marginal likelihood is not finite at any start")
    return HyperSelection(asymmetric=_result(asym_best, asym_trace, 2), symmetric=symmetric)


@dataclass
class HyperPosteriorGrid:
    """Posterior of ``(kappa1, kappa2)`` under a uniform prior, on a grid.

    ``density`` is scaled so its maximum is one; ``mass`` holds trapezoid
    probabilities that sum to one.  Arrays are indexed ``[kappa1, kappa2]``.
    """

    kappa1: np.ndarray
    kappa2: np.ndarray
    log_value: np.ndarray
    density: np.ndarray
    mass: np.ndarray

    def argmax(self):
        a, b = np.unravel_index(np.argmax(self.log_value), self.log_value.shape)
        return float(self.kappa1[a]), float(self.kappa2[b])

    def rows(self):
        for a, k1 in enumerate(self.kappa1):
            for b, k2 in enumerate(self.kappa2):
                yield float(k1), float(k2), float(self.density[a, b]), float(self.log_value[a, b])


def grid_nodes(resolution: int, lower: float = 0.0, upper: float = 1.0) -> np.ndarray:
    """Cell-centred nodes strictly inside ``(lower, upper)``."""
    if resolution < 2:
        raise ValueError(f"grid resolution must be at least 2, got {resolution}")
    width = (upper - lower) / resolution
    return lower + width * (np.arange(resolution) + 0.5)


def _trapezoid_weights(x: np.ndarray) -> np.ndarray:
    w = np.zeros_like(x)
    d = np.diff(x)
    w[:-1] += d / 2
    w[1:] += d / 2
    return w


def hyper_posterior_grid(objective: LogMLObjective, resolution: int = 50,
                         bounds=((0.0, 1.0), (0.0, 1.0)), threads: Optional[int] = None
                         ) -> HyperPosteriorGrid:
    k1 = grid_nodes(resolution, *bounds[0])
    k2 = grid_nodes(resolution, *bounds[1])
    nodes = [(a, b) for a in k1 for b in k2]
    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            values = list(pool.map(lambda ab: objective(*ab), nodes))
    else:
        values = [objective(a, b) for a, b in nodes]
    log_value = np.array(values).reshape(resolution, resolution)
    if not np.all(np.isfinite(log_value)):
        raise ArithmeticError("non-finite log marginal likelihood on the grid")
    density = np.exp(log_value - log_value.max())
    weights = np.outer(_trapezoid_weights(k1), _trapezoid_weights(k2))
    mass = density * weights
    mass = mass / mass.sum()
    return HyperPosteriorGrid(kappa1=k1, kappa2=k2, log_value=log_value, density=density, mass=mass)
