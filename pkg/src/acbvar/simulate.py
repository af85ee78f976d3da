"""Synthetic data from a stable reduced-form VAR(p)."""

from __future__ import annotations

from typing import Optional, Sequence

import numpy as np

from . import streams
from .data_io import Dataset


class UnstableSystemError(ValueError):
    """The companion matrix has an eigenvalue on or outside the unit circle."""


def companion_radius(B) -> float:
    B = np.asarray(B, dtype=float)
    p, n, _ = B.shape
    if p == 0:
        return 0.0
    F = np.zeros((n * p, n * p))
    F[:n] = np.hstack(list(B))
    F[n:, :-n] = np.eye(n * (p - 1))
    return float(np.max(np.abs(np.linalg.eigvals(F))))


def simulate_var(B, Sigma, T: int, seed: int, intercept=None, burn_in: int = 100,
                 names: Optional[Sequence[str]] = None) -> Dataset:
    """Simulate ``y_t = b + sum_j B_j y_{t-j} + e_t`` with ``e_t ~ N(0, Sigma)``.

    ``B`` has shape ``(p, n, n)``.  The first ``burn_in`` periods after a
    zero start are discarded.
    """
    B = np.asarray(B, dtype=float)
    if B.ndim != 3 or B.shape[1] != B.shape[2]:
        raise ValueError(f"coefficients must have shape (p, n, n), got {B.shape}")
    p, n, _ = B.shape
    Sigma = np.asarray(Sigma, dtype=float)
    if Sigma.shape != (n, n):
        raise ValueError(f"covariance must be {n} x {n}, got {Sigma.shape}")
    b = np.zeros(n) if intercept is None else np.asarray(intercept, dtype=float)
    if b.shape != (n,):
        raise ValueError(f"intercept must have {n} entries")
    if T < 1:
        raise ValueError("T must be positive")
    radius = companion_radius(B)
    if radius >= 1.0:
        raise UnstableSystemError(f"companion spectral radius {radius:.6g} >= 1")
    try:
        root = np.linalg.cholesky(Sigma)
    except np.linalg.LinAlgError as exc:
        raise ValueError("covariance is not positive definite") from exc

    rng = streams.stream(seed, streams.SIMULATION)
    total = burn_in + T
    shocks = rng.standard_normal((total, n)) @ root.T
    y = np.zeros((total + p, n))
    for t in range(p, total + p):
        acc = b + shocks[t - p]
        for j in range(p):
            acc = acc + B[j] @ y[t - j - 1]
        y[t] = acc
    names = tuple(names) if names else tuple(f"y{j + 1}" for j in range(n))
    return Dataset(y[p + burn_in:], names)
