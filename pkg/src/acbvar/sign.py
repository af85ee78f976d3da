"""Sign-restricted structural identification and impulse responses.

Candidate impact matrices are ``root @ Q`` where ``root`` is the lower
Cholesky factor of the reduced-form covariance (``A^{-1} diag(sigma)``) and
``Q`` is Haar-distributed on the orthogonal group.  A candidate is accepted
when some assignment of its columns to the labelled shocks, with a sign
flip allowed per column, satisfies every restriction strictly.
"""

from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import streams
from .conjugate import ReducedDraw, StructuralDraw, structural_to_reduced

_CELLS = {"+": 1, "-": -1, "NA": 0, "": 0, "0": 0}


class SignRestrictionError(RuntimeError):
    """No posterior draw produced an admissible rotation."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


@dataclass(frozen=True)
class SignRestrictionSet:
    """Restriction pattern, variables down the rows and shocks across the columns."""

    pattern: np.ndarray
    shocks: tuple = ()
    variables: tuple = ()

    def __post_init__(self):
        pattern = np.asarray(self.pattern, dtype=int)
        if pattern.ndim != 2:
            raise ValueError("pattern must be a variables x shocks matrix")
        if not np.isin(pattern, (-1, 0, 1)).all():
            raise ValueError("pattern entries must be -1, 0 or +1")
        n_vars, n_shocks = pattern.shape
        if n_shocks > n_vars:
            raise ValueError(f"{n_shocks} shocks cannot be identified from {n_vars} variables")
        shocks = tuple(self.shocks) or tuple(f"shock{j + 1}" for j in range(n_shocks))
        variables = tuple(self.variables) or tuple(f"y{j + 1}" for j in range(n_vars))
        if len(shocks) != n_shocks or len(variables) != n_vars:
            raise ValueError("label counts do not match the pattern shape")
        pattern.setflags(write=False)
        object.__setattr__(self, "pattern", pattern)
        object.__setattr__(self, "shocks", shocks)
        object.__setattr__(self, "variables", variables)

    @property
    def n_vars(self) -> int:
        return self.pattern.shape[0]

    @property
    def n_shocks(self) -> int:
        return self.pattern.shape[1]

    def reorder(self, names: Sequence[str]) -> "SignRestrictionSet":
        """Reorder rows to follow the given variable names."""
        names = list(names)
        if sorted(names) != sorted(self.variables):
            missing = set(names) ^ set(self.variables)
            raise ValueError(f"restriction variables do not match the data: {sorted(missing)}")
        idx = [self.variables.index(v) for v in names]
        return SignRestrictionSet(self.pattern[idx], self.shocks, tuple(names))

    def satisfied_by(self, impact: np.ndarray) -> bool:
        mask = self.pattern != 0
        return bool(np.all(impact[mask] * self.pattern[mask] > 0))


def load_restrictions(path) -> SignRestrictionSet:
    """Read a restriction table: header of shock names, one row per variable, cells ``+``/``-``/``NA``."""
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
    if len(rows) < 2:
        raise ValueError(f"{path}: restriction table needs a header and at least one row")
    header = [h.strip() for h in rows[0]]
    shocks = header[1:]
    variables, pattern = [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise ValueError(f"{path}: row {lineno} has {len(row)} cells, header has {len(header)}")
        variables.append(row[0].strip())
        signs = []
        for col, cell in enumerate(row[1:], start=2):
            key = cell.strip().upper()
            if key not in _CELLS:
                raise ValueError(f"{path}: bad cell {cell!r} at row {lineno}, column {col}")
            signs.append(_CELLS[key])
        pattern.append(signs)
    return SignRestrictionSet(np.array(pattern, dtype=int), tuple(shocks), tuple(variables))


def orthogonal_from_gaussian(Z: np.ndarray) -> np.ndarray:
    """Orthogonal factor of ``Z = QR`` with the diagonal of ``R`` made positive."""
    Q, R = np.linalg.qr(Z)
    d = np.sign(np.diag(R))
    d[d == 0] = 1.0
    return Q * d


def random_orthogonal(n: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed ``n x n`` orthogonal matrix."""
    if n < 1:
        raise ValueError("dimension must be positive")
    return orthogonal_from_gaussian(rng.standard_normal((n, n)))


def _as_reduced(draw) -> ReducedDraw:
    if isinstance(draw, ReducedDraw):
        return draw
    if isinstance(draw, StructuralDraw):
        return structural_to_reduced(draw)
    raise TypeError(f"expected a StructuralDraw or ReducedDraw, got {type(draw).__name__}")


def impact_candidate(draw, Q: np.ndarray) -> np.ndarray:
    """``A^{-1} diag(sigma) Q``: one-standard-deviation shocks in the columns."""
    return _as_reduced(draw).root @ Q


def match_restrictions(impact: np.ndarray, restrictions: SignRestrictionSet):
    """Find an assignment of impact columns to shocks satisfying the pattern.

    Returns ``(columns, signs)``, where shock ``s`` is column ``columns[s]``
    multiplied by ``signs[s]``, or ``None``.  Shocks are assigned in order,
    each trying columns left to right and ``+1`` before ``-1``, so the result
    is the first feasible assignment in lexicographic order.
    """
    pattern = restrictions.pattern
    n = impact.shape[1]
    feasible = []
    for s in range(restrictions.n_shocks):
        mask = pattern[:, s] != 0
        prod = pattern[mask, s][:, None] * impact[mask, :]
        pos = np.all(prod > 0, axis=0)
        neg = np.all(prod < 0, axis=0)
        feasible.append([1 if pos[c] else (-1 if neg[c] else 0) for c in range(n)])

    columns, signs, used = [], [], [False] * n

    def assign(s):
        if s == restrictions.n_shocks:
            return True
        for c in range(n):
            if used[c] or feasible[s][c] == 0:
                continue
            used[c] = True
            columns.append(c)
            signs.append(feasible[s][c])
            if assign(s + 1):
                return True
            used[c] = False
            columns.pop()
            signs.pop()
        return False

    if assign(0):
        return tuple(columns), tuple(signs)
    return None


def impulse_responses(draw, impact: np.ndarray, H: int) -> np.ndarray:
    """Responses of shape ``(n, shocks, H + 1)`` by the VAR recursion (intercept ignored)."""
    if H < 0:
        raise ValueError("horizon must be non-negative")
    red = _as_reduced(draw)
    impact = np.asarray(impact, dtype=float)
    n, m = impact.shape
    out = np.zeros((H + 1, n, m))
    out[0] = impact
    for h in range(1, H + 1):
        for j in range(1, min(h, red.p) + 1):
            out[h] += red.B[j - 1] @ out[h - j]
    return out.transpose(1, 2, 0)


@dataclass
class IrfSet:
    """Accepted sign-identified impulse responses and acceptance statistics."""

    responses: np.ndarray  # (accepted, n, shocks, H + 1)
    draw_ids: list
    rotations: np.ndarray
    assignments: list
    retries: list  # rotations tried per accepted draw
    tried: int
    draws_used: int
    restrictions: SignRestrictionSet
    horizon: int

    @property
    def accepted(self) -> int:
        return len(self.draw_ids)

    def diagnostics(self) -> dict:
        return {
            "tried": self.tried,
            "accepted": self.accepted,
            "draws_used": self.draws_used,
            "acceptance_rate": self.accepted / self.tried if self.tried else 0.0,
            "mean_rotations_per_acceptance": self.tried / self.accepted if self.accepted else None,
        }


def _try_draw(draw, restrictions, H, cap, seed, index):
    red = _as_reduced(draw)
    rng = streams.stream(seed, streams.ROTATION, index)
    for attempt in range(1, cap + 1):
        Q = random_orthogonal(red.n, rng)
        impact = red.root @ Q
        found = match_restrictions(impact, restrictions)
        if found is not None:
            cols, signs = found
            shocks = impact[:, list(cols)] * np.asarray(signs, dtype=float)
            return attempt, (Q, found, impulse_responses(red, shocks, H))
    return cap, None


def sign_restricted_irfs(draws, restrictions: SignRestrictionSet, H: int = 40,
                         accepted: int = 1000, cap: int = 1000, seed: int = 0,
                         threads: Optional[int] = None) -> IrfSet:
    """Rotate each posterior draw up to ``cap`` times until ``accepted`` draws pass.

    Draw ``d`` uses rotation stream ``(seed, d)``; results are aggregated in
    draw order, so the output does not depend on ``threads``.
    """
    if accepted < 1 or cap < 1:
        raise ValueError("accepted and cap must both be at least 1")
    total = len(draws)
    ids, rots, assigns, responses, retries = [], [], [], [], []
    tried = used = 0
    batch = max(1, (threads or 1) * 8)
    pool = ThreadPoolExecutor(max_workers=threads) if threads and threads > 1 else None
    try:
        start = 0
        while start < total and len(ids) < accepted:
            idx = range(start, min(start + batch, total))
            work = lambda d: _try_draw(draws[d], restrictions, H, cap, seed, d)
            results = list(pool.map(work, idx)) if pool else [work(d) for d in idx]
            for d, (attempts, hit) in zip(idx, results):
                tried += attempts
                used += 1
                if hit is not None:
                    Q, found, resp = hit
                    ids.append(d)
                    rots.append(Q)
                    assigns.append(found)
                    responses.append(resp)
                    retries.append(attempts)
                    if len(ids) == accepted:
                        break
            start += batch
    finally:
        if pool:
            pool.shutdown()
    if not ids:
        raise SignRestrictionError(
            f"no draw satisfied the sign restrictions after {tried} rotations over {used} draws",
            {"tried": tried, "accepted": 0, "draws_used": used},
        )
    return IrfSet(
        responses=np.stack(responses),
        draw_ids=ids,
        rotations=np.stack(rots),
        assignments=assigns,
        retries=retries,
        tried=tried,
        draws_used=used,
        restrictions=restrictions,
        horizon=H,
    )


def percentile_bands(irfs: IrfSet, probs=(0.16, 0.5, 0.84)) -> dict:
    """Pointwise quantiles (linear interpolation between order statistics) and means.

    Returns ``{"probs", "quantiles", "mean"}`` with ``quantiles`` of shape
    ``(len(probs), n, shocks, H + 1)``.
    """
    resp = irfs.responses if isinstance(irfs, IrfSet) else np.asarray(irfs)
    if resp.shape[0] < 2:
        raise ValueError(f"percentile bands need at least 2 accepted draws, got {resp.shape[0]}")
    q = np.quantile(resp, probs, axis=0, method="linear")
    return {"probs": tuple(probs), "quantiles": q, "mean": resp.mean(axis=0)}
