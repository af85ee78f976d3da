"""File formats for posterior draws, impulse-response bands and grids.

Binary draw layout (all integers ``<u8``, all floats ``<f8``)::

    magic      8 bytes  b"ACBVDRW1"
    n, p, M    3 x u8
    k_0..k_n-1 n x u8
    L          u8, length of the metadata block
    metadata   L bytes of UTF-8 JSON
    theta_i    M x k_i floats, draw-major, for i = 0..n-1
    sigma2     M x n floats, draw-major
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .conjugate import StructuralDraws

MAGIC = b"ACBVDRW1"


def _u8(*values) -> bytes:
    return np.asarray(values, dtype="<u8").tobytes()


def write_draws_binary(path, draws: StructuralDraws, metadata: dict) -> None:
    meta = json.dumps(metadata, sort_keys=True).encode("utf-8")
    with Path(path).open("wb") as fh:
        fh.write(MAGIC)
        fh.write(_u8(draws.n, draws.p, draws.M))
        fh.write(_u8(*[t.shape[1] for t in draws.theta]))
        fh.write(_u8(len(meta)))
        fh.write(meta)
        for t in draws.theta:
            fh.write(np.ascontiguousarray(t, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(draws.sigma2, dtype="<f8").tobytes())


def read_draws_binary(path):
    """Return ``(draws, metadata)`` from a file written by :func:`write_draws_binary`."""
    buf = Path(path).read_bytes()
    if buf[:8] != MAGIC:
        raise ValueError(f"{path}: not an acbvar draw file")
    pos = 8
    n, p, M = np.frombuffer(buf, dtype="<u8", count=3, offset=pos).astype(int)
    pos += 24
    ks = np.frombuffer(buf, dtype="<u8", count=n, offset=pos).astype(int)
    pos += 8 * n
    (L,) = np.frombuffer(buf, dtype="<u8", count=1, offset=pos).astype(int)
    pos += 8
    metadata = json.loads(buf[pos:pos + L].decode("utf-8"))
    pos += L
    theta = []
    for k in ks:
        theta.append(np.frombuffer(buf, dtype="<f8", count=M * k, offset=pos).reshape(M, k).copy())
        pos += 8 * M * k
    sigma2 = np.frombuffer(buf, dtype="<f8", count=M * n, offset=pos).reshape(M, n).copy()
    seed = metadata.get("seed", 0)
    return StructuralDraws(theta=tuple(theta), sigma2=sigma2, n=n, p=p, seed=seed), metadata


def _comment_lines(fh, comments):
    for line in comments:
        fh.write(f"# {line}\n")


def write_draws_csv(path, draws: StructuralDraws, labels, comments=()) -> None:
    """Wide CSV, one row per draw: ``sigma2`` columns then every coefficient.

    ``labels[i]`` names the coefficients of equation ``i``.
    """
    header = ["draw"] + [f"sigma2[{i}]" for i in range(draws.n)]
    for i, names in enumerate(labels):
        header += [f"eq{i}:{name}" for name in names]
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        _comment_lines(fh, comments)
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for j in range(draws.M):
            row = [j] + [repr(float(x)) for x in draws.sigma2[j]]
            for t in draws.theta:
                row += [repr(float(x)) for x in t[j]]
            w.writerow(row)


def write_bands_csv(path, bands: dict, variables, shocks, comments=()) -> int:
    """Rows ``(variable, shock, horizon, q.., mean)``; returns the row count."""
    q = bands["quantiles"]
    mean = bands["mean"]
    qnames = [f"q{round(100 * pr):d}" for pr in bands["probs"]]
    rows = 0
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        _comment_lines(fh, comments)
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["variable", "shock", "horizon"] + qnames + ["mean"])
        n, m, H1 = mean.shape
        for a in range(n):
            for s in range(m):
                for h in range(H1):
                    w.writerow([variables[a], shocks[s], h]
                               + [repr(float(q[k, a, s, h])) for k in range(len(qnames))]
                               + [repr(float(mean[a, s, h]))])
                    rows += 1
    return rows


def write_grid_csv(path, grid, comments=()) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        _comment_lines(fh, comments)
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["kappa1", "kappa2", "density", "log_value", "mass"])
        for a, k1 in enumerate(grid.kappa1):
            for b, k2 in enumerate(grid.kappa2):
                w.writerow([repr(float(k1)), repr(float(k2)), repr(float(grid.density[a, b])),
                            repr(float(grid.log_value[a, b])), repr(float(grid.mass[a, b]))])


def write_json(path, doc: dict) -> None:
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
