"""Command-line front end.

Every command reads a JSON run configuration; flags override its keys.
Outputs are deterministic functions of the configuration, the input files and
the seed, and each carries the configuration hash and seed in its metadata.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical
failure, 5 no draw satisfied the sign restrictions.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from scipy import linalg

from . import conjugate, export
from .conjugate import NumericalError
from .data_io import DataError, Dataset, ar4_scales, build_blocks, load_csv, write_csv
from .hyper import LogMLObjective, hyper_posterior_grid, optimize_hyperparameters
from .prior import ShrinkageConfig, assemble_prior, prior_to_dict
from .sign import SignRestrictionError, load_restrictions, percentile_bands, sign_restricted_irfs
from .simulate import UnstableSystemError, simulate_var

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC, EXIT_SIGN = 0, 2, 3, 4, 5

# keys that may change between reruns without changing any output
_UNHASHED = ("threads", "output_dir")


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    seed: int
    data: Optional[Path] = None
    lags: int = 4
    mode: str = "reduced"
    kappa: object = (0.04, 0.0016)
    kappa3: float = 100.0
    nu0: Optional[float] = None
    levels: object = False
    draws: int = 1000
    export: str = "none"
    restrictions: Optional[Path] = None
    horizons: int = 40
    accepted: int = 1000
    rotation_cap: int = 1000
    grid_resolution: int = 50
    grid_bounds: tuple = ((0.0, 1.0), (0.0, 1.0))
    output_dir: Path = Path("out")
    threads: Optional[int] = None
    scale_lags: int = 4
    scale_divisor: str = "mean"
    simulate: dict = field(default_factory=dict)
    bench: dict = field(default_factory=dict)
    raw: dict = field(default_factory=dict, repr=False)

    @classmethod
    def from_dict(cls, doc: dict, base_dir: Path = Path(".")) -> "RunConfig":
        known = set(cls.__dataclass_fields__) - {"raw"}
        unknown = sorted(set(doc) - known)
        if unknown:
            raise ConfigError(f"unknown configuration keys: {', '.join(unknown)}")
        if doc.get("seed") is None:
            raise ConfigError("a seed is required")
        kw = dict(doc)
        try:
            kw["seed"] = int(kw["seed"])
            if kw["seed"] < 0:
                raise ConfigError("seed must be non-negative")
            for key in ("data", "restrictions"):
                if kw.get(key) is not None:
                    path = Path(kw[key])
                    path = path if path.is_absolute() else base_dir / path
                    if not path.exists():
                        raise ConfigError(f"{key} file not found: {path}")
                    kw[key] = path
            if "output_dir" in kw:
                out = Path(kw["output_dir"])
                kw["output_dir"] = out if out.is_absolute() else base_dir / out
            else:
                kw["output_dir"] = base_dir / "out"
            kappa = kw.get("kappa", cls.kappa)
            if isinstance(kappa, str):
                if kappa != "optimize":
                    raise ConfigError(f"kappa must be a pair or 'optimize', got {kappa!r}")
            else:
                kappa = tuple(float(x) for x in kappa)
                if len(kappa) != 2 or min(kappa) <= 0:
                    raise ConfigError("kappa must be two positive numbers")
            kw["kappa"] = kappa
            if "grid_bounds" in kw:
                kw["grid_bounds"] = tuple(tuple(float(x) for x in b) for b in kw["grid_bounds"])
            for key in ("lags", "draws", "horizons", "accepted", "rotation_cap", "grid_resolution",
                        "scale_lags"):
                if key in kw:
                    kw[key] = int(kw[key])
            if kw.get("threads") is not None:
                kw["threads"] = int(kw["threads"])
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"invalid configuration value: {exc}") from exc
        if kw.get("mode", "reduced") not in ("reduced", "structural"):
            raise ConfigError("mode must be 'reduced' or 'structural'")
        if kw.get("export", "none") not in ("none", "csv", "binary"):
            raise ConfigError("export must be 'none', 'csv' or 'binary'")
        return cls(**kw, raw=dict(doc))

    @property
    def hash(self) -> str:
        doc = {k: v for k, v in self.raw.items() if k not in _UNHASHED}
        blob = json.dumps(doc, sort_keys=True, separators=(",", ":")).encode("utf-8")
        return hashlib.sha256(blob).hexdigest()

    @property
    def workers(self) -> int:
        return self.threads if self.threads else (os.cpu_count() or 1)

    def stamp(self) -> list[str]:
        return [f"config_sha256={self.hash} seed={self.seed}"]

    def meta(self) -> dict:
        return {"config_sha256": self.hash, "seed": self.seed}


def load_config(path, overrides: dict) -> RunConfig:
    path = Path(path) if path else None
    doc = {}
    if path is not None:
        try:
            doc = json.loads(path.read_text(encoding="utf-8"))
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
        if not isinstance(doc, dict):
            raise ConfigError("config must be a JSON object")
    doc.update({k: v for k, v in overrides.items() if v is not None})
    base = path.parent if path is not None else Path(".")
    return RunConfig.from_dict(doc, base)


def _require(cfg: RunConfig, key: str):
    if getattr(cfg, key) is None:
        raise ConfigError(f"'{key}' is required for this command")
    return getattr(cfg, key)


def _model(cfg: RunConfig):
    data = load_csv(_require(cfg, "data"))
    blocks = build_blocks(data, cfg.lags)
    s2 = ar4_scales(data, lags=cfg.scale_lags, divisor=cfg.scale_divisor)
    return data, blocks, s2


def _objective(cfg, blocks, s2):
    return LogMLObjective(blocks, s2, kappa3=cfg.kappa3, levels=cfg.levels, nu0=cfg.nu0)


def _kappas(cfg, blocks, s2):
    if cfg.kappa == "optimize":
        if cfg.mode != "reduced":
            raise ConfigError("kappa optimisation is defined for reduced-form elicitation")
        best = optimize_hyperparameters(_objective(cfg, blocks, s2)).asymmetric
        return best.kappa1, best.kappa2
    return cfg.kappa


def _posterior(cfg: RunConfig):
    data, blocks, s2 = _model(cfg)
    k1, k2 = _kappas(cfg, blocks, s2)
    shrink = ShrinkageConfig(k1, k2, cfg.kappa3, mode=cfg.mode, levels=cfg.levels)
    prior = assemble_prior(shrink, s2, cfg.lags, nu0=cfg.nu0, names=data.names)
    post = conjugate.compute_posterior(blocks, prior, threads=cfg.workers)
    return data, blocks, prior, post


def _out(cfg: RunConfig) -> Path:
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    return cfg.output_dir


def cmd_fit(cfg: RunConfig) -> dict:
    t0 = time.perf_counter()
    data, blocks, prior, post = _posterior(cfg)
    per_eq = conjugate.log_marginal_likelihood(post, prior, per_equation=True)
    summaries = conjugate.posterior_summaries(post)
    out = _out(cfg)
    report = {
        "command": "fit",
        **cfg.meta(),
        "variables": list(data.names),
        "n": blocks.n,
        "p": blocks.p,
        "T": data.T,
        "T_eff": blocks.T_eff,
        "prior": prior.metadata,
        "log_ml": float(per_eq.sum()),
        "equations": [
            {"variable": data.names[i], "k": eq.k, "nu_hat": eq.nu_hat, "S_hat": eq.S_hat,
             "log_ml": float(per_eq[i]), "sigma2_mean": summaries[i].sigma2_mean}
            for i, eq in enumerate(post)
        ],
    }
    export.write_json(out / "prior.json", {**cfg.meta(), **prior_to_dict(prior)})
    t_draw = time.perf_counter()
    if cfg.export != "none":
        draws = conjugate.sample_posterior(post, cfg.draws, cfg.seed, threads=cfg.workers)
        if cfg.export == "binary":
            name = "draws.bin"
            export.write_draws_binary(out / name, draws, {**cfg.meta(), "variables": list(data.names)})
        else:
            name = "draws.csv"
            labels = [blocks.column_labels(i) for i in range(blocks.n)]
            export.write_draws_csv(out / name, draws, labels, cfg.stamp())
        report["draws"] = {"M": cfg.draws, "format": cfg.export, "file": name}
    t1 = time.perf_counter()
    export.write_json(out / "fit_report.json", report)
    # wall-clock times vary between runs, so they live outside the report
    export.write_json(out / "fit_timing.json",
                      {**cfg.meta(), "total_seconds": t1 - t0, "draw_seconds": t1 - t_draw})
    print(f"log marginal likelihood: {report['log_ml']:.6f}")
    return report


def cmd_optimize(cfg: RunConfig) -> dict:
    data, blocks, s2 = _model(cfg)
    sel = optimize_hyperparameters(_objective(cfg, blocks, s2))
    out = _out(cfg)

    def entry(r):
        return {"kappa1": r.kappa1, "kappa2": r.kappa2, "logml": r.logml, "converged": r.converged,
                "boundary": r.boundary, "evaluations": len(r.trace)}

    report = {"command": "optimize", **cfg.meta(), "variables": list(data.names),
              "symmetric": entry(sel.symmetric), "asymmetric": entry(sel.asymmetric)}
    export.write_json(out / "optimize_report.json", report)
    with (out / "hyperparameters.csv").open("w", encoding="utf-8") as fh:
        fh.write(f"# {cfg.stamp()[0]}\n")
        fh.write("prior,kappa1,kappa2,logml\n")
        for row in sel.table():
            fh.write(f"{row['prior']},{row['kappa1']!r},{row['kappa2']!r},{row['logml']!r}\n")
    print(f"{'':12s}{'kappa1':>12s}{'kappa2':>12s}{'log-ML':>14s}")
    for row in sel.table():
        print(f"{row['prior']:12s}{row['kappa1']:12.5g}{row['kappa2']:12.5g}{row['logml']:14.4f}")
    return report


def cmd_contour(cfg: RunConfig) -> dict:
    data, blocks, s2 = _model(cfg)
    grid = hyper_posterior_grid(_objective(cfg, blocks, s2), cfg.grid_resolution, cfg.grid_bounds,
                                threads=cfg.workers)
    out = _out(cfg)
    export.write_grid_csv(out / "kappa_grid.csv", grid, cfg.stamp())
    k1, k2 = grid.argmax()
    print(f"grid mode: kappa1={k1:.5g} kappa2={k2:.5g}")
    return {"argmax": (k1, k2)}


def cmd_irf(cfg: RunConfig) -> dict:
    restrictions = load_restrictions(_require(cfg, "restrictions"))
    data, blocks, prior, post = _posterior(cfg)
    try:
        restrictions = restrictions.reorder(data.names)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    draws = conjugate.sample_posterior(post, cfg.draws, cfg.seed, threads=cfg.workers)
    out = _out(cfg)
    base = {**cfg.meta(), "target_accepted": cfg.accepted, "posterior_draws": cfg.draws,
            "rotation_cap": cfg.rotation_cap}
    try:
        irfs = sign_restricted_irfs(draws, restrictions, H=cfg.horizons, accepted=cfg.accepted,
                                    cap=cfg.rotation_cap, seed=cfg.seed, threads=cfg.workers)
    except SignRestrictionError as exc:
        export.write_json(out / "irf_diagnostics.json", {**base, **exc.diagnostics})
        raise
    diag = {**base, **irfs.diagnostics()}
    if irfs.accepted < 2:
        export.write_json(out / "irf_diagnostics.json", diag)
        raise SignRestrictionError("fewer than two accepted draws; cannot form bands", diag)
    bands = percentile_bands(irfs)
    rows = export.write_bands_csv(out / "irf_bands.csv", bands, data.names, restrictions.shocks,
                                  cfg.stamp())
    diag["rows"] = rows
    export.write_json(out / "irf_diagnostics.json", diag)
    print(f"accepted {irfs.accepted} of {irfs.tried} rotations over {irfs.draws_used} draws")
    return diag


def cmd_simulate(cfg: RunConfig) -> Dataset:
    section = cfg.simulate
    if not section:
        raise ConfigError("'simulate' section is required")
    try:
        B = np.asarray(section["coefficients"], dtype=float)
        n = B.shape[-1]
        Sigma = np.asarray(section.get("covariance", np.eye(n)), dtype=float)
        data = simulate_var(B, Sigma, int(section["T"]), cfg.seed, intercept=section.get("intercept"),
                            burn_in=int(section.get("burn_in", 100)), names=section.get("names"))
    except KeyError as exc:
        raise ConfigError(f"simulate section is missing {exc}") from exc
    except UnstableSystemError as exc:
        raise ConfigError(str(exc)) from exc
    out = _out(cfg)
    write_csv(out / section.get("output", "simulated.csv"), data, cfg.stamp())
    print(f"wrote {data.T} x {data.n} observations")
    return data


def run_bench(sizes, p: int, T: int, M: int, seed: int, kappa=(0.04, 0.0016)) -> list[dict]:
    """Wall-clock time to compute the posterior and draw ``M`` samples per system size."""
    rows = []
    for n in sizes:
        B = np.zeros((p, n, n))
        B[0] = 0.5 * np.eye(n)
        data = simulate_var(B, np.eye(n), T, seed)
        blocks = build_blocks(data, p)
        s2 = ar4_scales(data)
        prior = assemble_prior(ShrinkageConfig(*kappa, mode="reduced"), s2, p)
        before = conjugate.FACTORIZATIONS["count"]
        t0 = time.perf_counter()
        post = conjugate.compute_posterior(blocks, prior)
        for i in range(n):
            conjugate.sample_equation(post[i], M, seed, i)
        seconds = time.perf_counter() - t0
        rows.append({"n": n, "p": p, "T": T, "draws": M, "seconds": seconds,
                     "factorizations": conjugate.FACTORIZATIONS["count"] - before})
    return rows


def cmd_bench(cfg: RunConfig) -> list[dict]:
    section = {"sizes": [25, 50, 100], "lags": 4, "T": 160, "draws": 10000, **cfg.bench}
    rows = run_bench(section["sizes"], int(section["lags"]), int(section["T"]), int(section["draws"]), cfg.seed)
    out = _out(cfg)
    with (out / "bench.csv").open("w", encoding="utf-8") as fh:
        fh.write(f"# {cfg.stamp()[0]}\n")
        fh.write("n,p,T,draws,seconds,factorizations\n")
        for r in rows:
            fh.write(f"{r['n']},{r['p']},{r['T']},{r['draws']},{r['seconds']:.4f},{r['factorizations']}\n")
    print(f"{'n':>5s}{'seconds':>10s}{'chol/eq':>9s}")
    for r in rows:
        print(f"{r['n']:5d}{r['seconds']:10.3f}{r['factorizations'] / r['n']:9.0f}")
    return rows


COMMANDS = {
    "fit": cmd_fit,
    "optimize": cmd_optimize,
    "contour": cmd_contour,
    "irf": cmd_irf,
    "simulate": cmd_simulate,
    "bench": cmd_bench,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="acbvar", description="Bayesian VAR estimation with equation-wise conjugate priors")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", "-c", help="JSON run configuration")
        p.add_argument("--seed", type=int)
        p.add_argument("--threads", type=int)
        p.add_argument("--output-dir", dest="output_dir")
        p.add_argument("--data")
        p.add_argument("--lags", type=int)
        p.add_argument("--draws", type=int)
        if name in ("fit", "irf"):
            p.add_argument("--kappa", type=float, nargs=2, metavar=("K1", "K2"))
            p.add_argument("--optimize", action="store_true", help="select kappa by marginal likelihood")
        if name == "fit":
            p.add_argument("--export", choices=("none", "csv", "binary"))
        if name == "irf":
            p.add_argument("--restrictions")
            p.add_argument("--horizons", type=int)
            p.add_argument("--accepted", type=int)
            p.add_argument("--rotation-cap", dest="rotation_cap", type=int)
        if name == "contour":
            p.add_argument("--resolution", dest="grid_resolution", type=int)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    opts = vars(args)
    command = opts.pop("command")
    config_path = opts.pop("config")
    if opts.pop("optimize", False):
        opts["kappa"] = "optimize"
    try:
        cfg = load_config(config_path, opts)
        COMMANDS[command](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except SignRestrictionError as exc:
        print(f"sign restrictions: {exc}", file=sys.stderr)
        return EXIT_SIGN
    except (NumericalError, ArithmeticError, linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
