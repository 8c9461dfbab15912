"""Command-line experiment runner.

    predict <command> --config <path> [--out <path>] [--seed N]
                      [--samples N] [--shards N]

Commands: ``mvn-risk`` and ``gp-risk`` (Monte Carlo risk tables),
``gp-improvement`` (oracle entropy-improvement table), ``mvn-grid``
(log-density grids of all normal-family predictors around the data), and
``check-invariance`` (the symmetry property suite).  Flags override config
keys.  Tables are written as full-precision CSV with a JSON metadata
sidecar carrying the config hash, seed and library versions.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import mvn
from .config import RunConfig, apply_overrides, config_hash, load_config
from .distributions import MvnParams, sample_stats
from .exceptions import ConfigError
from .gp import GpParams, default_design_path, entropy_improvement, load_design
from .invariance import run_all_checks
from .results import ResultCell, ResultTable, cells_from_estimates, library_versions, write_table
from .risk import GP_KINDS, GpExperiment, MvnExperiment, estimate_risk_table

_DEFAULT_MVN_PREDICTORS = mvn.MVN_KINDS
_DEFAULT_MVN_N = (3, 4, 5, 6, 7, 8, 9, 10)
_DEFAULT_GP_N = (4, 5, 6, 7, 8, 9, 10)


def demo_dataset_path() -> Path:
    """Frozen three-point bivariate dataset used by the grid command."""
    return Path(__file__).parent / "data" / "mvn_demo3.txt"


def load_points(path) -> np.ndarray:
    """Read a plain-text point table: one 'x1 x2' pair per line, '#' comments."""
    rows = []
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            rows.append([float(c) for c in line.split()])
        except ValueError as exc:
            raise ValueError(f"{path}:{lineno}: non-numeric entry") from exc
    if not rows:
        raise ValueError(f"{path}: no data rows")
    return np.asarray(rows)


def _metadata(config: RunConfig) -> dict:
    return {
        "command": config.command,
        "config_hash": config_hash(config),
        "seed": config.seed,
        "n_samples": config.n_samples,
        "shards": config.shards,
        "versions": library_versions(),
        # Predictors scored under one (seed, n) share the same draws, so
        # differences between cells are sharper than the per-cell errors;
        # the reported std_err applies to each cell on its own.
        "common_random_numbers": True,
    }


def _run_mvn_risk(config: RunConfig) -> int:
    predictors = config.predictors or _DEFAULT_MVN_PREDICTORS
    n_range = config.n_range or _DEFAULT_MVN_N
    model = MvnExperiment(MvnParams.standard(config.dim))
    estimates = estimate_risk_table(model, predictors, n_range,
                                    config.n_samples, config.seed, config.shards)
    table = ResultTable(cells=cells_from_estimates(estimates), metadata=_metadata(config))
    write_table(table, Path(config.out).with_suffix(".csv"))
    return 0


def _run_gp_risk(config: RunConfig) -> int:
    design_path = config.design_file or default_design_path()
    design = load_design(design_path, lengthscale=config.lengthscale)
    beta = np.asarray(config.beta, dtype=float) if config.beta else np.zeros(design.p)
    model = GpExperiment(design, GpParams(beta=beta, sigma_y=config.sigma_y))
    predictors = config.predictors or GP_KINDS
    n_range = config.n_range or tuple(n for n in _DEFAULT_GP_N if n <= design.n)
    estimates = estimate_risk_table(model, predictors, n_range,
                                    config.n_samples, config.seed, config.shards)
    meta = _metadata(config)
    meta["design_file"] = str(design_path)
    table = ResultTable(cells=cells_from_estimates(estimates), metadata=meta)
    write_table(table, Path(config.out).with_suffix(".csv"))
    return 0


def _run_gp_improvement(config: RunConfig) -> int:
    design_path = config.design_file or default_design_path()
    design = load_design(design_path, lengthscale=config.lengthscale)
    n_range = config.n_range or tuple(range(0, design.n + 1))
    cells = []
    for n_obs in n_range:
        value = entropy_improvement(design, n_obs)
        cells.append(ResultCell(predictor="oracle-entropy-improvement", n=n_obs,
                                status="ok", mean=value, std_err=0.0,
                                n_samples=0, n_undefined=0))
    meta = _metadata(config)
    meta["design_file"] = str(design_path)
    table = ResultTable(cells=tuple(cells), metadata=meta)
    write_table(table, Path(config.out).with_suffix(".csv"))
    return 0


def _level_set_summary(grid: np.ndarray, xs: np.ndarray, ys: np.ndarray) -> list:
    """Shape summaries of super-level sets: elongation and orientation.

    For each offset below the grid maximum, the covariance of the grid
    points inside the level set is diagonalized; elliptical level sets of
    the same family share elongation and angle across offsets and kinds.
    """
    out = []
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    for offset in (1.0, 2.0):
        mask = grid >= grid.max() - offset
        px = gx[mask]
        py = gy[mask]
        pts = np.column_stack([px, py])
        pts = pts - pts.mean(axis=0)
        cov = pts.T @ pts / len(pts)
        evals, evecs = np.linalg.eigh(cov)
        elong = float(np.sqrt(evals[1] / max(evals[0], 1e-300)))
        angle = float(np.degrees(np.arctan2(evecs[1, 1], evecs[0, 1])) % 180.0)
        out.append({"offset_nats": offset, "cells": int(mask.sum()),
                    "elongation": elong, "angle_deg": angle})
    return out


def _run_mvn_grid(config: RunConfig) -> int:
    data = load_points(config.dataset_file or demo_dataset_path())
    if data.shape[1] != 2:
        raise ConfigError("mvn-grid expects bivariate data")
    stats = sample_stats(data)
    n = stats.n
    center = stats.mean if config.grid_center == "mean" else np.zeros(2)
    sample_std = np.sqrt(np.diag(stats.scatter) / (n - 1))
    half = config.grid_halfwidth * sample_std
    res = config.grid_resolution
    xs = np.linspace(center[0] - half[0], center[0] + half[0], res)
    ys = np.linspace(center[1] - half[1], center[1] + half[1], res)
    pts = np.stack(np.meshgrid(xs, ys, indexing="ij"), axis=-1)
    out_base = Path(config.out)
    summaries = {}
    grid_files = {}
    for kind in mvn.MVN_KINDS:
        grid = mvn.predictive_logdensity_from_stats(kind, n, stats.mean, stats.scatter, pts)
        path = out_base.with_name(out_base.name + f"_{kind}.csv")
        with path.open("w") as fh:
            fh.write("x1,x2,log_density\n")
            for i in range(res):
                for j in range(res):
                    fh.write(f"{float(xs[i])!r},{float(ys[j])!r},{float(grid[i, j])!r}\n")
        grid_files[kind] = path.name
        summaries[kind] = _level_set_summary(grid, xs, ys)
    meta = _metadata(config)
    meta.update({
        "dataset": str(config.dataset_file or demo_dataset_path()),
        "grid": {"center": [float(c) for c in center],
                 "halfwidth": [float(h) for h in half],
                 "resolution": res},
        "grid_files": grid_files,
        "level_sets": summaries,
    })
    out_base.with_suffix(".json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return 0


def _run_check_invariance(config: RunConfig) -> int:
    checks = run_all_checks()
    report = [{"property": c.name, "passed": bool(c.passed),
               "max_error": float(c.max_error), "tolerance": float(c.tolerance),
               "detail": c.detail} for c in checks]
    meta = _metadata(config)
    meta["properties"] = report
    Path(config.out).with_suffix(".json").write_text(
        json.dumps(meta, indent=2, sort_keys=True) + "\n")
    for c in checks:
        status = "PASS" if c.passed else "FAIL"
        print(f"[{status}] {c.name}: max_error={c.max_error:.3e} tolerance={c.tolerance:.3e}")
    return 0 if all(c.passed for c in checks) else 1


_RUNNERS = {
    "mvn-risk": _run_mvn_risk,
    "gp-risk": _run_gp_risk,
    "gp-improvement": _run_gp_improvement,
    "mvn-grid": _run_mvn_grid,
    "check-invariance": _run_check_invariance,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="predict", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _RUNNERS:
        cmd = sub.add_parser(name)
        cmd.add_argument("--config", type=str, default=None, help="flat key = value config file")
        cmd.add_argument("--out", type=str, default=None, help="output path stem")
        cmd.add_argument("--seed", type=int, default=None)
        cmd.add_argument("--samples", type=int, default=None)
        cmd.add_argument("--shards", type=int, default=None)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.config:
            config = load_config(args.config, command=args.command)
        else:
            config = RunConfig(command=args.command)
        config = apply_overrides(config, out=args.out, seed=args.seed,
                                 samples=args.samples, shards=args.shards)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        return _RUNNERS[config.command](config)
    except Exception as exc:  # noqa: BLE001 - error record is the contract
        record = {"error": type(exc).__name__, "message": str(exc),
                  "command": config.command, "config_hash": config_hash(config)}
        Path(config.out).with_suffix(".error.json").write_text(
            json.dumps(record, indent=2) + "\n")
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
