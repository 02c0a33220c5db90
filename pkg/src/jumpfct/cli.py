"""Command-line experiment runner.

Exit codes: 0 success, 2 configuration error, 3 runtime or numerical error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import tempfile
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import config as cfgmod
from .analytic_core import Degenerate, TwoPoint
from .bounds import cdf_bound_BX, cdf_lower_bound, pdf_lower_bound
from .montecarlo import (
    ClosenessError,
    closeness_measure,
    default_horizon,
    epanechnikov_kde,
    kaplan_meier,
    simulate_batch,
)
from .bounds import BoundCurve, BoundKind

SMOKE_SAMPLES = 10_000
TABLE1_MU = (1.0, 1.5, 2.0, 2.5)
TABLE1_ETA = (1.0, 0.8, 0.5, 0.2, 0.0)
# published closeness values, rows mu, columns eta
TABLE1_PUBLISHED = {
    1.0: (3.9358e-02, 1.1393e-01, 2.4054e-01, 3.6791e-01, 4.5211e-01),
    1.5: (2.1059e-02, 6.5103e-02, 1.4572e-01, 2.2688e-01, 2.8409e-01),
    2.0: (1.7266e-02, 4.4515e-02, 9.6393e-02, 1.5005e-01, 1.9656e-01),
    2.5: (1.7283e-02, 3.4975e-02, 7.0264e-02, 1.1009e-01, 1.4486e-01),
}


def fmt(x) -> str:
    return repr(float(x)) if np.isfinite(x) else str(float(x))


def write_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_csv(path: Path, header, rows) -> None:
    buf = io.StringIO()
    out = csv.writer(buf, lineterminator="\n")
    out.writerow(header)
    for row in rows:
        out.writerow([fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])
    write_atomic(path, buf.getvalue())


def write_json(path: Path, payload) -> None:
    write_atomic(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")


# --------------------------------------------------------------------------
# runners
# --------------------------------------------------------------------------


def cdf_curve(exp: cfgmod.ExperimentConfig, grid) -> BoundCurve:
    spec = exp.spec
    if isinstance(spec.jumps, Degenerate) or spec.jumps.eta == 1.0:
        return cdf_lower_bound(spec, grid, exp.n_max, exp.quad_order, exp.x_order)
    # two-point jumps: the first-jump bound with its running maximum
    raw = cdf_bound_BX(spec, grid, exp.quad_order, exp.x_order)
    values = np.clip(np.maximum.accumulate(raw), 0.0, 1.0)
    return BoundCurve(grid, values, BoundKind.CDF, attained_n=np.ones(grid.size, dtype=int), meta={"n_max": 1})


def run_bounds(exp: cfgmod.ExperimentConfig, out: Path) -> dict:
    grid = exp.grid
    pdf = pdf_lower_bound(exp.spec, grid, exp.quad_order)
    write_csv(out / "pdf_bound.csv", ["t", "value"], zip(grid, pdf))
    cdf = cdf_curve(exp, grid)
    write_csv(
        out / "cdf_bound.csv",
        ["t", "value", "attained_n"],
        zip(grid, cdf.values, (int(n) for n in cdf.attained_n)),
    )
    return {"grid_points": int(grid.size), "n_max": cdf.meta.get("n_max")}


def run_simulation(exp: cfgmod.ExperimentConfig, out: Path) -> dict:
    samples = simulate_batch(exp.spec, exp.sim)
    grid = exp.grid
    write_csv(out / "samples.csv", ["time", "censored"], zip(samples.times, samples.censored.astype(int)))
    summary = {
        "seed": int(exp.sim.seed),
        "n_samples": len(samples),
        "n_censored": int(samples.censored.sum()),
        "censored_fraction": samples.censored_fraction,
        "horizon": float(exp.sim.horizon),
        "stream_stride": int(exp.sim.stream_stride),
    }
    if samples.censored.all():
        summary["bandwidth"] = None
    else:
        kde = epanechnikov_kde(samples, grid, exp.bandwidth)
        write_csv(out / "kde.csv", ["t", "density"], zip(grid, kde.values))
        summary["bandwidth"] = kde.bandwidth
    km = kaplan_meier(samples)
    write_csv(out / "km.csv", ["t", "cdf"], zip(grid, km(grid)))
    write_json(out / "summary.json", summary)
    return summary


def _closeness(exp: cfgmod.ExperimentConfig, h: float):
    samples = simulate_batch(exp.spec, exp.sim)
    top = max(exp.sim.horizon, exp.t_max)
    grid = np.arange(1, int(np.floor(top / h + 1e-9)) + 1) * h
    est = epanechnikov_kde(samples, grid, exp.bandwidth)
    bound = BoundCurve(grid, pdf_lower_bound(exp.spec, grid, exp.quad_order), BoundKind.PDF)
    return closeness_measure(est, bound, h), est


def run_closeness(exp: cfgmod.ExperimentConfig, out: Path, h: float) -> dict:
    value, est = _closeness(exp, h)
    payload = {
        "E": value,
        "h": h,
        "seed": int(exp.sim.seed),
        "n_samples": int(exp.sim.n_samples),
        "bandwidth": est.bandwidth,
    }
    write_json(out / "closeness.json", payload)
    return payload


def run_table1(base: cfgmod.ExperimentConfig, out: Path, h: float = 0.01) -> list:
    rows = []
    for mu in TABLE1_MU:
        for k, eta in enumerate(TABLE1_ETA):
            raw = cfgmod.figure1_raw(mu=mu, eta=eta)
            spec = cfgmod.build(raw).spec
            exp = replace(
                base,
                spec=spec,
                sim=replace(base.sim, horizon=default_horizon(spec)),
                t_max=default_horizon(spec),
            )
            value, _ = _closeness(exp, h)
            paper = TABLE1_PUBLISHED[mu][k]
            rows.append((mu, eta, value, paper, (value - paper) / paper))
            print(f"mu={mu:<4} eta={eta:<4} E={value:.4e} published={paper:.4e}", file=sys.stderr)
    write_csv(out / "table1.csv", ["mu", "eta", "E_estimated", "E_paper", "relative_gap"], rows)
    return rows


# --------------------------------------------------------------------------
# entry point
# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="jumpfct", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, needs_config in (("bounds", True), ("simulate", True), ("closeness", True), ("table1", False)):
        p = sub.add_parser(name)
        p.add_argument("--config", required=needs_config, help="INI experiment file")
        p.add_argument("--seed", type=int, help="override the configured seed")
        p.add_argument("--samples", type=int, help="override the sample count")
        p.add_argument("--out", help="output directory")
        p.add_argument("--smoke", action="store_true", help=f"use {SMOKE_SAMPLES} samples")
        if name in ("closeness", "table1"):
            p.add_argument("--step", type=float, default=0.01, help="closeness step h")
    return parser


def _experiment(args) -> cfgmod.ExperimentConfig:
    if args.config:
        exp = cfgmod.load(args.config)
    else:
        exp = cfgmod.build(cfgmod.figure1_raw())
    sim = exp.sim
    if args.seed is not None:
        if not 0 <= args.seed < 2**64:
            raise cfgmod.ConfigError("seed must be an unsigned 64-bit integer", "--seed")
        sim = replace(sim, seed=args.seed)
    if args.samples is not None:
        if args.samples < 1:
            raise cfgmod.ConfigError("must be >= 1", "--samples")
        sim = replace(sim, n_samples=args.samples)
    if args.smoke:
        sim = replace(sim, n_samples=SMOKE_SAMPLES)
    return replace(exp, sim=sim)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        exp = _experiment(args)
        out = Path(args.out or exp.directory)
        if args.command == "bounds":
            info = run_bounds(exp, out)
        elif args.command == "simulate":
            info = run_simulation(exp, out)
        elif args.command == "closeness":
            info = run_closeness(exp, out, args.step)
        else:
            info = {"cells": len(run_table1(exp, out, args.step))}
    except cfgmod.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (ClosenessError, ValueError, ArithmeticError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    print(json.dumps(info, sort_keys=True), file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
