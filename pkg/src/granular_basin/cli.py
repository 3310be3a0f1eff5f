"""Command-line experiment runner.

Subcommands: ``analyze``, ``sigma-c``, ``check``, ``simulate particles|pde``
and ``sweep``. Exit codes: 0 success, 2 configuration or validation error,
3 numerical failure.
"""
import argparse
import csv
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import rng
from .condition import DeltaSearchSpec, best_report, delta_table, mirror_check
from .config import ConfigError, load_config
from .exceptions import GranularError, NoPositiveSteadyMean, NumericalError
from .fokker_planck import FPConfig, fp_evolve
from .initial import InitialMeasureSpec
from .measures import GridSpec, MeasureError, write_density_csv
from .particles import SimConfig, simulate
from .steady_state import (
    QuadratureSpec,
    analyze,
    chi,
    classify_limit,
    default_m_max,
    find_sigma_c,
)
from .svg import line_plot

logger = logging.getLogger("granular_basin")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


def _num(v):
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.17g}"
    return str(v)


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_num(v) for v in row])


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    return obj


def write_json(path, obj):
    tmp = Path(str(path) + ".tmp")
    tmp.write_text(json.dumps(_plain(obj), indent=2, sort_keys=True) + "\n")
    os.replace(tmp, path)


# ------------------------------------------------------------------ setup


class _Context:
    def __init__(self, cfg):
        self.cfg = cfg
        self.vp = cfg.potential()
        self.alpha = cfg.require("model.alpha")
        self.sigma = cfg.require("model.sigma")
        self.spec = QuadratureSpec(
            panel_order=cfg["quadrature.panel_order"],
            rel_tol=cfg["quadrature.rel_tol"],
            truncation_factor=cfg["quadrature.truncation_factor"],
        )
        self.n_scan = cfg["quadrature.n_scan"]
        self.out = Path(cfg["output.dir"])
        self.out.mkdir(parents=True, exist_ok=True)
        self._report = None

    def report(self, with_gap=False, with_sigma_c=False):
        if self._report is None or with_gap or with_sigma_c:
            self._report = analyze(self.vp, self.alpha, self.sigma, self.spec, self.n_scan,
                                   self.cfg["grid.n_cells"], with_sigma_c=with_sigma_c, with_gap=with_gap)
        return self._report

    def init_spec(self, kind=None, params=None):
        kind = kind or self.cfg.require("init.kind")
        params = self.cfg.init_params() if params is None else params
        try:
            return InitialMeasureSpec(kind, params)
        except MeasureError as exc:
            raise ConfigError(str(exc), key="init.kind", line=self.cfg.lines.get("init.kind")) from exc

    def working_grid(self, spec, report, n_cells=None):
        """Report grid extended (same spacing) to hold the initial law's support."""
        lo, hi = spec.support(report.m_sigma)
        base = report.nu_zero.grid
        if n_cells is not None:
            L = max(base.x_max, abs(lo) + 0.5, abs(hi) + 0.5)
            return GridSpec(-L, L, n_cells)
        pad = 10 * base.dx
        grid, _ = base.extend_to(lo - pad, hi + pad)
        return grid

    def initial_measure(self, spec, report, n_cells=None):
        grid = self.working_grid(spec, report, n_cells)
        return spec.resolve(grid, self.vp, self.alpha, self.sigma, report.m_sigma)


# ------------------------------------------------------------------ commands


def run_analyze(cfg):
    ctx = _Context(cfg)
    rep = ctx.report(with_gap=cfg["analyze.gap"], with_sigma_c=cfg["analyze.sigma_c"])
    write_json(ctx.out / "report.json", rep.to_dict())
    for label, nu in sorted(rep.steady_states().items()):
        write_density_csv(ctx.out / f"{label}.csv", nu.x, nu.density)
    m_max = default_m_max(ctx.vp, ctx.alpha, ctx.sigma)
    ms = np.linspace(-m_max, m_max, 257)
    vals = chi(ctx.vp, ctx.alpha, ctx.sigma, ms, ctx.spec)
    write_csv(ctx.out / "chi.csv", ["m", "chi"], zip(ms, vals))
    line_plot(ctx.out / "chi.svg", [("chi", ms, vals)], title="self-consistency map", xlabel="m", ylabel="chi")
    return rep


def run_sigma_c(cfg):
    ctx = _Context(cfg)
    sc = find_sigma_c(ctx.vp, ctx.alpha, ctx.spec, ctx.n_scan)
    out = {"alpha": ctx.alpha, "sigma_c": sc, "n_scan": ctx.n_scan, "rel_tol": ctx.spec.rel_tol}
    write_json(ctx.out / "sigma_c.json", out)
    return out


def _condition_rows(table):
    return [(r.delta, r.lhs, r.rhs, r.condition1_pass, r.condition2_pass, r.passed) for r in table]


def run_check(cfg):
    ctx = _Context(cfg)
    spec = ctx.init_spec()
    rep = ctx.report()
    if rep.m_sigma is None:
        raise NoPositiveSteadyMean(f"sigma={ctx.sigma} is at or above critical: a single steady state")
    mu0 = ctx.initial_measure(spec, rep)
    search = DeltaSearchSpec(cfg["check.n_delta"])
    table = delta_table(mu0, ctx.vp, ctx.alpha, ctx.sigma, search, rep.m_sigma, ctx.spec)
    best = best_report(table)
    mirror = None
    if cfg["check.mirror"]:
        mirror = mirror_check(mu0, ctx.vp, ctx.alpha, ctx.sigma, search, rep.m_sigma, ctx.spec)
    predicted = best.predicted_limit if best else (mirror.predicted_limit if mirror else "none")
    result = {
        "m_sigma": rep.m_sigma,
        "theta": ctx.vp.theta,
        "branch": table[0].branch,
        "best": best.to_dict() if best else None,
        "mirror": mirror.to_dict() if mirror else None,
        "predicted_limit": predicted,
    }
    write_json(ctx.out / "condition.json", result)
    write_csv(ctx.out / "delta_table.csv",
              ["delta", "lhs", "rhs", "condition1", "condition2", "pass"], _condition_rows(table))
    return result


def _sim_config(cfg, seed=None):
    return SimConfig(
        n_particles=cfg["sim.n_particles"], dt=cfg["sim.dt"], t_final=cfg["sim.t_final"],
        seed=cfg["seed"] if seed is None else seed, record_every=cfg["sim.record_every"],
    )


def _particles(ctx, mu0, rep, seed=None, dump=False):
    sim = _sim_config(ctx.cfg, seed)
    return simulate(mu0, ctx.vp, ctx.alpha, ctx.sigma, sim, rep, keep_positions=dump)


def _pde(ctx, spec, rep):
    cfg = ctx.cfg
    mu0 = ctx.initial_measure(spec, rep, n_cells=cfg["pde.n_cells"])
    fpc = FPConfig(mu0.grid, cfg["pde.t_final"], cfg["pde.dt"], cfg["pde.scheme"], cfg["pde.record_every"])
    return fp_evolve(mu0, ctx.vp, ctx.alpha, ctx.sigma, fpc, rep)


def run_simulate(cfg, engine):
    ctx = _Context(cfg)
    spec = ctx.init_spec()
    rep = ctx.report()
    if engine == "particles":
        mu0 = ctx.initial_measure(spec, rep)
        rec, snaps = _particles(ctx, mu0, rep, dump=cfg["sim.dump_positions"])
        write_csv(ctx.out / "trajectory.csv", ["t", "mean", "w2_plus", "w2_zero", "w2_minus"], rec.rows())
        for i, (t, xs) in enumerate(snaps):
            write_csv(ctx.out / f"positions_{i:05d}.csv", ["t", "x"], ((t, x) for x in xs))
        summary = {
            "engine": "particles", "n_particles": cfg["sim.n_particles"], "seed": cfg["seed"],
            "nearest": rec.nearest, "final_mean": rec.empirical_means[-1], "min_mean": rec.min_mean,
            "final_w2": rec.final_distances(), "m_sigma": rep.m_sigma,
        }
        times, means = rec.times, rec.empirical_means
        w2 = [("nu_plus", rec.w2_to_nu_plus), ("nu_zero", rec.w2_to_nu_zero), ("nu_minus", rec.w2_to_nu_minus)]
    else:
        snaps, diag = _pde(ctx, spec, rep)
        rows = ((st.time, x, d) for st in snaps for x, d in zip(st.mu.x, st.mu.density))
        write_csv(ctx.out / "snapshots.csv", ["t", "x", "density"], rows)
        write_csv(ctx.out / "diagnostics.csv",
                  ["t", "mass", "m1", "free_energy", "w2_plus", "w2_zero", "w2_minus"], diag.rows())
        final = {"nu_plus": diag.w2_plus[-1], "nu_zero": diag.w2_zero[-1], "nu_minus": diag.w2_minus[-1]}
        summary = {
            "engine": "pde", "scheme": cfg["pde.scheme"], "n_cells": cfg["pde.n_cells"],
            "nearest": classify_limit(final), "final_mean": diag.m1[-1], "final_w2": final,
            "max_mass_drift": diag.max_mass_drift, "max_free_energy_increase": diag.max_free_energy_increase,
            "n_steps": diag.n_steps, "m_sigma": rep.m_sigma,
        }
        times, means = diag.times, diag.m1
        w2 = [("nu_plus", diag.w2_plus), ("nu_zero", diag.w2_zero), ("nu_minus", diag.w2_minus)]
    write_json(ctx.out / "summary.json", summary)
    line_plot(ctx.out / "mean.svg", [("mean", times, means)], title="mean", xlabel="t", ylabel="m1(t)")
    line_plot(ctx.out / "w2.svg", [(k, times, v) for k, v in w2], title="W2 to steady states",
              xlabel="t", ylabel="W2", logy=True)
    return summary


_SWEEP_HEADER = ["index", "param", "condition_pass", "delta", "predicted_limit", "simulated_limit",
                 "w2_plus", "w2_zero", "w2_minus", "consistent"]


def _sweep_row(ctx, rep, i, value):
    cfg = ctx.cfg
    family = cfg["sweep.family"]
    if family == "steady_family":
        spec = InitialMeasureSpec("steady_family", {"m_fraction": value})
    elif family == "mirror":
        spec = InitialMeasureSpec("steady_family", {"m_fraction": -value})
    else:
        spec = InitialMeasureSpec("gaussian", {"mean": value, "sd": cfg["sweep.sd"]})
    mu0 = ctx.initial_measure(spec, rep)
    search = DeltaSearchSpec(cfg["check.n_delta"])
    best = best_report(delta_table(mu0, ctx.vp, ctx.alpha, ctx.sigma, search, rep.m_sigma, ctx.spec))
    mirror = None if best else mirror_check(mu0, ctx.vp, ctx.alpha, ctx.sigma, search, rep.m_sigma, ctx.spec)
    found = best or mirror
    if cfg["sweep.engine"] == "particles":
        rec, _ = _particles(ctx, mu0, rep, seed=rng.derive_seed(cfg["seed"], i))
        final = rec.final_distances()
    else:
        _, diag = _pde(ctx, spec, rep)
        final = {"nu_plus": diag.w2_plus[-1], "nu_zero": diag.w2_zero[-1], "nu_minus": diag.w2_minus[-1]}
    label = classify_limit(final)
    predicted = found.predicted_limit if found else "none"
    row = {
        "index": i, "param": value, "condition_pass": found is not None,
        "delta": found.delta if found else None, "predicted_limit": predicted,
        "simulated_limit": label, "w2_plus": final["nu_plus"], "w2_zero": final["nu_zero"],
        "w2_minus": final["nu_minus"],
        "consistent": predicted == "none" or label == predicted or label == "undecided",
    }
    write_json(ctx.out / "rows" / f"row_{i:04d}.json", row)
    return row


def run_sweep(cfg, jobs=1):
    ctx = _Context(cfg)
    family = cfg["sweep.family"]
    if family not in ("steady_family", "mirror", "gaussian"):
        raise ConfigError("expected steady_family, mirror or gaussian", key="sweep.family")
    if cfg["sweep.engine"] not in ("particles", "pde"):
        raise ConfigError("expected particles or pde", key="sweep.engine")
    values = cfg.require("sweep.values")
    rep = ctx.report()
    if rep.m_sigma is None:
        raise NoPositiveSteadyMean(f"sigma={ctx.sigma} is at or above critical: a single steady state")
    (ctx.out / "rows").mkdir(exist_ok=True)
    with ThreadPoolExecutor(max_workers=max(1, jobs)) as pool:
        rows = list(pool.map(lambda iv: _sweep_row(ctx, rep, *iv), enumerate(values)))
    write_csv(ctx.out / "sweep.csv", _SWEEP_HEADER, ([r[k] for k in _SWEEP_HEADER] for r in rows))
    wrong = [r["index"] for r in rows if r["condition_pass"] and r["simulated_limit"] not in
             (r["predicted_limit"], "undecided")]
    summary = {
        "family": family, "engine": cfg["sweep.engine"], "m_sigma": rep.m_sigma,
        "n_rows": len(rows), "n_condition_pass": sum(r["condition_pass"] for r in rows),
        "n_undecided": sum(r["simulated_limit"] == "undecided" for r in rows),
        "contradicting_rows": wrong,
    }
    write_json(ctx.out / "sweep.json", summary)
    return rows, summary


# ------------------------------------------------------------------ entry point


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="config file (key = value lines)")
    common.add_argument("--out", help="output directory (overrides output.dir)")
    common.add_argument("--seed", type=int, help="unsigned 64-bit seed (overrides seed)")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override one config key; repeatable")
    common.add_argument("--jobs", type=int, default=1, help="parallel sweep rows")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="granular-basin", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("analyze", parents=[common], help="steady states and self-consistency map")
    sub.add_parser("sigma-c", parents=[common], help="critical noise level")
    sub.add_parser("check", parents=[common], help="initial-condition criterion")
    sim = sub.add_parser("simulate", parents=[common], help="particle or PDE run")
    sim.add_argument("engine", choices=["particles", "pde"])
    sub.add_parser("sweep", parents=[common], help="basin map over a family of initial laws")
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config, args.set, seed=args.seed, out=args.out)
        if args.command == "analyze":
            run_analyze(cfg)
        elif args.command == "sigma-c":
            run_sigma_c(cfg)
        elif args.command == "check":
            run_check(cfg)
        elif args.command == "simulate":
            run_simulate(cfg, args.engine)
        else:
            run_sweep(cfg, args.jobs)
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (GranularError, ValueError, KeyError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
