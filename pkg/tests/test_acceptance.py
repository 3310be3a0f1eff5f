"""End-to-end acceptance checks, one test per criterion.

Each test records a PASS/FAIL line that is printed in the terminal summary.
Reference configuration: V(x) = x^4/4 - x^2/2, alpha = 1, sigma = 0.5.
"""
import filecmp
import os
import subprocess
import sys
import time

import numpy as np
import pytest

import oracles
from conftest import QUARTIC, record_acceptance
from granular_basin.condition import mirror_check, search_delta
from granular_basin.fokker_planck import FPConfig, fp_evolve
from granular_basin.measures import (
    GridMeasure,
    GridSpec,
    gaussian_density,
    l2_distance,
    wasserstein2,
    wasserstein2_samples,
)
from granular_basin.particles import SimConfig, run_coupled, run_frozen, simulate
from granular_basin.potential import EffectiveParams
from granular_basin.steady_state import (
    QuadratureSpec,
    analyze,
    chi,
    count_zeros,
    find_m_sigma,
    find_sigma_c,
    poincare_gap,
    steady_density,
    weighted_moment,
)


@pytest.fixture(scope="module")
def half_mean_start(quartic, report_ref):
    start = steady_density(quartic, 1.0, 0.5, 0.5 * report_ref.m_sigma, report_ref.nu_zero.grid)
    rep = search_delta(start, quartic, 1.0, 0.5, m_sigma=report_ref.m_sigma)
    return start, rep


def test_criterion_01_chi_structure(quartic):
    t0 = time.perf_counter()
    c0 = abs(float(chi(quartic, 1.0, 0.5, 0.0)))
    ms = np.linspace(0.02, 2.5, 64)
    odd = float(np.max(np.abs(chi(quartic, 1.0, 0.5, ms) + chi(quartic, 1.0, 0.5, -ms))))
    z_low, z_high = count_zeros(quartic, 1.0, 0.5), count_zeros(quartic, 1.0, 2.0)
    m = find_m_sigma(quartic, 1.0, 0.5)
    resid = abs(float(chi(quartic, 1.0, 0.5, m)))
    elapsed = time.perf_counter() - t0
    ok = c0 <= 1e-10 and odd <= 1e-10 and z_low == 3 and z_high == 1 and resid <= 1e-8 and elapsed < 10
    record_acceptance(1, ok, f"|chi(0)|={c0:.1e} odd={odd:.1e} zeros={z_low}/{z_high} "
                             f"residual={resid:.1e} time={elapsed:.1f}s")
    assert ok


def test_criterion_02_quadrature_oracle(quartic):
    t0 = time.perf_counter()
    rng = np.random.default_rng(20240601)
    worst_chi = worst_mom = 0.0
    for _ in range(32):
        m, sigma = rng.uniform(-2.0, 2.0), rng.uniform(0.2, 2.0)
        worst_chi = max(worst_chi, abs(float(chi(quartic, 1.0, sigma, m))
                                       - oracles.trapezoid_chi(QUARTIC, 1.0, sigma, m)))
        worst_mom = max(worst_mom, abs(weighted_moment(quartic, EffectiveParams(1.0, sigma, m), 2)
                                       - oracles.trapezoid_moment(QUARTIC, 1.0, sigma, m, 2)))
    elapsed = time.perf_counter() - t0
    ok = worst_chi <= 1e-9 and worst_mom <= 1e-9 and elapsed < 60
    record_acceptance(2, ok, f"max|chi-oracle|={worst_chi:.1e} max|E[x^2]-oracle|={worst_mom:.1e} "
                             f"time={elapsed:.1f}s")
    assert ok


def test_criterion_03_small_noise(quartic):
    t0 = time.perf_counter()
    ms = [find_m_sigma(quartic, 1.0, s) for s in (0.5, 0.35, 0.2)]
    elapsed = time.perf_counter() - t0
    ok = abs(ms[-1] - quartic.a) <= 0.05 and ms[0] < ms[1] < ms[2] and elapsed < 30
    record_acceptance(3, ok, "m(0.5, 0.35, 0.2)=" + ", ".join(f"{m:.5f}" for m in ms) + f" time={elapsed:.1f}s")
    assert ok


def test_criterion_04_sigma_c_stability(quartic):
    vals = {}
    for tol in (1e-10, 1e-12):
        for n_scan in (2048, 4096):
            vals[(tol, n_scan)] = find_sigma_c(quartic, 1.0, QuadratureSpec(rel_tol=tol), n_scan)
    spread = max(vals.values()) - min(vals.values())
    ok = spread <= 1e-4
    record_acceptance(4, ok, f"sigma_c in [{min(vals.values()):.7f}, {max(vals.values()):.7f}] "
                             f"spread={spread:.1e}")
    assert ok


def test_criterion_05_end_to_end(quartic, report_ref, half_mean_start):
    t0 = time.perf_counter()
    start, rep = half_mean_start
    n = 5000
    details, ok = [], rep is not None
    floor = None
    if ok:
        floor = rep.threshold_mean - 5 * 0.5 / np.sqrt(n)
        for seed in (1, 2, 3):
            cfg = SimConfig(n_particles=n, dt=1e-3, t_final=30.0, seed=seed)
            rec, _ = simulate(start, quartic, 1.0, 0.5, cfg, report_ref)
            w2 = rec.final_distances()["nu_plus"]
            ok &= rec.nearest == "nu_plus" and w2 <= 0.05 and rec.min_mean >= floor
            details.append(f"seed{seed}:{rec.nearest} W2={w2:.3f} min_mean={rec.min_mean:.3f}")
        mirror = mirror_check(start.reflect(), quartic, 1.0, 0.5, m_sigma=report_ref.m_sigma)
        ok &= mirror is not None and mirror.predicted_limit == "nu_minus"
        rec, _ = simulate(start.reflect(), quartic, 1.0, 0.5, SimConfig(n_particles=n, seed=1), report_ref)
        ok &= rec.nearest == "nu_minus"
        details.append(f"mirror:{rec.nearest}")
    elapsed = time.perf_counter() - t0
    ok &= elapsed < 300
    delta = f"{rep.delta:.4f}" if rep else "none"
    floor_txt = f"{floor:.3f}" if floor is not None else "n/a"
    record_acceptance(5, ok, f"delta={delta} floor={floor_txt} " + " ".join(details) + f" time={elapsed:.0f}s")
    assert ok


def test_criterion_06_coupling_order(quartic, report_ref, half_mean_start):
    t0 = time.perf_counter()
    start, rep = half_mean_start
    violations, hits = 0, 0
    margin = np.inf
    for seed in range(20):
        cfg = SimConfig(n_particles=2000, dt=1e-3, t_final=10.0, seed=seed)
        traj, coupled = run_coupled(start, quartic, 1.0, 0.5, rep.delta, cfg, report_ref)
        violations += coupled.order_violations
        hits += traj.t0_hit is not None
        margin = min(margin, coupled.gate_margin)
    elapsed = time.perf_counter() - t0
    ok = violations == 0 and hits == 0 and elapsed < 300
    record_acceptance(6, ok, f"violations={violations} t0_hits={hits} min gate margin={margin:.3f} "
                             f"time={elapsed:.0f}s")
    assert ok


def _frozen_setup(vp, alpha, sigma):
    rep = analyze(vp, alpha, sigma, with_gap=False)
    start = steady_density(vp, alpha, sigma, 0.5 * rep.m_sigma, rep.nu_zero.grid)
    cond = search_delta(start, vp, alpha, sigma, m_sigma=rep.m_sigma)
    return rep, cond


def test_criterion_07_contraction(quartic):
    t0 = time.perf_counter()
    alpha, sigma = 2.0, 0.5
    rep, cond = _frozen_setup(quartic, alpha, sigma)
    thr = cond.threshold_mean
    target = steady_density(quartic, alpha, sigma, thr, rep.nu_zero.grid)
    # starts far from the target so W2(0) sits well above the Monte Carlo floor
    starts = {"nu_minus": rep.nu_minus, "gauss(2.5,0.2)": gaussian_density(
        rep.nu_zero.grid.extend_to(-4, 4)[0], 2.5, 0.2)}
    worst, ok = 0.0, cond.branch == "wasserstein"
    for label, mu0 in starts.items():
        cfg = SimConfig(n_particles=10_000, dt=1e-3, t_final=5.0, seed=7, record_every=50)
        times, w2, _ = run_frozen(mu0, quartic, alpha, sigma, thr, cfg, target)
        bound = 1.2 * w2[0] * np.exp(-(alpha - quartic.theta) * np.asarray(times))
        worst = max(worst, float(np.max(np.asarray(w2) / bound)))
    ok &= worst <= 1.0
    elapsed = time.perf_counter() - t0
    ok &= elapsed < 120
    record_acceptance(7, ok, f"threshold={thr:.4f} max W2(t)/bound={worst:.3f} time={elapsed:.0f}s")
    assert ok


def test_criterion_08_poincare_branch(quartic):
    t0 = time.perf_counter()
    alpha, sigma, n = 0.8, 0.6, 20_000
    rep, cond = _frozen_setup(quartic, alpha, sigma)
    thr = cond.threshold_mean
    gap = poincare_gap(quartic, alpha, sigma, thr)
    target = steady_density(quartic, alpha, sigma, thr, rep.nu_zero.grid)
    cfg = SimConfig(n_particles=n, dt=1e-3, t_final=12.0, seed=11, record_every=100)
    times, w2, _ = run_frozen(rep.nu_minus, quartic, alpha, sigma, thr, cfg, target)
    times, w2 = np.asarray(times), np.asarray(w2)
    tol = 5 * sigma / np.sqrt(n)
    rise = float(np.max(np.diff(w2)))
    window = (w2 >= 0.05) & (w2 <= 0.5)
    rate = -np.polyfit(times[window], np.log(w2[window]), 1)[0]
    rel = abs(rate - gap) / gap
    ok = cond.branch == "l2" and rise <= tol and rel <= 0.5 and window.sum() >= 5
    elapsed = time.perf_counter() - t0
    record_acceptance(8, ok, f"gap={gap:.4f} fitted rate={rate:.4f} rel.err={rel:.2f} "
                             f"max rise={rise:.1e} (tol {tol:.1e}) time={elapsed:.0f}s")
    assert ok


def test_criterion_09_fokker_planck(quartic, report_ref, half_mean_start):
    t0 = time.perf_counter()
    start, _ = half_mean_start
    L = report_ref.nu_zero.grid.x_max
    grid = GridSpec(-L, L, 1024)
    m = report_ref.m_sigma
    # stationarity of the discrete steady states under the full nonlinear step
    station = {}
    for label, mean_ in (("nu_zero", 0.0), ("nu_plus", m)):
        nu = steady_density(quartic, 1.0, 0.5, mean_, grid)
        _, d = fp_evolve(nu, quartic, 1.0, 0.5, FPConfig(grid, 1.0, record_every=10**9), track_free_energy=False)
        station[label] = d.max_step_change
    snaps, diag = fp_evolve(start, quartic, 1.0, 0.5, FPConfig(grid, 30.0, record_every=10**9), report_ref,
                            record_times=[5.0, 15.0])
    pde = {round(s.time, 9): s.mu for s in snaps}
    cfg = SimConfig(n_particles=5000, dt=1e-3, t_final=30.0, seed=1, record_every=5000)
    _, particle = simulate(start, quartic, 1.0, 0.5, cfg, report_ref, keep_positions=True)
    parts = {round(t, 9): x for t, x in particle}
    agree = {t: wasserstein2_samples(parts[t], pde[t]) for t in (5.0, 15.0, 30.0)}
    elapsed = time.perf_counter() - t0
    fe_steps = np.diff(diag.free_energy)
    ok = (diag.max_mass_drift <= 1e-12 and diag.max_free_energy_increase <= 1e-10
          and np.all(fe_steps <= 1e-10) and max(station.values()) <= 1e-10
          and max(agree.values()) <= 0.05 and elapsed < 300)
    record_acceptance(9, ok, f"mass drift/step={diag.max_mass_drift:.1e} "
                             f"max F increase/step={diag.max_free_energy_increase:.1e} "
                             f"stationarity nu0={station['nu_zero']:.1e} nu+={station['nu_plus']:.1e} "
                             "PDE-vs-particle W2 " + " ".join(f"t={t:g}:{v:.3f}" for t, v in agree.items())
                             + f" time={elapsed:.0f}s")
    assert ok


def test_criterion_10_distances(quartic):
    rng = np.random.default_rng(99)
    grid = GridSpec(-8.0, 8.0, 4096)

    def random_measure():
        k = rng.integers(1, 4)
        w = rng.dirichlet(np.ones(k))
        rho = sum(wi * np.exp(-0.5 * ((grid.centers - rng.uniform(-3, 3)) / rng.uniform(0.2, 1.2)) ** 2)
                  for wi in w)
        return GridMeasure.from_density(grid, rho)

    sym = tri = 0.0
    for _ in range(50):
        a, b, c = random_measure(), random_measure(), random_measure()
        ab = wasserstein2(a, b)
        sym = max(sym, abs(ab - wasserstein2(b, a)))
        tri = max(tri, ab - wasserstein2(a, c) - wasserstein2(c, b))
    g = GridSpec(-6.0, 6.0, 2400)
    base = gaussian_density(g, -1.0, 0.4)
    trans = 0.0
    # shifts are not multiples of the cell width
    for shift in (0.2513, 1.0071, 2.4969):
        trans = max(trans, abs(wasserstein2(base, gaussian_density(g, -1.0 + shift, 0.4)) - shift))
    nu = steady_density(quartic, 1.0, 0.5, 0.9)
    mu = steady_density(quartic, 1.0, 0.5, 0.6, nu.grid)
    self_d = l2_distance(nu, nu)
    ref = oracles.dense_l2(oracles.gibbs_pdf(QUARTIC, 1.0, 0.5, 0.6), oracles.gibbs_pdf(QUARTIC, 1.0, 0.5, 0.9),
                           nu.grid.x_min, nu.grid.x_max)
    l2_err = abs(l2_distance(mu, nu) - ref)
    ok = sym <= 1e-12 and tri <= 1e-10 and trans <= 1e-4 and self_d == 0.0 and l2_err <= 1e-6
    record_acceptance(10, ok, f"symmetry={sym:.1e} triangle excess={max(tri, 0):.1e} translate err={trans:.1e} "
                              f"l2 self={self_d:.1e} l2 oracle err={l2_err:.1e}")
    assert ok


DET_CONFIG = """\
potential.coeffs = [0, 0, -0.5, 0, 0.25]
model.alpha = 1.0
model.sigma = 0.5
init.kind = steady_family
init.m_fraction = 0.5
check.mirror = true
analyze.sigma_c = true
sim.n_particles = 2000
sim.t_final = 3
sim.dump_positions = true
sim.record_every = 1000
pde.n_cells = 256
pde.t_final = 3
pde.record_every = 2000
sweep.values = [0.2, 0.5, 0.8, -0.5]
"""

COMMANDS = [["analyze"], ["sigma-c"], ["check"], ["simulate", "particles"], ["simulate", "pde"], ["sweep"],
            ["sweep", "--set", "sweep.engine=pde", "--set", "sweep.family=gaussian"]]


def _run_all(base, cfg, threads, jobs):
    env = dict(os.environ)
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS", "NUMBA_NUM_THREADS"):
        env[var] = str(threads)
    for i, cmd in enumerate(COMMANDS):
        out = base / f"cmd{i}"
        r = subprocess.run([sys.executable, "-m", "granular_basin", *cmd, "--config", str(cfg), "--out", str(out),
                            "--seed", "12345", "--jobs", str(jobs)], env=env, capture_output=True, text=True)
        assert r.returncode == 0, r.stderr


def _same_tree(a, b):
    cmp = filecmp.dircmp(a, b)
    files = 0
    if cmp.left_only or cmp.right_only:
        return False, 0
    _, mismatch, errors = filecmp.cmpfiles(a, b, cmp.common_files, shallow=False)
    if mismatch or errors:
        return False, 0
    files += len(cmp.common_files)
    for sub in cmp.common_dirs:
        same, n = _same_tree(a / sub, b / sub)
        if not same:
            return False, 0
        files += n
    return True, files


def test_criterion_11_determinism(tmp_path):
    cfg = tmp_path / "det.cfg"
    cfg.write_text(DET_CONFIG)
    _run_all(tmp_path / "t1", cfg, threads=1, jobs=1)
    _run_all(tmp_path / "t8", cfg, threads=8, jobs=8)
    ok, n = _same_tree(tmp_path / "t1", tmp_path / "t8")
    record_acceptance(11, ok, f"{len(COMMANDS)} command runs, {n} files byte-identical across 1 vs 8 threads/jobs"
                      if ok else "outputs differ between 1 and 8 threads/jobs")
    assert ok
