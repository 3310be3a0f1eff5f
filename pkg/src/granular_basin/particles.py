"""Euler-Maruyama particle approximation of the self-stabilizing diffusion.

``step_mkv`` advances N interacting particles whose drift uses the empirical
mean in place of the exact expectation; ``step_frozen`` replaces that mean
by a constant. Both draw their Gaussian increments from the same
counter-based streams, so two ensembles sharing a seed are synchronously
coupled.
"""
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import rng
from .exceptions import BlowUp, NoPositiveSteadyMean, StabilityGuard
from .measures import wasserstein2_samples
from .steady_state import classify_limit, steady_density, truncation_half_width

OVERFLOW = 1e6
ORDER_TOL = 1e-9
STABILITY = 0.5


@dataclass(frozen=True)
class SimConfig:
    n_particles: int = 10_000
    dt: float = 1e-3
    t_final: float = 30.0
    seed: int = 0
    record_every: int = 100

    def __post_init__(self):
        if self.n_particles < 2:
            raise ValueError("n_particles must be >= 2")
        if not self.dt > 0 or not self.t_final > 0:
            raise ValueError("dt and t_final must be positive")
        if self.record_every < 1:
            raise ValueError("record_every must be >= 1")

    @property
    def n_steps(self):
        return int(round(self.t_final / self.dt))


@dataclass(frozen=True)
class ParticleEnsemble:
    positions: np.ndarray = field(repr=False)
    time: float = 0.0
    step: int = 0
    seed: int = 0

    @property
    def mean(self):
        return float(np.mean(self.positions))

    @property
    def n(self):
        return self.positions.size


@dataclass
class TrajectoryRecord:
    times: list = field(default_factory=list)
    empirical_means: list = field(default_factory=list)
    w2_to_nu_plus: list = field(default_factory=list)
    w2_to_nu_minus: list = field(default_factory=list)
    w2_to_nu_zero: list = field(default_factory=list)
    t0_hit: Optional[float] = None
    nearest: Optional[str] = None
    min_mean: Optional[float] = None

    def final_distances(self):
        return {
            "nu_plus": self.w2_to_nu_plus[-1],
            "nu_minus": self.w2_to_nu_minus[-1],
            "nu_zero": self.w2_to_nu_zero[-1],
        }

    def rows(self):
        return list(zip(self.times, self.empirical_means, self.w2_to_nu_plus,
                        self.w2_to_nu_zero, self.w2_to_nu_minus))


@dataclass
class CoupledRecord:
    order_violations: int = 0
    max_violation: float = 0.0
    contraction_w2: list = field(default_factory=list)
    gate_margin: float = np.inf


def init_ensemble(mu0, cfg):
    """Inverse-CDF draws from the grid law ``mu0`` using the seed's initial stream."""
    u = rng.uniforms(cfg.seed, 0, cfg.n_particles, stream=rng.INITIAL)
    return ParticleEnsemble(mu0.quantile(u), 0.0, 0, cfg.seed)


def check_stability(vp, alpha, dt, lo, hi):
    """Reject ``dt`` when ``dt * (alpha + max|V''|)`` on [lo, hi] reaches 1/2."""
    stiff = alpha + vp.max_abs_curvature(lo, hi)
    if dt * stiff >= STABILITY:
        raise StabilityGuard(f"dt={dt} too large: dt*(alpha+max|V''|)={dt * stiff:.3g} on [{lo:.3g}, {hi:.3g}]")


def _working_window(vp, sigma, positions):
    r = max(float(np.max(np.abs(positions))), vp.a + 4.0 * sigma)
    return -1.1 * r, 1.1 * r


def _advance(x, force, sigma, dt, noise):
    new = x - force * dt + sigma * np.sqrt(dt) * noise
    if not np.all(np.abs(new) <= OVERFLOW):
        raise BlowUp("particle left the overflow guard; reduce dt")
    return new


def step_mkv(ens, vp, alpha, sigma, dt, noise=None):
    """One step of the interacting system; the mean is taken before the step."""
    x = ens.positions
    if noise is None:
        noise = rng.normals(ens.seed, ens.step, x.size)
    force = vp.dV(x) + alpha * (x - np.mean(x))
    return ParticleEnsemble(_advance(x, force, sigma, dt, noise), ens.time + dt, ens.step + 1, ens.seed)


def step_frozen(ens, vp, alpha, sigma, frozen_mean, dt, noise=None):
    """One step of the linear diffusion attracted to the constant ``frozen_mean``."""
    x = ens.positions
    if noise is None:
        noise = rng.normals(ens.seed, ens.step, x.size)
    force = vp.dV(x) + alpha * (x - frozen_mean)
    return ParticleEnsemble(_advance(x, force, sigma, dt, noise), ens.time + dt, ens.step + 1, ens.seed)


def _record(rec, t, x, steady):
    rec.times.append(t)
    rec.empirical_means.append(float(np.mean(x)))
    for label, lst in (("nu_plus", rec.w2_to_nu_plus), ("nu_minus", rec.w2_to_nu_minus),
                       ("nu_zero", rec.w2_to_nu_zero)):
        nu = steady.get(label)
        lst.append(wasserstein2_samples(x, nu) if nu is not None else float("nan"))


def trajectory_diagnostics(snapshots, steady, threshold=None):
    """Per-snapshot means and W2 distances to the steady states.

    Parameters
    ----------
    snapshots : iterable of (time, positions)
    steady : dict
        Label (``nu_plus``, ``nu_minus``, ``nu_zero``) to grid measure; missing
        labels give NaN columns.
    threshold : float, optional
        When given, ``t0_hit`` is the first snapshot time with mean <= threshold.
    """
    rec = TrajectoryRecord()
    for t, x in snapshots:
        _record(rec, t, x, steady)
        if threshold is not None and rec.t0_hit is None and rec.empirical_means[-1] <= threshold:
            rec.t0_hit = t
    rec.min_mean = min(rec.empirical_means) if rec.empirical_means else None
    if rec.times:
        rec.nearest = classify_limit(rec.final_distances())
    return rec


def _steady_map(report):
    return {} if report is None else dict(report.steady_states())


def simulate(mu0, vp, alpha, sigma, cfg, report=None, keep_positions=False):
    """Run the interacting particle system from ``mu0``.

    Returns ``(TrajectoryRecord, snapshots)``; ``snapshots`` holds
    ``(time, positions)`` pairs when ``keep_positions`` is set.
    """
    ens = init_ensemble(mu0, cfg)
    check_stability(vp, alpha, cfg.dt, *_working_window(vp, sigma, ens.positions))
    steady = _steady_map(report)
    rec = TrajectoryRecord()
    snaps = []
    min_mean = ens.mean
    _record(rec, 0.0, ens.positions, steady)
    if keep_positions:
        snaps.append((0.0, ens.positions.copy()))
    for k in range(1, cfg.n_steps + 1):
        ens = step_mkv(ens, vp, alpha, sigma, cfg.dt)
        min_mean = min(min_mean, ens.mean)
        if k % cfg.record_every == 0 or k == cfg.n_steps:
            t = k * cfg.dt
            _record(rec, t, ens.positions, steady)
            if keep_positions:
                snaps.append((t, ens.positions.copy()))
    rec.min_mean = min_mean
    rec.nearest = classify_limit(rec.final_distances()) if steady else None
    return rec, snaps


def run_frozen(mu0, vp, alpha, sigma, frozen_mean, cfg, target=None, keep_positions=False):
    """Frozen-mean diffusion from ``mu0``; W2 to its invariant law at every record step.

    Returns ``(times, w2, snapshots)``.
    """
    if target is None:
        target = steady_density(vp, alpha, sigma, frozen_mean)
    ens = init_ensemble(mu0, cfg)
    check_stability(vp, alpha, cfg.dt, *_working_window(vp, sigma, ens.positions))
    times, w2, snaps = [0.0], [wasserstein2_samples(ens.positions, target)], []
    if keep_positions:
        snaps.append((0.0, ens.positions.copy()))
    for k in range(1, cfg.n_steps + 1):
        ens = step_frozen(ens, vp, alpha, sigma, frozen_mean, cfg.dt)
        if k % cfg.record_every == 0 or k == cfg.n_steps:
            times.append(k * cfg.dt)
            w2.append(wasserstein2_samples(ens.positions, target))
            if keep_positions:
                snaps.append((k * cfg.dt, ens.positions.copy()))
    return times, w2, snaps


def run_coupled(mu0, vp, alpha, sigma, delta, cfg, report):
    """Interacting system X and frozen diffusion Y driven by the same noise.

    Y is attracted to ``m_sigma - delta``. Order violations ``X_i < Y_i - 1e-9``
    are counted only while the empirical mean of X stays at or above that
    threshold; ``t0_hit`` is the first step time where it does not.
    """
    if report is None or report.m_sigma is None:
        raise NoPositiveSteadyMean("coupled run needs a positive steady state")
    threshold = report.m_sigma - delta
    L = truncation_half_width(vp, alpha, sigma, threshold)
    target = steady_density(vp, alpha, sigma, threshold, report.nu_zero.grid
                            if report.nu_zero.grid.covers(-L, L) else None)
    x = init_ensemble(mu0, cfg)
    y = x
    check_stability(vp, alpha, cfg.dt, *_working_window(vp, sigma, x.positions))
    steady = _steady_map(report)
    traj = TrajectoryRecord()
    coupled = CoupledRecord()
    _record(traj, 0.0, x.positions, steady)
    coupled.contraction_w2.append((0.0, wasserstein2_samples(y.positions, target)))
    mean_x = x.mean
    coupled.gate_margin = mean_x - threshold
    if mean_x <= threshold:
        traj.t0_hit = 0.0
    min_mean = mean_x
    for k in range(1, cfg.n_steps + 1):
        noise = rng.normals(cfg.seed, x.step, cfg.n_particles)
        x_prev_mean = mean_x
        x = step_mkv(x, vp, alpha, sigma, cfg.dt, noise)
        y = step_frozen(y, vp, alpha, sigma, threshold, cfg.dt, noise)
        mean_x = x.mean
        min_mean = min(min_mean, mean_x)
        coupled.gate_margin = min(coupled.gate_margin, mean_x - threshold)
        if traj.t0_hit is None and mean_x <= threshold:
            traj.t0_hit = k * cfg.dt
        # order is guaranteed only up to the first crossing; this step used the pre-step mean
        if x_prev_mean >= threshold and (traj.t0_hit is None or traj.t0_hit == k * cfg.dt):
            gap = y.positions - x.positions
            bad = gap > ORDER_TOL
            if np.any(bad):
                coupled.order_violations += int(np.count_nonzero(bad))
                coupled.max_violation = max(coupled.max_violation, float(gap.max()))
        if k % cfg.record_every == 0 or k == cfg.n_steps:
            t = k * cfg.dt
            _record(traj, t, x.positions, steady)
            coupled.contraction_w2.append((t, wasserstein2_samples(y.positions, target)))
    traj.min_mean = min_mean
    traj.nearest = classify_limit(traj.final_distances())
    return traj, coupled
