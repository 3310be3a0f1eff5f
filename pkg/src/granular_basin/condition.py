"""Initial-condition criterion for convergence to the positive steady state.

Given an initial law ``mu0`` and ``delta`` in ``(0, m_sigma)``, with threshold
``t = m_sigma - delta``, the criterion requires

1. ``mean(mu0) > t``, and
2. ``chi(t) > D(mu0, mu_t)`` where ``D`` is the quadratic Wasserstein
   distance when ``alpha > theta`` and the chi-square-type L2 distance
   otherwise.

When both hold, the solution started from ``mu0`` converges to ``nu_plus``.
"""
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from .exceptions import DeltaOutOfRange, NoPositiveSteadyMean, SupportMismatch
from .measures import GridMeasure, l2_distance, mean, wasserstein2
from .steady_state import chi, find_m_sigma, steady_density, truncation_half_width

WASSERSTEIN = "wasserstein"
L2 = "l2"


@dataclass(frozen=True)
class DeltaSearchSpec:
    n_delta: int = 64

    def __post_init__(self):
        if self.n_delta < 8:
            raise ValueError("n_delta must be >= 8")

    def deltas(self, m_sigma):
        margin = m_sigma / 128.0
        return np.linspace(margin, m_sigma - margin, self.n_delta)


@dataclass(frozen=True)
class ConditionReport:
    delta: float
    m_sigma: float
    mean_init: float
    threshold_mean: float
    branch: str
    lhs: float
    rhs: float
    condition1_pass: bool
    condition2_pass: bool
    predicted_limit: str

    @property
    def passed(self):
        return self.condition1_pass and self.condition2_pass

    @property
    def margin(self):
        return min(self.mean_init - self.threshold_mean, self.lhs - self.rhs)

    def to_dict(self):
        return asdict(self)


def branch_for(vp, alpha):
    # equality falls in the L2 branch
    return WASSERSTEIN if alpha > vp.theta else L2


def _pad_to(mu0, lo, hi):
    grid, left = mu0.grid.extend_to(lo, hi)
    if grid is mu0.grid:
        return mu0
    rho = np.zeros(grid.n_cells)
    rho[left:left + mu0.grid.n_cells] = mu0.density
    return GridMeasure(grid, rho)


def _resolve_m_sigma(vp, alpha, sigma, m_sigma, spec):
    if m_sigma is None:
        m_sigma = find_m_sigma(vp, alpha, sigma, spec)
    if m_sigma is None:
        raise NoPositiveSteadyMean(f"sigma={sigma} is above critical: no positive steady state")
    return m_sigma


def _evaluate(mu0, vp, alpha, sigma, deltas, m_sigma, spec):
    thresholds = m_sigma - np.asarray(deltas, dtype=float)
    lhs = np.atleast_1d(chi(vp, alpha, sigma, thresholds, spec))
    L = max(truncation_half_width(vp, alpha, sigma, t, spec) for t in (thresholds.min(), thresholds.max()))
    work = _pad_to(mu0, -L, L)
    mean_init = mean(mu0)
    branch = branch_for(vp, alpha)
    reports = []
    for delta, t, left in zip(deltas, thresholds, lhs):
        target = steady_density(vp, alpha, sigma, t, work.grid, spec, check=False)
        if branch == WASSERSTEIN:
            rhs = wasserstein2(work, target)
        else:
            try:
                rhs = l2_distance(work, target)
            except SupportMismatch:
                rhs = float("inf")
        c1 = bool(mean_init > t)
        c2 = bool(left > rhs)
        reports.append(ConditionReport(
            delta=float(delta), m_sigma=float(m_sigma), mean_init=mean_init,
            threshold_mean=float(t), branch=branch, lhs=float(left), rhs=float(rhs),
            condition1_pass=c1, condition2_pass=c2,
            predicted_limit="nu_plus" if c1 and c2 else "undetermined",
        ))
    return reports


def check_condition(mu0, vp, alpha, sigma, delta, m_sigma=None, spec=None):
    """Evaluate both conditions at one ``delta``."""
    m_sigma = _resolve_m_sigma(vp, alpha, sigma, m_sigma, spec)
    if not 0 < delta < m_sigma:
        raise DeltaOutOfRange(f"delta={delta} outside (0, {m_sigma})")
    return _evaluate(mu0, vp, alpha, sigma, [delta], m_sigma, spec)[0]


def delta_table(mu0, vp, alpha, sigma, search=None, m_sigma=None, spec=None):
    """Condition reports for every delta of the search grid."""
    search = search or DeltaSearchSpec()
    m_sigma = _resolve_m_sigma(vp, alpha, sigma, m_sigma, spec)
    return _evaluate(mu0, vp, alpha, sigma, search.deltas(m_sigma), m_sigma, spec)


def best_report(reports) -> Optional[ConditionReport]:
    best = None
    for r in reports:
        if r.passed and (best is None or r.margin > best.margin):
            best = r
    return best


def search_delta(mu0, vp, alpha, sigma, search=None, m_sigma=None, spec=None):
    """Margin-maximizing passing report on the delta grid, or None."""
    return best_report(delta_table(mu0, vp, alpha, sigma, search, m_sigma, spec))


def mirror_check(mu0, vp, alpha, sigma, search=None, m_sigma=None, spec=None):
    """Same search applied to the reflected law; success predicts ``nu_minus``."""
    rep = search_delta(mu0.reflect(), vp, alpha, sigma, search, m_sigma, spec)
    if rep is None:
        return None
    return ConditionReport(**{**asdict(rep), "predicted_limit": "nu_minus"})
