"""Estimator-style wrappers.

Only the pieces that map onto ``fit``/``transform``/``predict`` get this
shape: fitting learns the steady-state structure of a potential at fixed
``(alpha, sigma)``; ``transform`` evaluates the self-consistency map;
``predict`` labels initial laws by their basin. The simulators and the
PDE solver stay plain functions.
"""
import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_means, check_measures, check_positive, check_potential
from .condition import DeltaSearchSpec, search_delta, mirror_check
from .fokker_planck import FPConfig, fp_evolve
from .measures import GridSpec
from .particles import SimConfig, simulate
from .steady_state import QuadratureSpec, analyze, chi, classify_limit


class SteadyStateAnalyzer(TransformerMixin, BaseEstimator):
    """Steady states of the granular media equation for one potential.

    Parameters
    ----------
    alpha, sigma : float
        Interaction strength and noise amplitude.
    rel_tol : float, default=1e-12
        Quadrature refinement tolerance.
    n_scan : int, default=2048
        Sign-scan points for the self-consistency map.
    n_cells : int, default=2048
        Cells of the shared density grid.
    with_gap : bool, default=True
        Also compute the Poincare gap at the positive steady mean.
    with_sigma_c : bool, default=False
        Also locate the critical noise level.

    Attributes
    ----------
    report_ : SteadyStateReport
    m_sigma_ : float or None
        Positive steady mean, None in the single-steady-state regime.
    n_steady_states_ : int
    """

    def __init__(self, alpha=1.0, sigma=0.5, rel_tol=1e-12, n_scan=2048, n_cells=2048,
                 with_gap=True, with_sigma_c=False):
        self.alpha = alpha
        self.sigma = sigma
        self.rel_tol = rel_tol
        self.n_scan = n_scan
        self.n_cells = n_cells
        self.with_gap = with_gap
        self.with_sigma_c = with_sigma_c

    def _spec(self):
        return QuadratureSpec(rel_tol=check_positive("rel_tol", self.rel_tol))

    def fit(self, X, y=None):
        """``X`` is the potential: coefficients in increasing degree or a validated potential."""
        self.potential_ = check_potential(X)
        alpha = check_positive("alpha", self.alpha)
        sigma = check_positive("sigma", self.sigma)
        self.report_ = analyze(self.potential_, alpha, sigma, self._spec(), self.n_scan, self.n_cells,
                               with_sigma_c=self.with_sigma_c, with_gap=self.with_gap)
        self.m_sigma_ = self.report_.m_sigma
        self.t_sigma_ = self.report_.t_sigma
        self.gap_ = self.report_.gap
        self.sigma_c_ = self.report_.sigma_c
        self.n_steady_states_ = 1 if self.report_.unique else 3
        return self

    def transform(self, X):
        """Self-consistency map at each mean in ``X``."""
        check_is_fitted(self, "report_")
        ms = check_means(X)
        return chi(self.potential_, self.alpha, self.sigma, ms.ravel(), self._spec()).reshape(ms.shape)

    def steady_states(self):
        check_is_fitted(self, "report_")
        return self.report_.steady_states()


class BasinCriterion(BaseEstimator):
    """Sufficient condition for an initial law to be attracted by a steady state.

    ``predict`` returns ``"nu_plus"`` or ``"nu_minus"`` when the condition
    (or, with ``mirror``, its reflection) holds for some ``delta``, and
    ``"none"`` otherwise. ``"none"`` means the criterion is silent, not that
    the law converges elsewhere.
    """

    def __init__(self, alpha=1.0, sigma=0.5, n_delta=64, mirror=True, rel_tol=1e-12):
        self.alpha = alpha
        self.sigma = sigma
        self.n_delta = n_delta
        self.mirror = mirror
        self.rel_tol = rel_tol

    def fit(self, X, y=None):
        self.analyzer_ = SteadyStateAnalyzer(self.alpha, self.sigma, self.rel_tol, with_gap=False).fit(X)
        self.potential_ = self.analyzer_.potential_
        self.m_sigma_ = self.analyzer_.m_sigma_
        return self

    def reports(self, X):
        """Best passing report per law (None when the criterion is silent)."""
        check_is_fitted(self, "analyzer_")
        spec = QuadratureSpec(rel_tol=self.rel_tol)
        search = DeltaSearchSpec(self.n_delta)
        out = []
        for mu in check_measures(X):
            rep = search_delta(mu, self.potential_, self.alpha, self.sigma, search, self.m_sigma_, spec)
            if rep is None and self.mirror:
                rep = mirror_check(mu, self.potential_, self.alpha, self.sigma, search, self.m_sigma_, spec)
            out.append(rep)
        return out

    def predict(self, X):
        return np.array([r.predicted_limit if r else "none" for r in self.reports(X)], dtype=object)


class LimitSimulator(BaseEstimator):
    """Long-time limit of the nonlinear dynamics, by particles or by the PDE.

    ``predict`` labels each initial law with the nearest steady state at
    ``t_final`` (``"undecided"`` without a 2x margin).
    """

    def __init__(self, alpha=1.0, sigma=0.5, engine="particles", n_particles=5000, dt=1e-3,
                 t_final=30.0, seed=0, n_cells=1024):
        self.alpha = alpha
        self.sigma = sigma
        self.engine = engine
        self.n_particles = n_particles
        self.dt = dt
        self.t_final = t_final
        self.seed = seed
        self.n_cells = n_cells

    def fit(self, X, y=None):
        if self.engine not in ("particles", "pde"):
            raise ValueError(f"engine must be 'particles' or 'pde', got {self.engine!r}")
        self.analyzer_ = SteadyStateAnalyzer(self.alpha, self.sigma, with_gap=False).fit(X)
        self.potential_ = self.analyzer_.potential_
        return self

    def final_distances(self, X):
        check_is_fitted(self, "analyzer_")
        rep = self.analyzer_.report_
        out = []
        for mu in check_measures(X):
            if self.engine == "particles":
                cfg = SimConfig(self.n_particles, self.dt, self.t_final, self.seed, record_every=1000)
                rec, _ = simulate(mu, self.potential_, self.alpha, self.sigma, cfg, rep)
                out.append(rec.final_distances())
            else:
                L = max(rep.nu_zero.grid.x_max, abs(mu.grid.x_min), abs(mu.grid.x_max))
                cfg = FPConfig(GridSpec(-L, L, self.n_cells), self.t_final, record_every=10**9)
                _, diag = fp_evolve(mu, self.potential_, self.alpha, self.sigma, cfg, rep,
                                    track_free_energy=False)
                out.append({"nu_plus": diag.w2_plus[-1], "nu_zero": diag.w2_zero[-1],
                            "nu_minus": diag.w2_minus[-1]})
        return out

    def predict(self, X):
        return np.array([classify_limit(d) for d in self.final_distances(X)], dtype=object)
