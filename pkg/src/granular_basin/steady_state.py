"""The steady-state family of the granular media equation with quadratic interaction.

Every steady state is a Gibbs density ``mu_m ∝ exp(-2 W_m / sigma^2)`` with
``W_m(x) = V(x) + alpha x^2/2 - alpha m x``, and ``m`` must be a zero of the
self-consistency map ``chi(m) = mean(mu_m) - m``. Below the critical noise
``chi`` has exactly three zeros ``-m_sigma, 0, m_sigma``.
"""
import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from numpy.polynomial import polynomial as P

from . import _poly
from .exceptions import (
    BracketNotFound,
    DegenerateWeight,
    GridTooCoarse,
    NoInteriorMax,
    QuadratureNotConverged,
    ScanWindowTooSmall,
)
from .measures import GridMeasure, GridSpec, mean
from .potential import EffectiveParams, effective_poly
from .spectral import eigvalsh_index

logger = logging.getLogger(__name__)

TAIL_LEVEL = 1e-16
CHI_POSITIVE_TOL = 1e-10
N_SCAN = 2048
GAP_CELLS = 2048
DENSITY_CELLS = 2048


@dataclass(frozen=True)
class QuadratureSpec:
    panel_order: int = 16
    rel_tol: float = 1e-12
    truncation_factor: float = 1.2
    max_doublings: int = 14
    initial_panels: int = 32

    def __post_init__(self):
        if self.panel_order < 4:
            raise ValueError("panel_order must be >= 4")
        if not self.rel_tol > 0:
            raise ValueError("rel_tol must be positive")
        if not self.truncation_factor >= 1:
            raise ValueError("truncation_factor must be >= 1")


@dataclass
class SteadyStateReport:
    alpha: float
    sigma: float
    a: float
    theta: float
    m_sigma: Optional[float]
    t_sigma: Optional[float]
    sigma_c: Optional[float]
    nu_plus: Optional[GridMeasure] = field(default=None, repr=False)
    nu_zero: Optional[GridMeasure] = field(default=None, repr=False)
    nu_minus: Optional[GridMeasure] = field(default=None, repr=False)
    gap: Optional[float] = None

    @property
    def unique(self):
        return self.m_sigma is None

    def steady_states(self):
        """Mapping label -> density for the steady states that exist."""
        out = {"nu_zero": self.nu_zero}
        if self.m_sigma is not None:
            out["nu_plus"] = self.nu_plus
            out["nu_minus"] = self.nu_minus
        return out

    def to_dict(self):
        return {
            "alpha": self.alpha,
            "sigma": self.sigma,
            "a": self.a,
            "theta": self.theta,
            "unique_steady_state": self.unique,
            "m_sigma": self.m_sigma,
            "t_sigma": self.t_sigma,
            "sigma_c": self.sigma_c,
            "gap": self.gap,
            "nu_plus_mean": None if self.nu_plus is None else mean(self.nu_plus),
            "nu_zero_mean": None if self.nu_zero is None else mean(self.nu_zero),
            "nu_minus_mean": None if self.nu_minus is None else mean(self.nu_minus),
        }


# ---------------------------------------------------------------- windows


def _tail_gap(sigma):
    # W - min W beyond which exp(-2 (W - min W) / sigma^2) < TAIL_LEVEL
    return 0.5 * sigma**2 * np.log(1.0 / TAIL_LEVEL)


def effective_minimum(vp, alpha, m):
    w = effective_poly(vp, alpha, m)
    crit = _poly.real_roots(P.polyder(w))
    vals = P.polyval(crit, w)
    i = int(np.argmin(vals))
    return float(crit[i]), float(vals[i])


def truncation_half_width(vp, alpha, sigma, m, spec=None):
    """Half-width L of the symmetric window [-L, L] holding the Gibbs weight of ``mu_m``.

    L is the outermost point where the weight falls to ``1e-16`` of its peak,
    widened by ``spec.truncation_factor``.
    """
    spec = spec or QuadratureSpec()
    w = effective_poly(vp, alpha, m)
    _, wmin = effective_minimum(vp, alpha, m)
    shifted = w.copy()
    shifted[0] -= wmin + _tail_gap(sigma)
    roots = _poly.real_roots(shifted)
    return spec.truncation_factor * float(np.max(np.abs(roots)))


def _window_for(vp, alpha, sigma, ms, spec):
    ms = np.atleast_1d(ms)
    lo, hi = float(np.min(ms)), float(np.max(ms))
    probes = np.unique(np.concatenate([[lo, hi], np.linspace(lo, hi, 9)]))
    return max(truncation_half_width(vp, alpha, sigma, m, spec) for m in probes)


# ---------------------------------------------------------------- quadrature


def _gl_nodes(L, n_panels, order):
    x0, w0 = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(-L, L, n_panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    x = (mid[:, None] + half[:, None] * x0[None, :]).ravel()
    w = (half[:, None] * w0[None, :]).ravel()
    return x, w


def _gibbs_moments(vp, alpha, sigma, ms, powers, L, n_panels, order):
    """Normalized moments E_m[x^p] and E_m[|x|^p] for every m in ``ms``."""
    x, w = _gl_nodes(L, n_panels, order)
    u = vp.V(x) + 0.5 * alpha * x * x
    expo = u[None, :] - alpha * ms[:, None] * x[None, :]
    expo -= expo.min(axis=1, keepdims=True)
    weight = np.exp(-2.0 / sigma**2 * expo) * w[None, :]
    z = weight.sum(axis=1)
    if not np.all(np.isfinite(z)) or np.any(z <= 0):
        raise DegenerateWeight("Gibbs weight underflows on the whole window")
    out = np.empty((len(powers), ms.size))
    absout = np.empty_like(out)
    for i, p in enumerate(powers):
        xp = x**p
        out[i] = weight @ xp / z
        absout[i] = weight @ np.abs(xp) / z
    return out, absout


def gibbs_moments(vp, alpha, sigma, ms, powers=(1,), spec=None, L=None):
    """Moments of ``mu_m`` for an array of ``m`` on a shared window.

    Composite Gauss-Legendre with panels doubled until every moment changes
    by less than ``rel_tol`` times its absolute-moment scale.
    """
    spec = spec or QuadratureSpec()
    ms = np.atleast_1d(np.asarray(ms, dtype=float))
    if L is None:
        L = _window_for(vp, alpha, sigma, ms, spec)
    n = spec.initial_panels
    prev, _ = _gibbs_moments(vp, alpha, sigma, ms, powers, L, n, spec.panel_order)
    for _ in range(spec.max_doublings):
        n *= 2
        cur, scale = _gibbs_moments(vp, alpha, sigma, ms, powers, L, n, spec.panel_order)
        if np.all(np.abs(cur - prev) <= spec.rel_tol * np.maximum(scale, 1e-300)):
            return cur
        prev = cur
    raise QuadratureNotConverged(f"no convergence with {n} panels (sigma={sigma})")


def weighted_moment(vp, params, power, spec=None):
    """E[x^power] under the Gibbs density ``mu_m`` for ``params = (alpha, sigma, m)``."""
    if not 0 <= power <= 8:
        raise ValueError(f"power must be in [0, 8], got {power}")
    if power == 0:
        return 1.0
    return float(gibbs_moments(vp, params.alpha, params.sigma, [params.m], (power,), spec)[0, 0])


def chi(vp, alpha, sigma, m, spec=None):
    """Self-consistency map ``mean(mu_m) - m``; vectorized over ``m``."""
    EffectiveParams(alpha, sigma)
    ms = np.atleast_1d(np.asarray(m, dtype=float))
    vals = gibbs_moments(vp, alpha, sigma, ms, (1,), spec)[0] - ms
    return float(vals[0]) if np.ndim(m) == 0 else vals


def _chi_point(vp, alpha, sigma, m, spec):
    return float(gibbs_moments(vp, alpha, sigma, [m], (1,), spec)[0, 0] - m)


# ---------------------------------------------------------------- structure of chi


def default_m_max(vp, alpha, sigma):
    return vp.a + 5.0 * sigma + np.sqrt(alpha)


def scan_chi(vp, alpha, sigma, m_max, n_scan=N_SCAN, spec=None):
    ms = np.linspace(0.0, m_max, n_scan + 1)
    return ms, chi(vp, alpha, sigma, ms, spec)


def _golden_max(f, lo, hi, tol):
    g = (np.sqrt(5.0) - 1.0) / 2.0
    c = hi - g * (hi - lo)
    d = lo + g * (hi - lo)
    fc, fd = f(c), f(d)
    while hi - lo > tol:
        if fc > fd:
            hi, d, fd = d, c, fc
            c = hi - g * (hi - lo)
            fc = f(c)
        else:
            lo, c, fc = c, d, fd
            d = lo + g * (hi - lo)
            fd = f(d)
    return 0.5 * (lo + hi)


def _scan_with_growth(vp, alpha, sigma, n_scan, spec, m_max):
    m_max = default_m_max(vp, alpha, sigma) if m_max is None else m_max
    for _ in range(4):
        ms, vals = scan_chi(vp, alpha, sigma, m_max, n_scan, spec)
        if vals[-1] < 0 or vals.max() <= CHI_POSITIVE_TOL:
            return ms, vals
        m_max *= 2.0
    raise ScanWindowTooSmall(f"chi still positive at m_max={m_max / 2}")


def chi_slope_at_zero(vp, alpha, sigma, spec=None):
    """``chi'(0) = (2 alpha / sigma^2) Var(mu_0) - 1``."""
    second = gibbs_moments(vp, alpha, sigma, [0.0], (2,), spec)[0, 0]
    return 2.0 * alpha * second / sigma**2 - 1.0


def has_positive_root(vp, alpha, sigma, spec=None, n_scan=N_SCAN, m_max=None):
    # chi is odd and eventually negative, so a positive slope at 0 forces a
    # positive zero even when the bump is narrower than the scan step
    if chi_slope_at_zero(vp, alpha, sigma, spec) > 0:
        return True
    _, vals = _scan_with_growth(vp, alpha, sigma, n_scan, spec, m_max)
    return bool(vals.max() > CHI_POSITIVE_TOL)


def find_m_sigma(vp, alpha, sigma, spec=None, n_scan=N_SCAN, m_max=None, tol=1e-10):
    """Positive zero of ``chi``, or None when only the symmetric steady state exists."""
    spec = spec or QuadratureSpec()
    ms, vals = _scan_with_growth(vp, alpha, sigma, n_scan, spec, m_max)
    if vals.max() <= CHI_POSITIVE_TOL:
        return None
    pos = np.nonzero(vals > 0)[0]
    j = pos[-1]
    lo, hi = ms[j], ms[j + 1]
    f = lambda m: _chi_point(vp, alpha, sigma, m, spec)  # noqa: E731
    while hi - lo > 1e-6:
        mid = 0.5 * (lo + hi)
        if f(mid) > 0:
            lo = mid
        else:
            hi = mid
    x = 0.5 * (lo + hi)
    h = 1e-6
    for _ in range(20):
        fx = f(x)
        slope = (f(x + h) - f(x - h)) / (2 * h)
        step = fx / slope if slope != 0 else 0.0
        new = x - step
        if not lo - 1e-6 <= new <= hi + 1e-6:
            break
        x = new
        if abs(step) < tol:
            break
    return float(x)


def find_t_sigma(vp, alpha, sigma, spec=None, n_scan=N_SCAN, m_max=None, tol=1e-9):
    """Location of the interior maximum of ``chi`` on (0, m_max)."""
    spec = spec or QuadratureSpec()
    ms, vals = _scan_with_growth(vp, alpha, sigma, n_scan, spec, m_max)
    j = int(np.argmax(vals))
    if j == 0 or vals[j] <= 0:
        raise NoInteriorMax("chi is not increasing near 0")
    lo, hi = ms[j - 1], ms[min(j + 1, ms.size - 1)]
    return float(_golden_max(lambda m: _chi_point(vp, alpha, sigma, m, spec), lo, hi, tol))


def count_zeros(vp, alpha, sigma, spec=None, n_scan=N_SCAN, m_max=None):
    """Sign-scan count of the zeros of ``chi`` on [-m_max, m_max]."""
    m_max = default_m_max(vp, alpha, sigma) if m_max is None else m_max
    ms = np.linspace(0.0, m_max, n_scan + 1)[1:]
    vals = chi(vp, alpha, sigma, ms, spec)
    s = np.sign(np.where(np.abs(vals) <= CHI_POSITIVE_TOL, 0.0, vals))
    s = s[s != 0]
    positive = int(np.count_nonzero(s[1:] != s[:-1])) if s.size else 0
    # zero at the origin plus mirror images
    return 1 + 2 * positive


def find_sigma_c(vp, alpha, spec=None, n_scan=N_SCAN, width=1e-6, bracket=None):
    """Critical noise separating one steady state from three, by bisection."""
    spec = spec or QuadratureSpec()
    if bracket is None:
        lo, hi = 0.05, 4.0 * np.sqrt(vp.a * alpha) + 1.0
    else:
        lo, hi = bracket
    pred = lambda s: has_positive_root(vp, alpha, s, spec, n_scan)  # noqa: E731
    for _ in range(6):
        if pred(lo):
            break
        lo /= 2.0
    else:
        raise BracketNotFound("no three-state regime found at small sigma")
    for _ in range(6):
        if not pred(hi):
            break
        hi *= 2.0
    else:
        raise BracketNotFound("no unique-state regime found at large sigma")
    while hi - lo > width:
        mid = 0.5 * (lo + hi)
        if pred(mid):
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


# ---------------------------------------------------------------- densities


def _unnormalized(vp, alpha, sigma, m, x):
    expo = vp.V(x) + 0.5 * alpha * x * x - alpha * m * x
    return np.exp(-2.0 / sigma**2 * (expo - expo.min()))


def steady_density(vp, alpha, sigma, m, grid=None, spec=None, check=True):
    """The Gibbs density ``mu_m`` tabulated on ``grid`` (default: its truncation window)."""
    if grid is None:
        grid = GridSpec.symmetric(truncation_half_width(vp, alpha, sigma, m, spec), DENSITY_CELLS)
    vals = _unnormalized(vp, alpha, sigma, m, grid.centers)
    if check:
        fine = grid.refine(2)
        fv = _unnormalized(vp, alpha, sigma, m, fine.centers)
        shift = np.min(vp.V(grid.centers) + 0.5 * alpha * grid.centers**2 - alpha * m * grid.centers)
        shift_f = np.min(vp.V(fine.centers) + 0.5 * alpha * fine.centers**2 - alpha * m * fine.centers)
        z = np.sum(vals) * grid.dx
        zf = np.sum(fv) * fine.dx * np.exp(-2.0 / sigma**2 * (shift_f - shift))
        if abs(zf - z) > 1e-8 * abs(zf):
            raise GridTooCoarse(f"normalization changes by {abs(zf - z) / zf:.2e} under refinement")
    return GridMeasure.from_density(grid, vals)


def common_grid(vp, alpha, sigma, ms, n_cells=DENSITY_CELLS, spec=None):
    L = max(truncation_half_width(vp, alpha, sigma, m, spec) for m in ms)
    return GridSpec.symmetric(L, n_cells)


# ---------------------------------------------------------------- spectral gap


def frozen_generator(vp, alpha, sigma, m, grid):
    """Symmetric tridiagonal form of ``-(sigma^2/2 d^2 - W_m' d)`` in L^2(mu_m).

    Flux form with no-flux boundaries; interface weights are geometric means
    of neighbouring cell weights, so the Gibbs vector is exactly invariant.
    """
    x = grid.centers
    phi = 2.0 / sigma**2 * (vp.V(x) + 0.5 * alpha * x * x - alpha * m * x)
    k = 0.5 * sigma**2 / grid.dx**2
    half = 0.5 * np.diff(phi)
    # sqrt(mu_{i+1}/mu_i) = exp(-half), sqrt(mu_i/mu_{i+1}) = exp(half)
    diag = np.zeros(grid.n_cells)
    diag[:-1] += k * np.exp(-half)
    diag[1:] += k * np.exp(half)
    off = -k * np.ones(grid.n_cells - 1)
    return diag, off


def poincare_gap(vp, alpha, sigma, m, grid=None, spec=None):
    """Smallest nonzero eigenvalue of the discretized frozen generator."""
    if grid is None:
        grid = GridSpec.symmetric(truncation_half_width(vp, alpha, sigma, m, spec), GAP_CELLS)
    diag, off = frozen_generator(vp, alpha, sigma, m, grid)
    return eigvalsh_index(diag, off, 1)


# ---------------------------------------------------------------- report


def analyze(vp, alpha, sigma, spec=None, n_scan=N_SCAN, n_cells=DENSITY_CELLS,
            with_sigma_c=False, with_gap=True):
    """Compute the full :class:`SteadyStateReport` at ``(alpha, sigma)``."""
    EffectiveParams(alpha, sigma)
    spec = spec or QuadratureSpec()
    m_sigma = find_m_sigma(vp, alpha, sigma, spec, n_scan)
    t_sigma = find_t_sigma(vp, alpha, sigma, spec, n_scan) if m_sigma is not None else None
    sigma_c = find_sigma_c(vp, alpha, spec, n_scan) if with_sigma_c else None
    ms = [0.0] if m_sigma is None else [-m_sigma, 0.0, m_sigma]
    grid = common_grid(vp, alpha, sigma, ms, n_cells, spec)
    nu_zero = steady_density(vp, alpha, sigma, 0.0, grid, spec)
    nu_plus = nu_minus = None
    if m_sigma is not None:
        nu_plus = steady_density(vp, alpha, sigma, m_sigma, grid, spec)
        nu_minus = nu_plus.reflect()
    gap = None
    if with_gap:
        gap = poincare_gap(vp, alpha, sigma, m_sigma if m_sigma is not None else 0.0, spec=spec)
    return SteadyStateReport(
        alpha=float(alpha), sigma=float(sigma), a=vp.a, theta=vp.theta,
        m_sigma=m_sigma, t_sigma=t_sigma, sigma_c=sigma_c,
        nu_plus=nu_plus, nu_zero=nu_zero, nu_minus=nu_minus, gap=gap,
    )


LIMIT_LABELS = ("nu_plus", "nu_minus", "nu_zero", "undecided")


def classify_limit(distances, ratio=2.0):
    """Nearest steady state, or ``"undecided"`` unless the runner-up is ``ratio`` times farther.

    ``distances`` maps labels to W2 distances; NaN entries are ignored.
    """
    items = sorted((d, k) for k, d in distances.items() if d is not None and np.isfinite(d))
    if not items:
        return "undecided"
    if len(items) == 1 or items[1][0] >= ratio * items[0][0]:
        return items[0][1]
    return "undecided"
