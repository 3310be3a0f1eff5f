"""Probability densities tabulated on uniform one-dimensional grids.

A :class:`GridMeasure` stores a density per cell center; integrals use the
midpoint rule and the CDF is piecewise linear between cell edges (uniform
mass inside each cell). Distances between measures are computed from these
tabulations.
"""
import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.signal import fftconvolve

from .exceptions import AllSamplesOutsideGrid, DegenerateCDF, MeasureError, SupportMismatch

logger = logging.getLogger(__name__)

MASS_TOL = 1e-10
N_QUANTILES = 4096
QUANTILE_CLAMP = 1e-9
RATIO_FLOOR = 1e-300
SUPPORT_REL = 1e-16
SUPPORT_MASS_TOL = 1e-12


@dataclass(frozen=True)
class GridSpec:
    x_min: float
    x_max: float
    n_cells: int

    def __post_init__(self):
        if not self.x_min < self.x_max:
            raise MeasureError(f"need x_min < x_max, got [{self.x_min}, {self.x_max}]")
        if int(self.n_cells) < 16:
            raise MeasureError(f"n_cells must be >= 16, got {self.n_cells}")
        object.__setattr__(self, "x_min", float(self.x_min))
        object.__setattr__(self, "x_max", float(self.x_max))
        object.__setattr__(self, "n_cells", int(self.n_cells))

    @classmethod
    def symmetric(cls, half_width, n_cells):
        return cls(-float(half_width), float(half_width), n_cells)

    @property
    def dx(self):
        return (self.x_max - self.x_min) / self.n_cells

    @property
    def edges(self):
        return np.linspace(self.x_min, self.x_max, self.n_cells + 1)

    @property
    def centers(self):
        return self.x_min + (np.arange(self.n_cells) + 0.5) * self.dx

    def refine(self, factor=2):
        return GridSpec(self.x_min, self.x_max, self.n_cells * factor)

    def covers(self, lo, hi):
        return self.x_min <= lo and hi <= self.x_max

    def extend_to(self, lo, hi):
        """Smallest grid with the same spacing and alignment covering [lo, hi]."""
        dx = self.dx
        left = max(0, int(np.ceil((self.x_min - lo) / dx - 1e-9)))
        right = max(0, int(np.ceil((hi - self.x_max) / dx - 1e-9)))
        if left == 0 and right == 0:
            return self, 0
        return GridSpec(self.x_min - left * dx, self.x_max + right * dx, self.n_cells + left + right), left


@dataclass(frozen=True)
class GridMeasure:
    """Probability density on the cell centers of ``grid``."""

    grid: GridSpec
    density: np.ndarray = field(repr=False)

    def __post_init__(self):
        rho = np.array(self.density, dtype=float)
        if rho.shape != (self.grid.n_cells,):
            raise MeasureError(f"density has shape {rho.shape}, grid has {self.grid.n_cells} cells")
        if not np.all(np.isfinite(rho)):
            raise MeasureError("density contains non-finite values")
        if np.any(rho < 0):
            raise MeasureError("density must be nonnegative")
        mass = float(np.sum(rho) * self.grid.dx)
        if abs(mass - 1.0) > MASS_TOL:
            raise MeasureError(f"total mass {mass!r} differs from 1")
        rho.setflags(write=False)
        object.__setattr__(self, "density", rho)

    @classmethod
    def from_density(cls, grid, values):
        """Normalize nonnegative ``values`` to unit mass on ``grid``."""
        values = np.asarray(values, dtype=float)
        total = np.sum(values) * grid.dx
        if not total > 0:
            raise DegenerateCDF("density has no mass on the grid")
        return cls(grid, values / total)

    @property
    def x(self):
        return self.grid.centers

    @property
    def cell_mass(self):
        return self.density * self.grid.dx

    @property
    def mass(self):
        return float(np.sum(self.cell_mass))

    def cdf_edges(self):
        c = np.concatenate([[0.0], np.cumsum(self.cell_mass)])
        return c / c[-1]

    def cdf(self, x):
        return np.interp(x, self.grid.edges, self.cdf_edges())

    def quantile(self, u):
        """Inverse of the piecewise-linear CDF; flat stretches resolve to the left."""
        u = np.asarray(u, dtype=float)
        F = self.cdf_edges()
        mass = np.diff(F)
        cell = np.clip(np.searchsorted(F, u, side="left") - 1, 0, self.grid.n_cells - 1)
        # a zero-mass cell resolves to its left edge
        frac = np.divide(u - F[cell], mass[cell], out=np.zeros_like(u), where=mass[cell] > 0)
        return self.grid.edges[cell] + np.clip(frac, 0.0, 1.0) * self.grid.dx

    def reflect(self):
        """Law of -X."""
        g = self.grid
        return GridMeasure(GridSpec(-g.x_max, -g.x_min, g.n_cells), self.density[::-1])

    def resample(self, grid):
        """Linear interpolation onto ``grid``; out-of-range mass is dropped with a warning."""
        if grid == self.grid:
            return self
        vals = np.interp(grid.centers, self.x, self.density, left=0.0, right=0.0)
        lost = 1.0 - np.sum(vals) * grid.dx
        if abs(lost) > 1e-8:
            logger.warning("resampling changed mass by %.3g; renormalizing", lost)
        return GridMeasure.from_density(grid, vals)

    def to_csv(self, path):
        write_density_csv(path, self.x, self.density)


def mean(mu):
    return float(np.sum(mu.x * mu.density) * mu.grid.dx)


def moment(mu, k):
    if not 0 <= k <= 8:
        raise ValueError(f"moment order must be in [0, 8], got {k}")
    return float(np.sum(mu.x**k * mu.density) * mu.grid.dx)


def variance(mu):
    m = mean(mu)
    return float(np.sum((mu.x - m) ** 2 * mu.density) * mu.grid.dx)


def entropy(mu):
    rho = mu.density
    pos = rho > 0
    return float(np.sum(rho[pos] * np.log(rho[pos])) * mu.grid.dx)


def entropy_and_free_energy(mu, vp, alpha, sigma):
    """Return ``(entropy, free_energy)``.

    ``free_energy = sigma^2/2 * entropy + E[V] + alpha/2 * Var``, the last term
    being the quadratic interaction energy ``alpha/4 * E|X - X'|^2``.
    """
    h = entropy(mu)
    ev = float(np.sum(vp.V(mu.x) * mu.density) * mu.grid.dx)
    return h, 0.5 * sigma**2 * h + ev + 0.5 * alpha * variance(mu)


def quantile_nodes(n=N_QUANTILES):
    return np.clip((np.arange(n) + 0.5) / n, QUANTILE_CLAMP, 1.0 - QUANTILE_CLAMP)


def wasserstein2(mu, nu, n_quantiles=N_QUANTILES):
    """Quadratic Wasserstein distance via quantile functions on ``n_quantiles`` nodes."""
    u = quantile_nodes(n_quantiles)
    diff = mu.quantile(u) - nu.quantile(u)
    return float(np.sqrt(np.mean(diff * diff)))


def wasserstein2_samples(xs, nu):
    """W2 between the empirical law of ``xs`` and a grid measure.

    Sorted samples are paired with the grid quantiles at ranks (i - 1/2)/N.
    """
    xs = np.sort(np.asarray(xs, dtype=float))
    u = (np.arange(xs.size) + 0.5) / xs.size
    diff = xs - nu.quantile(u)
    return float(np.sqrt(np.mean(diff * diff)))


def wasserstein2_clouds(xs, ys):
    """W2 between two equal-size empirical measures (sorted pairing)."""
    xs = np.sort(np.asarray(xs, dtype=float))
    ys = np.sort(np.asarray(ys, dtype=float))
    if xs.shape != ys.shape:
        raise ValueError("sample clouds must have the same size")
    return float(np.sqrt(np.mean((xs - ys) ** 2)))


def l2_distance(mu, nu):
    """Chi-square-type distance ``||dmu/dnu - 1||_{L^2(nu)}``.

    ``mu`` is resampled onto ``nu``'s grid if needed. Cells where ``nu`` is
    below ``1e-16 * max(nu)`` are excluded; mass of ``mu`` there raises
    :class:`SupportMismatch`.
    """
    mu = mu.resample(nu.grid)
    rho_nu = nu.density
    keep = rho_nu >= SUPPORT_REL * rho_nu.max()
    stray = float(np.sum(mu.cell_mass[~keep]))
    if stray > SUPPORT_MASS_TOL:
        raise SupportMismatch(f"mass {stray:.3g} of mu lies where nu vanishes")
    ref = np.maximum(rho_nu[keep], RATIO_FLOOR)
    diff = mu.density[keep] - rho_nu[keep]
    return float(np.sqrt(np.sum(diff * diff / ref) * nu.grid.dx))


def silverman_bandwidth(xs):
    xs = np.asarray(xs, dtype=float)
    sd = np.std(xs, ddof=1) if xs.size > 1 else 0.0
    q75, q25 = np.percentile(xs, [75, 25])
    spread = min(sd, (q75 - q25) / 1.34) if q75 > q25 else sd
    return 0.9 * spread * xs.size ** (-0.2)


def from_samples(xs, grid, bandwidth=None):
    """Gaussian kernel density estimate tabulated on ``grid``.

    Samples are linearly binned onto the cell centers (which keeps the first
    moment exact) and convolved with a sampled Gaussian kernel. The default
    bandwidth is Silverman's rule, floored at one cell width.
    """
    xs = np.asarray(xs, dtype=float).ravel()
    if xs.size == 0:
        raise ValueError("no samples")
    if bandwidth is None:
        bandwidth = max(silverman_bandwidth(xs), grid.dx)
    if not bandwidth > 0:
        raise ValueError("bandwidth must be positive")
    pos = (xs - grid.x_min) / grid.dx - 0.5
    inside = (pos >= 0) & (pos <= grid.n_cells - 1)
    if not np.any(inside):
        raise AllSamplesOutsideGrid(f"all {xs.size} samples fall outside [{grid.x_min}, {grid.x_max}]")
    pos = pos[inside]
    lo = np.floor(pos).astype(np.int64)
    w_hi = pos - lo
    lo = np.minimum(lo, grid.n_cells - 2)
    w_hi = pos - lo
    counts = np.bincount(lo, weights=1.0 - w_hi, minlength=grid.n_cells)
    counts += np.bincount(lo + 1, weights=w_hi, minlength=grid.n_cells)
    half = int(np.ceil(6 * bandwidth / grid.dx))
    k = np.arange(-half, half + 1) * grid.dx
    kernel = np.exp(-0.5 * (k / bandwidth) ** 2)
    kernel /= kernel.sum()
    smooth = fftconvolve(counts, kernel, mode="same")
    return GridMeasure.from_density(grid, np.clip(smooth, 0.0, None))


def gaussian_density(grid, mean, sd):
    x = grid.centers
    return GridMeasure.from_density(grid, np.exp(-0.5 * ((x - mean) / sd) ** 2))


def write_density_csv(path, x, density):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "density"])
        for xi, di in zip(x, density):
            w.writerow([f"{xi:.17g}", f"{di:.17g}"])


def read_density_csv(path):
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"density file not found: {path}")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if data.shape[1] != 2:
        raise MeasureError(f"{path}: expected two columns (x, density)")
    order = np.argsort(data[:, 0])
    return data[order, 0], data[order, 1]
