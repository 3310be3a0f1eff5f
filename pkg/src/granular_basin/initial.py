"""Declarative initial measures resolved onto a grid."""
from dataclasses import dataclass, field

import numpy as np

from .measures import GridMeasure, MeasureError, read_density_csv
from .steady_state import steady_density

KINDS = ("steady_family", "gaussian", "mixture", "tabulated")


@dataclass(frozen=True)
class InitialMeasureSpec:
    """One of ``steady_family(m)``, ``gaussian(mean, sd)``,
    ``mixture(weights, components)`` or ``tabulated(file)``.

    For ``steady_family`` either ``m`` or ``m_fraction`` (times the positive
    steady mean) must be given; ``components`` of a mixture are
    ``(mean, sd)`` pairs.
    """

    kind: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise MeasureError(f"unknown initial measure kind {self.kind!r}; expected one of {KINDS}")

    def resolve(self, grid, vp=None, alpha=None, sigma=None, m_sigma=None):
        p = self.params
        x = grid.centers
        if self.kind == "gaussian":
            sd = float(p["sd"])
            if not sd > 0:
                raise MeasureError("gaussian sd must be positive")
            return GridMeasure.from_density(grid, np.exp(-0.5 * ((x - float(p["mean"])) / sd) ** 2))
        if self.kind == "mixture":
            weights = np.asarray(p["weights"], dtype=float)
            comps = np.asarray(p["components"], dtype=float).reshape(-1, 2)
            if weights.size != comps.shape[0] or np.any(weights < 0) or not weights.sum() > 0:
                raise MeasureError("mixture needs one nonnegative weight per (mean, sd) component")
            if np.any(comps[:, 1] <= 0):
                raise MeasureError("mixture sds must be positive")
            weights = weights / weights.sum()
            rho = sum(
                w * np.exp(-0.5 * ((x - mu) / sd) ** 2) / (sd * np.sqrt(2 * np.pi))
                for w, (mu, sd) in zip(weights, comps)
            )
            return GridMeasure.from_density(grid, rho)
        if self.kind == "tabulated":
            xs, dens = read_density_csv(p["file"])
            if np.any(dens < 0):
                raise MeasureError(f"{p['file']}: negative density values")
            return GridMeasure.from_density(grid, np.interp(x, xs, dens, left=0.0, right=0.0))
        # steady_family
        if vp is None or alpha is None or sigma is None:
            raise MeasureError("steady_family initial measure needs the potential, alpha and sigma")
        if "m" in p:
            m = float(p["m"])
        elif "m_fraction" in p:
            if m_sigma is None:
                raise MeasureError("m_fraction given but no positive steady mean exists")
            m = float(p["m_fraction"]) * m_sigma
        else:
            raise MeasureError("steady_family needs 'm' or 'm_fraction'")
        return steady_density(vp, alpha, sigma, m, grid, check=False)

    def support(self, m_sigma=None):
        """Interval ``(lo, hi)`` that must lie inside the working grid."""
        p = self.params
        if self.kind == "gaussian":
            mu, sd = float(p["mean"]), float(p["sd"])
            return mu - 9 * sd, mu + 9 * sd
        if self.kind == "mixture":
            comps = np.asarray(p["components"], dtype=float).reshape(-1, 2)
            return float(np.min(comps[:, 0] - 9 * comps[:, 1])), float(np.max(comps[:, 0] + 9 * comps[:, 1]))
        if self.kind == "tabulated":
            xs, dens = read_density_csv(p["file"])
            nz = np.nonzero(dens > 0)[0]
            if nz.size == 0:
                raise MeasureError(f"{p['file']}: density is identically zero")
            return float(xs[nz[0]]), float(xs[nz[-1]])
        m = float(p["m"]) if "m" in p else float(p.get("m_fraction", 0.0)) * (m_sigma or 0.0)
        return m, m
