"""Even polynomial double-well confinement potentials.

A potential is given by its monomial coefficients ``[c0, c1, ..., cd]``.
:func:`validate` certifies the structural hypotheses (even, vanishing at the
origin, exactly three critical points ``-a, 0, a``, convex beyond the wells)
and returns a :class:`ValidatedPotential` carrying the well location ``a``
and the nonconvexity constant ``theta = sup(-V'')``.
"""
from dataclasses import dataclass, field
from math import factorial

import numpy as np
from numpy.polynomial import polynomial as P

from . import _poly
from .exceptions import (
    DegreeTooLow,
    NegativeEvenDerivative,
    NonzeroAtOrigin,
    NotConvexAtInfinity,
    NotDoubleWell,
    NotEven,
    PotentialError,
)

ROOT_TOL = 1e-12


@dataclass(frozen=True)
class PolynomialPotential:
    """Unchecked monomial coefficients, ascending powers."""

    coefficients: tuple

    def __post_init__(self):
        coeffs = tuple(float(c) for c in self.coefficients)
        if not coeffs:
            raise PotentialError("coefficient list is empty")
        if not all(np.isfinite(coeffs)):
            raise PotentialError("coefficients must be finite")
        object.__setattr__(self, "coefficients", coeffs)

    @property
    def degree(self):
        return _poly.trim(self.coefficients).size - 1


@dataclass(frozen=True)
class EffectiveParams:
    alpha: float
    sigma: float
    m: float = 0.0

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        if not self.sigma > 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")


@dataclass(frozen=True)
class ValidatedPotential:
    base: PolynomialPotential
    a: float
    theta: float
    coeff_V2k_at_0: tuple
    _derivs: tuple = field(repr=False, compare=False, default=())

    def __post_init__(self):
        c = np.array(self.base.coefficients)
        d1 = P.polyder(c)
        d2 = P.polyder(d1)
        object.__setattr__(self, "_derivs", (c, d1, d2))

    @property
    def coefficients(self):
        return self.base.coefficients

    def poly(self, order=0):
        """Coefficient array of the ``order``-th derivative."""
        if order < 3:
            return self._derivs[order]
        return P.polyder(self._derivs[0], order)

    def V(self, x):
        return P.polyval(x, self._derivs[0])

    def dV(self, x):
        return P.polyval(x, self._derivs[1])

    def d2V(self, x):
        return P.polyval(x, self._derivs[2])

    def max_abs_curvature(self, lo, hi):
        """max |V''| on ``[lo, hi]`` (endpoints plus interior critical points)."""
        d2 = self._derivs[2]
        crit = _poly.real_roots(P.polyder(d2), lo, hi)
        pts = np.concatenate([[lo, hi], crit])
        return float(np.max(np.abs(P.polyval(pts, d2))))


def as_potential(p):
    if isinstance(p, ValidatedPotential):
        return p
    if isinstance(p, PolynomialPotential):
        return validate(p)
    return validate(PolynomialPotential(tuple(p)))


def validate(p):
    """Check the double-well hypotheses and return a certified potential.

    Parameters
    ----------
    p : PolynomialPotential or sequence of float
        Monomial coefficients in ascending powers.

    Raises
    ------
    NonzeroAtOrigin, DegreeTooLow, NotEven, NotConvexAtInfinity,
    NegativeEvenDerivative, NotDoubleWell
    """
    if not isinstance(p, PolynomialPotential):
        p = PolynomialPotential(tuple(p))
    c = np.array(p.coefficients)
    if c[-1] == 0:
        raise PotentialError("leading coefficient must be nonzero")
    d = c.size - 1
    if c[0] != 0:
        raise NonzeroAtOrigin(f"V(0) = {c[0]} must vanish")
    if d < 4:
        raise DegreeTooLow(f"degree {d} < 4")
    odd = [k for k in range(1, d + 1, 2) if c[k] != 0]
    if odd:
        raise NotEven(f"odd-power coefficients nonzero at powers {odd}")
    if c[-1] <= 0:
        raise NotConvexAtInfinity("leading coefficient must be positive")
    even_derivs = tuple(factorial(k) * c[k] for k in range(2, d + 1, 2))
    bad = [2 * (j + 1) for j, v in enumerate(even_derivs) if j >= 1 and v < 0]
    if bad:
        raise NegativeEvenDerivative(f"V^(k)(0) < 0 for k in {bad}")

    d1 = P.polyder(c)
    d2 = P.polyder(d1)
    d3 = P.polyder(d2)
    crit = _poly.real_roots(d1, tol=ROOT_TOL)
    if crit.size != 3:
        raise NotDoubleWell(f"V' has {crit.size} distinct real roots, expected 3")
    a = _poly.newton_polish(d1, float(crit[-1]))
    if not a > 0 or abs(crit[1]) > 1e-8 or abs(crit[0] + crit[2]) > 1e-8:
        raise NotDoubleWell(f"critical points {crit} are not of the form -a, 0, a")
    if not P.polyval(0.0, d2) < 0:
        raise NotDoubleWell("V''(0) must be negative")
    if not P.polyval(a, d2) > 0:
        raise NotDoubleWell("V''(a) must be positive")
    if _poly.count_roots(_poly.sturm_sequence(d2), a, np.inf) != 0:
        raise NotConvexAtInfinity("V'' vanishes somewhere beyond the well")

    # -V'' is a polynomial tending to -inf, so its sup sits at a root of V'''
    infl = _poly.real_roots(d3, tol=ROOT_TOL)
    theta = float(np.max(-P.polyval(infl, d2)))
    return ValidatedPotential(base=p, a=float(a), theta=theta, coeff_V2k_at_0=even_derivs)


def eval_derivs(vp, x, order):
    if order not in (0, 1, 2):
        raise ValueError(f"order must be 0, 1 or 2, got {order}")
    return P.polyval(x, vp.poly(order))


def effective_poly(vp, alpha, m):
    """Coefficients of W_m(x) = V(x) + alpha x^2 / 2 - alpha m x."""
    c = np.array(vp.coefficients, dtype=float)
    c[1] -= alpha * m
    c[2] += 0.5 * alpha
    return c


def effective_potential(vp, params, x):
    return P.polyval(x, effective_poly(vp, params.alpha, params.m))


def effective_force(vp, params, x):
    """Derivative of the effective potential, V'(x) + alpha (x - m)."""
    return vp.dV(x) + params.alpha * (np.asarray(x) - params.m)
