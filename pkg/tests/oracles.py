"""Independent reference computations used only by the tests.

These deliberately avoid the package's quadrature, window and root-finding
code: windows come from a coarse brute-force scan and integrals from a
dense trapezoid rule.
"""
import numpy as np
from scipy.integrate import trapezoid

N_TRAP = 1_000_000


def _exponent(coeffs, alpha, sigma, m, x):
    V = np.polynomial.polynomial.polyval(x, coeffs)
    return -2.0 * (V + 0.5 * alpha * x * x - alpha * m * x) / sigma**2


def gibbs_window(coeffs, alpha, sigma, m, level=80.0, R=50.0):
    """Smallest interval outside which the log-density is ``level`` below its peak."""
    x = np.linspace(-R, R, 200_001)
    e = _exponent(coeffs, alpha, sigma, m, x)
    keep = np.nonzero(e >= e.max() - level)[0]
    dx = x[1] - x[0]
    return x[keep[0]] - 5 * dx, x[keep[-1]] + 5 * dx


def trapezoid_moment(coeffs, alpha, sigma, m, power=1, n=N_TRAP):
    lo, hi = gibbs_window(coeffs, alpha, sigma, m)
    x = np.linspace(lo, hi, n)
    e = _exponent(coeffs, alpha, sigma, m, x)
    w = np.exp(e - e.max())
    z = trapezoid(w, x)
    num = trapezoid(w * x**power, x)
    return num / z


def trapezoid_chi(coeffs, alpha, sigma, m):
    return trapezoid_moment(coeffs, alpha, sigma, m, 1) - m


def brute_fixed_point(coeffs, alpha, sigma, lo=1e-3, hi=3.0, n=3000):
    """Positive zero of the oracle chi: coarse scan, then plain bisection."""
    ms = np.linspace(lo, hi, n)
    vals = np.array([trapezoid_chi(coeffs, alpha, sigma, m) for m in ms[::50]])
    coarse = ms[::50]
    idx = np.nonzero((vals[:-1] > 0) & (vals[1:] <= 0))[0]
    if idx.size == 0:
        return None
    a, b = coarse[idx[0]], coarse[idx[0] + 1]
    for _ in range(60):
        c = 0.5 * (a + b)
        if trapezoid_chi(coeffs, alpha, sigma, c) > 0:
            a = c
        else:
            b = c
    return 0.5 * (a + b)


def dense_l2(mu_fn, nu_fn, lo, hi, n=400_001):
    """Chi-square distance of two callables, trapezoid on a dense grid."""
    x = np.linspace(lo, hi, n)
    mu, nu = mu_fn(x), nu_fn(x)
    f = (mu - nu) ** 2 / nu
    return float(np.sqrt(trapezoid(f, x)))


def gibbs_pdf(coeffs, alpha, sigma, m):
    """Normalized Gibbs density as a callable, normalized by trapezoid."""
    lo, hi = gibbs_window(coeffs, alpha, sigma, m)
    x = np.linspace(lo, hi, N_TRAP)
    e = _exponent(coeffs, alpha, sigma, m, x)
    shift = e.max()
    z = trapezoid(np.exp(e - shift), x)

    def pdf(y):
        return np.exp(_exponent(coeffs, alpha, sigma, m, y) - shift) / z

    return pdf
