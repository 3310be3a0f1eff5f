"""Real-root isolation for univariate polynomials via Sturm sequences.

Coefficients are numpy arrays in ascending powers, as used by
``numpy.polynomial.polynomial``.
"""
import numpy as np
from numpy.polynomial import polynomial as P

_TRIM = 1e-12


def trim(c, tol=0.0):
    c = np.atleast_1d(np.asarray(c, dtype=float))
    scale = np.max(np.abs(c)) if c.size else 0.0
    n = c.size
    while n > 1 and abs(c[n - 1]) <= tol * scale:
        n -= 1
    return c[:n].copy()


def sturm_sequence(c):
    """Return the Sturm chain of ``c`` as a list of coefficient arrays."""
    p0 = trim(c)
    p1 = trim(P.polyder(p0))
    seq = [p0, p1]
    while seq[-1].size > 1:
        _, r = P.polydiv(seq[-2], seq[-1])
        # cancellation leaves tiny junk in the remainder
        ref = max(np.max(np.abs(seq[-2])), np.max(np.abs(seq[-1])))
        r = np.where(np.abs(r) <= _TRIM * ref, 0.0, r)
        r = trim(r)
        if not np.any(r):
            break
        seq.append(-r)
    return seq


def _sign_changes(values):
    s = np.sign(values)
    s = s[s != 0]
    return int(np.count_nonzero(s[1:] != s[:-1]))


def _signs_at(seq, x):
    if x == np.inf:
        return np.array([np.sign(p[-1]) for p in seq])
    if x == -np.inf:
        return np.array([np.sign(p[-1]) * (-1) ** (p.size - 1) for p in seq])
    return np.array([P.polyval(x, p) for p in seq])


def count_roots(seq, lo, hi):
    """Number of distinct real roots in ``(lo, hi]``."""
    return _sign_changes(_signs_at(seq, lo)) - _sign_changes(_signs_at(seq, hi))


def cauchy_bound(c):
    c = trim(c)
    return 1.0 + float(np.max(np.abs(c[:-1] / c[-1]))) if c.size > 1 else 1.0


def real_roots(c, lo=None, hi=None, tol=1e-12):
    """Distinct real roots of ``c`` in ``(lo, hi]``, sorted, located to ``tol``.

    Intervals are split until each holds exactly one root, then bisected on
    the Sturm count, which also works for roots of even multiplicity.
    """
    c = trim(c)
    if c.size == 1:
        return np.array([])
    seq = sturm_sequence(c)
    bound = cauchy_bound(c)
    lo = -bound if lo is None else max(lo, -bound)
    hi = bound if hi is None else min(hi, bound)
    roots = []
    stack = [(lo, hi, count_roots(seq, lo, hi))]
    while stack:
        a, b, n = stack.pop()
        if n == 0:
            continue
        if n == 1 or b - a <= tol:
            while b - a > tol * max(1.0, abs(a), abs(b)):
                mid = 0.5 * (a + b)
                if mid <= a or mid >= b:
                    break
                if count_roots(seq, a, mid) == 1:
                    b = mid
                else:
                    a = mid
            roots.append(0.5 * (a + b))
            continue
        mid = 0.5 * (a + b)
        stack.append((a, mid, count_roots(seq, a, mid)))
        stack.append((mid, b, count_roots(seq, mid, b)))
    return np.sort(np.array(roots))


def newton_polish(c, x, iters=4):
    dc = P.polyder(c)
    for _ in range(iters):
        d = P.polyval(x, dc)
        if d == 0:
            break
        step = P.polyval(x, c) / d
        x = x - step
        if abs(step) < 1e-16 * max(1.0, abs(x)):
            break
    return x
