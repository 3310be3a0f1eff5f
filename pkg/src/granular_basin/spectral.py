"""Eigenvalues of symmetric tridiagonal matrices by Sturm-count bisection."""
import numpy as np

from .exceptions import EigenSolveFailed


def sturm_count(diag, off, x):
    """Number of eigenvalues strictly below ``x`` (LDL^T pivot signs)."""
    count = 0
    q = diag[0] - x
    if q < 0:
        count += 1
    tiny = np.finfo(float).tiny
    for i in range(1, len(diag)):
        if q == 0:
            q = tiny
        q = diag[i] - x - off[i - 1] * off[i - 1] / q
        if q < 0:
            count += 1
    return count


def eigvalsh_index(diag, off, k, tol=1e-13):
    """The ``k``-th smallest eigenvalue (0-based) of the matrix with the given diagonals."""
    diag = np.asarray(diag, dtype=float)
    off = np.asarray(off, dtype=float)
    n = diag.size
    if not 0 <= k < n or off.size != n - 1:
        raise EigenSolveFailed(f"bad tridiagonal request k={k}, n={n}")
    if not (np.all(np.isfinite(diag)) and np.all(np.isfinite(off))):
        raise EigenSolveFailed("non-finite matrix entries")
    radius = np.zeros(n)
    radius[:-1] += np.abs(off)
    radius[1:] += np.abs(off)
    lo = float(np.min(diag - radius))
    hi = float(np.max(diag + radius))
    scale = max(abs(lo), abs(hi), 1.0)
    diag_l, off_l = diag.tolist(), off.tolist()
    for _ in range(200):
        if hi - lo <= tol * scale:
            break
        mid = 0.5 * (lo + hi)
        if sturm_count(diag_l, off_l, mid) > k:
            hi = mid
        else:
            lo = mid
    else:
        raise EigenSolveFailed("bisection did not converge")
    return 0.5 * (lo + hi)
