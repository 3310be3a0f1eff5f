"""Input checks shared by the estimator layer."""
import numbers

import numpy as np
from sklearn.utils.validation import check_array

from .measures import GridMeasure
from .potential import ValidatedPotential, as_potential


def check_positive(name, value):
    if isinstance(value, bool) or not isinstance(value, numbers.Real) or not np.isfinite(value) or value <= 0:
        raise ValueError(f"{name} must be a positive finite number, got {value!r}")
    return float(value)


def check_potential(X):
    """Accept a validated potential, a coefficient sequence or a 1-row array."""
    if isinstance(X, ValidatedPotential):
        return X
    arr = check_array(X, ensure_2d=False, dtype=float)
    if arr.ndim == 2:
        if arr.shape[0] != 1:
            raise ValueError(f"expected a single coefficient row, got shape {arr.shape}")
        arr = arr[0]
    return as_potential(tuple(arr.tolist()))


def check_means(m):
    return check_array(np.atleast_1d(np.asarray(m, dtype=float)), ensure_2d=False, dtype=float)


def check_measures(X):
    """A single :class:`GridMeasure` or a sequence of them, as a list."""
    if isinstance(X, GridMeasure):
        return [X]
    out = list(X)
    for i, mu in enumerate(out):
        if not isinstance(mu, GridMeasure):
            raise TypeError(f"item {i} is {type(mu).__name__}, expected GridMeasure")
    return out
