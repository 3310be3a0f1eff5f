import numpy as np
from hypothesis import given, settings, strategies as st
from scipy.linalg import eigh_tridiagonal

from granular_basin.spectral import eigvalsh_index, sturm_count


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 40), st.integers(0, 2**32 - 1))
def test_matches_lapack(n, seed):
    rng = np.random.default_rng(seed)
    d, e = rng.normal(size=n), rng.normal(size=n - 1)
    ref = eigh_tridiagonal(d, e, eigvals_only=True)
    for k in (0, n // 2, n - 1):
        assert abs(eigvalsh_index(d, e, k) - ref[k]) <= 1e-10 * max(1.0, abs(ref[k]))


def test_sturm_count_diagonal():
    d = np.array([1.0, 2.0, 3.0])
    e = np.zeros(2)
    assert sturm_count(d, e, 0.5) == 0
    assert sturm_count(d, e, 2.5) == 2
    assert sturm_count(d, e, 10.0) == 3
