"""Counter-based random streams.

Draw ``i`` of step ``k`` in stream ``s`` is a pure function of
``(seed, s, k, i)``: Philox is keyed by ``(seed, s)`` and its counter is set
to ``k`` before every batch. Results therefore do not depend on how many
draws were made before, which keeps runs reproducible under any schedule and
lets coupled processes share increments exactly.
"""
import numpy as np
from scipy.special import ndtri

INCREMENTS = 0
INITIAL = 1
SWEEP = 2

_MASK = (1 << 64) - 1


def uniforms(seed, step, n, stream=INCREMENTS):
    """``n`` uniforms in the open interval (0, 1)."""
    bg = np.random.Philox(key=[int(seed) & _MASK, int(stream)], counter=[0, int(step), 0, 0])
    raw = bg.random_raw(int(n))
    return ((raw >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53


def normals(seed, step, n, stream=INCREMENTS):
    """Standard normals by inverse-CDF transform of :func:`uniforms`."""
    return ndtri(uniforms(seed, step, n, stream))


def derive_seed(seed, index):
    """Independent child seed for row ``index`` of a sweep."""
    raw = np.random.Philox(key=[int(seed) & _MASK, SWEEP], counter=[0, int(index), 0, 0]).random_raw(1)
    return int(raw[0])
