"""Random streams and Latin hypercube designs."""

import numpy as np


def make_rng(seed, *key):
    """Counter-based generator for ``seed`` and an integer stream ``key``.

    Distinct keys give independent streams, so a run can draw its design,
    its fit starts and each iteration's candidate pool without the draws
    depending on the order in which other streams were consumed.
    """
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


def as_bounds(bounds):
    b = np.asarray(bounds, dtype=float)
    if b.ndim != 2 or b.shape[1] != 2:
        raise ValueError(f"bounds must have shape (d, 2), got {b.shape}")
    if np.any(~(b[:, 1] > b[:, 0])):
        raise ValueError("every bound needs lo < hi")
    return b


def latin_hypercube(n, bounds, rng):
    """Latin hypercube sample of ``n`` points in a box.

    Each dimension is cut into ``n`` equal strata; every stratum holds
    exactly one point, jittered uniformly inside its cell, and the strata
    are permuted independently per dimension.

    Parameters
    ----------
    n : int
        Number of points, at least 1.
    bounds : array_like, shape (d, 2)
        Lower and upper limits per dimension.
    rng : numpy.random.Generator or int
        Random source. An integer is turned into a stream with ``make_rng``.

    Returns
    -------
    ndarray, shape (n, d)
    """
    if n < 1:
        raise ValueError("latin_hypercube needs n >= 1")
    b = as_bounds(bounds)
    if not isinstance(rng, np.random.Generator):
        rng = make_rng(rng)
    d = b.shape[0]
    u = rng.random((n, d))
    strata = np.column_stack([rng.permutation(n) for _ in range(d)])
    unit = (strata + u) / n
    # guard against (n - 1 + u) / n rounding up to exactly 1
    unit = np.minimum(unit, np.nextafter(1.0, 0.0))
    return b[:, 0] + unit * (b[:, 1] - b[:, 0])
