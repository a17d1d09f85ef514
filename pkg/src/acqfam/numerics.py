"""Standard-normal helpers and moments of the improvement function.

All functions accept scalars or numpy arrays and broadcast elementwise.
"""

from math import comb, factorial, pi, sqrt

import numpy as np
from scipy.special import ndtr

_INV_SQRT_2PI = 1.0 / sqrt(2.0 * pi)

#: Beyond this standardized gap the moments are replaced by their limits.
Z_SATURATION = 40.0

# Below this gap the forward sum cancels badly; the backward recurrence is used.
_Z_BACKWARD = -3.0
_BACKWARD_TERMS = 60


def std_normal_pdf(t):
    """Standard normal density."""
    t = np.asarray(t, dtype=float)
    return _INV_SQRT_2PI * np.exp(-0.5 * t * t)


def std_normal_cdf(t):
    """Standard normal distribution function.

    Evaluated through the complementary error function so the lower tail
    keeps full relative precision (absolute error well below 1e-12).
    """
    return ndtr(np.asarray(t, dtype=float))


def standardized_gap(fmin_minus_mu, sigma):
    """Return ``z = (fmin - mu) / sigma``.

    Raises
    ------
    ValueError
        If any ``sigma`` is not strictly positive. The ``sigma -> 0`` limit
        has to be handled by the caller.
    """
    sigma = np.asarray(sigma, dtype=float)
    if np.any(~(sigma > 0)):
        raise ValueError("standardized gap needs sigma > 0")
    return np.asarray(fmin_minus_mu, dtype=float) / sigma


def _check_power(w):
    if isinstance(w, (bool, np.bool_)):
        raise ValueError(f"improvement power must be an integer >= 0, got {w!r}")
    try:
        ok = int(w) == w and w >= 0
    except (TypeError, ValueError):
        ok = False
    if not ok:
        raise ValueError(f"improvement power must be an integer >= 0, got {w!r}")
    return int(w)


def _normal_moments(w):
    # E[T^k] for T ~ N(0, 1): zero for odd k, (k-1)!! for even k.
    out = []
    for k in range(w + 1):
        if k % 2:
            out.append(0.0)
        else:
            out.append(float(np.prod(np.arange(k - 1, 0, -2))) if k else 1.0)
    return out


def saturated_moment(z, w):
    """Standardized ``E[(z - T)^w]`` without truncation at zero.

    This is the value of the standardized improvement moment once
    ``Phi(z)`` is indistinguishable from one.
    """
    z = np.asarray(z, dtype=float)
    mom = _normal_moments(w)
    total = np.zeros_like(z)
    for k in range(w + 1):
        if mom[k]:
            total = total + comb(w, k) * z ** (w - k) * mom[k]
    return total


def _lower_tail_moment(z, w):
    # Standardized E[(z - T)_+^w] for z < 0. These are w! * Hh_w(-z), the
    # repeated normal tail integrals, which satisfy
    #   Hh_(m) = x Hh_(m+1) + (m + 2) Hh_(m+2),  x = -z.
    # They are the minimal solution, so running the recurrence downward from
    # an arbitrary start and normalising by Hh_0 = Phi(z) is stable.
    x = -z
    f_next = np.zeros_like(x)
    f_cur = np.ones_like(x)
    keep = None
    for m in range(w + _BACKWARD_TERMS - 1, -1, -1):
        f_next, f_cur = f_cur, x * f_cur + (m + 2) * f_next
        if m == w:
            keep = f_cur
    return factorial(w) * keep / f_cur * std_normal_cdf(z)


def improvement_moment(z, sigma, w):
    """Expected power of the improvement, ``E[I^w]``.

    Here ``I = max(0, fmin - Y)`` with ``Y ~ N(mu, sigma^2)`` and
    ``z = (fmin - mu) / sigma``. The computation uses the power-EI recursion

        E[I^w] = sigma^w * sum_k C(w, k) z^(w-k) (-1)^k T_k

    with ``T_0 = Phi(z)``, ``T_1 = -phi(z)`` and
    ``T_k = -z^(k-1) phi(z) + (k-1) T_(k-2)``. In the lower tail
    (``z < -3``) the alternating sum loses digits, so the same quantity is
    obtained there from a backward recurrence on repeated tail integrals.

    Parameters
    ----------
    z : float or ndarray
        Standardized improvement gap.
    sigma : float or ndarray
        Predictive standard deviation, strictly positive.
    w : int
        Non-negative integer power. ``w=0`` gives the probability of
        improvement, ``w=1`` the expected improvement.

    Returns
    -------
    float or ndarray
        Non-negative moment, broadcast over ``z`` and ``sigma``.
    """
    w = _check_power(w)
    sigma = np.asarray(sigma, dtype=float)
    if np.any(~(sigma > 0)):
        raise ValueError("improvement_moment needs sigma > 0")
    z = np.asarray(z, dtype=float)
    if np.any(~np.isfinite(z)):
        raise ValueError("standardized gap must be finite")

    pdf = std_normal_pdf(z)
    terms = [std_normal_cdf(z), -pdf]
    for k in range(2, w + 1):
        terms.append(-(z ** (k - 1)) * pdf + (k - 1) * terms[k - 2])

    total = np.zeros_like(z)
    for k in range(w + 1):
        sign = -1.0 if k % 2 else 1.0
        total = total + comb(w, k) * z ** (w - k) * sign * terms[k]

    low = z < _Z_BACKWARD
    if np.any(low) and w > 0:
        zl = np.where(low, np.maximum(z, -Z_SATURATION - 1.0), _Z_BACKWARD)
        total = np.where(low, _lower_tail_moment(zl, w), total)

    total = np.where(z > Z_SATURATION, saturated_moment(z, w), total)
    total = np.where(z < -Z_SATURATION, 0.0, total)
    total = np.maximum(total, 0.0)
    out = sigma**w * total
    return out if out.ndim else float(out)


def improvement_variance(z, sigma):
    """Variance of the improvement, ``E[I^2] - E[I]^2``.

    For ``z > 0`` the two moments are both close to ``sigma^2 z^2``; the
    difference is rewritten in terms of the upper tail ``Q = Phi(-z)`` so
    that only small quantities are subtracted from one.
    """
    sigma = np.asarray(sigma, dtype=float)
    if np.any(~(sigma > 0)):
        raise ValueError("improvement_variance needs sigma > 0")
    z = np.asarray(z, dtype=float)
    m1 = improvement_moment(z, 1.0, 1)
    m2 = improvement_moment(z, 1.0, 2)
    direct = m2 - np.asarray(m1) ** 2

    zp = np.where(z > 0, z, 0.0)
    q = std_normal_cdf(-zp)
    pdf = std_normal_pdf(zp)
    upper = (
        1.0 + (zp * zp - 1.0) * q - zp * pdf - (zp * q) ** 2 + 2.0 * zp * pdf * q - pdf * pdf
    )
    var = np.where(z > 0, upper, direct)
    var = np.where(z > Z_SATURATION, 1.0, var)
    out = sigma**2 * np.maximum(var, 0.0)
    return out if out.ndim else float(out)
