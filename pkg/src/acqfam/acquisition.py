"""Improvement statistics and the improvement-based acquisition family.

A family member is selected by ``(u, v, w, beta)`` and scores a candidate as

    a(x) = E[I^w] / VI^u + beta * VI^v

where ``I = max(0, fmin - Y(x))`` and ``VI = Var(I)``. Named members:

=====  ===  ===  ===  =====
name   u    v    w    beta
=====  ===  ===  ===  =====
PI     0    -    0    0
EI     0    -    1    0
PEI    0    -    2    0
SEI    1/2  -    1    0
VEI    0    1    1    -xi/2 (xi = 1)
UEI    0    1/2  1    gamma (gamma = 2)
=====  ===  ===  ===  =====
"""

from dataclasses import dataclass
import math

import numpy as np

from .numerics import improvement_moment, improvement_variance

#: Smallest VI used as a divisor; it only guards against VI = 0 exactly.
VI_FLOOR = float(np.finfo(float).tiny)
_MAX = float(np.finfo(float).max)


@dataclass(frozen=True)
class FamilyParams:
    u: float = 0.0
    v: float = 0.0
    w: int = 1
    beta: float = 0.0

    def __post_init__(self):
        for name in ("u", "v", "beta"):
            val = float(getattr(self, name))
            if not math.isfinite(val):
                raise ValueError(f"{name} must be finite")
            object.__setattr__(self, name, val + 0.0)  # normalises -0.0
        if self.u < 0 or self.v < 0:
            raise ValueError("u and v must be non-negative")
        w = self.w
        if isinstance(w, bool) or not float(w).is_integer() or w < 0:
            raise ValueError(f"w must be a non-negative integer, got {w!r}")
        object.__setattr__(self, "w", int(w))

    @classmethod
    def ei(cls):
        return cls(u=0.0, v=0.0, w=1, beta=0.0)

    @classmethod
    def pi(cls):
        return cls(u=0.0, v=0.0, w=0, beta=0.0)

    @classmethod
    def pei(cls, w=2):
        return cls(u=0.0, v=0.0, w=w, beta=0.0)

    @classmethod
    def sei(cls):
        return cls(u=0.5, v=0.0, w=1, beta=0.0)

    @classmethod
    def vei(cls, xi=1.0):
        """EI minus ``xi/2`` times the improvement variance."""
        if not xi > 0:
            raise ValueError("xi must be positive")
        return cls(u=0.0, v=1.0, w=1, beta=-xi / 2)

    @classmethod
    def uei(cls, gamma=2.0):
        """EI plus ``gamma`` times the improvement standard deviation."""
        if not gamma > 0:
            raise ValueError("gamma must be positive")
        return cls(u=0.0, v=0.5, w=1, beta=gamma)

    @property
    def key(self):
        """Canonical text form ``u=..,v=..,w=..,beta=..``."""
        return f"u={self.u:g},v={self.v:g},w={self.w},beta={self.beta:g}"

    @property
    def slug(self):
        """Filesystem-friendly form ``u0_v0.5_w1_b2``."""
        return f"u{self.u:g}_v{self.v:g}_w{self.w}_b{self.beta:g}"

    @classmethod
    def parse(cls, text):
        """Read a preset name or a ``u,v,w,beta`` quadruple."""
        text = text.strip()
        if "," not in text:
            return preset(text)
        parts = [p.strip() for p in text.split(",")]
        if len(parts) != 4:
            raise ValueError(f"expected 'u,v,w,beta', got {text!r}")
        vals = {}
        for name, part in zip(("u", "v", "w", "beta"), parts):
            if "=" in part:
                label, part = part.split("=", 1)
                if label.strip() != name:
                    raise ValueError(f"expected {name}=..., got {label!r}")
            vals[name] = float(part)
        return cls(**vals)


_PRESETS = {
    "EI": FamilyParams.ei(),
    "PEI": FamilyParams.pei(),
    "PI": FamilyParams.pi(),
    "SEI": FamilyParams.sei(),
    "VEI": FamilyParams.vei(),
    "UEI": FamilyParams.uei(),
}


def named_presets():
    """All named members as ``(name, FamilyParams)`` pairs."""
    return list(_PRESETS.items())


def preset(name):
    try:
        return _PRESETS[name.upper()]
    except KeyError:
        raise KeyError(f"unknown acquisition preset {name!r}; choose from {sorted(_PRESETS)}") from None


def preset_name(params):
    """Name of the preset equal to ``params``, or None."""
    for name, p in _PRESETS.items():
        if p == params:
            return name
    return None


@dataclass(frozen=True)
class ImprovementStats:
    """EI, VI and E[I^w] at one or more candidates.

    ``vi_floor`` is the smallest VI used as a divisor by ``family_value``.
    """

    ei: np.ndarray | float
    vi: np.ndarray | float
    moment_w: np.ndarray | float
    vi_floor: float = VI_FLOOR


def improvement_stats(pred, fmin, w=1):
    """Closed-form improvement statistics under a Gaussian prediction.

    Where the predictive sd is zero the deterministic limits are used:
    ``EI = max(0, fmin - mu)``, ``VI = 0`` and ``E[I^w] = max(0, fmin - mu)^w``
    (``w = 0`` gives 1 for a strict improvement and 0 otherwise).
    """
    mu = np.asarray(pred.mean, dtype=float)
    sd = np.asarray(pred.sd, dtype=float)
    if np.any(sd < 0) or np.any(np.isnan(sd)) or np.any(np.isnan(mu)):
        raise ValueError("predictive sd must be non-negative and values not NaN")
    if not math.isfinite(fmin):
        raise ValueError("fmin must be finite")
    mu, sd = np.broadcast_arrays(mu, sd)
    gap = fmin - mu
    pos = sd > 0
    s = np.where(pos, sd, 1.0)
    z = np.where(pos, gap / s, 0.0)

    sure = np.maximum(gap, 0.0)
    ei = np.where(pos, improvement_moment(z, s, 1), sure)
    vi = np.where(pos, improvement_variance(z, s), 0.0)
    if w == 1:
        mw = ei
    else:
        limit = (gap > 0).astype(float) if w == 0 else sure**w
        mw = np.where(pos, improvement_moment(z, s, w), limit)
    if mu.ndim == 0:
        return ImprovementStats(float(ei), float(vi), float(mw))
    return ImprovementStats(ei, vi, mw)


def family_value(stats, params):
    """Score ``E[I^w] / VI^u + beta * VI^v``.

    ``VI^0`` is taken as 1. For ``u > 0`` the divisor uses
    ``max(VI, stats.vi_floor)``, so a zero VI gives a huge but finite score
    when ``E[I^w] > 0`` and zero otherwise. Values can be negative when ``beta < 0``.
    """
    vi = np.asarray(stats.vi, dtype=float)
    mw = np.asarray(stats.moment_w, dtype=float)
    if np.any(np.isnan(vi)) or np.any(np.isnan(mw)):
        raise ValueError("improvement statistics contain NaN")
    if params.u > 0:
        with np.errstate(over="ignore"):
            value = np.minimum(mw / np.maximum(vi, stats.vi_floor) ** params.u, _MAX)
    else:
        value = mw.copy() if mw.ndim else mw
    if params.beta != 0:
        value = value + params.beta * (vi**params.v if params.v > 0 else 1.0)
    return value if np.ndim(value) else float(value)


def acquisition_values(model, X, fmin, params):
    """Family scores of a fitted surrogate at the rows of ``X``.

    Also returns the predictive means, which break ties between equal scores.
    """
    pred = model.predict(X)
    stats = improvement_stats(pred, fmin, params.w)
    return np.asarray(family_value(stats, params), dtype=float), np.asarray(pred.mean)
