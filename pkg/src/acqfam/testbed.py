"""Analytic benchmark objectives with their domains and known minima."""

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

# Hartman (6-d) constants.
HARTMAN_ALPHA = np.array([1.0, 1.2, 3.0, 3.2])
HARTMAN_A = np.array(
    [
        [10, 3, 17, 3.5, 1.7, 8],
        [0.05, 10, 17, 0.1, 8, 14],
        [3, 3.5, 1.7, 10, 17, 8],
        [17, 8, 0.05, 10, 0.1, 14],
    ]
)
HARTMAN_P = 1e-4 * np.array(
    [
        [1312, 1696, 5569, 124, 8283, 5886],
        [2329, 4135, 8307, 3736, 1004, 9991],
        [2348, 1451, 3522, 2883, 3047, 6650],
        [4047, 8828, 8732, 5743, 1091, 381],
    ]
)

#: Inputs of the open unit cube are pulled this far inside its faces.
OPEN_MARGIN = 1e-9
_BOUND_TOL = 1e-9


def gramacy_lee(x):
    x = x[..., 0]
    return np.sin(10 * np.pi * x) / (2 * x) + (x - 1) ** 4


def rosenbrock(x):
    x1, x2 = x[..., 0], x[..., 1]
    return 100 * (x2 - x1**2) ** 2 + (x1 - 1) ** 2


def modified_townsend(x):
    x1, x2 = x[..., 0], x[..., 1]
    return -np.cos((x1 - 0.1) * x2) ** 2 - x1 * np.sin(3 * x1 + x2)


def ackley(x):
    d = x.shape[-1]
    r = np.sqrt(np.sum(x**2, axis=-1) / d)
    c = np.sum(np.cos(2 * np.pi * x), axis=-1) / d
    return -20 * np.exp(-0.2 * r) - np.exp(c) + 20 + np.e


def rastrigin(x):
    return 10 * x.shape[-1] + np.sum(x**2 - 10 * np.cos(2 * np.pi * x), axis=-1)


def hartman6(x):
    diff = x[..., None, :] - HARTMAN_P
    inner = np.sum(HARTMAN_A * diff**2, axis=-1)
    return -np.sum(HARTMAN_ALPHA * np.exp(-inner), axis=-1)


@dataclass(frozen=True)
class TestProblem:
    """A box-bounded minimization problem.

    ``global_minimum_value`` is the published reference value rounded to
    three decimals, and ``local_minima`` the published count of local
    minima (documentation only).
    """

    __test__ = False  # keep pytest from collecting this class

    name: str
    title: str
    bounds: np.ndarray
    global_minimum_value: float
    local_minima: int
    func: Callable = field(repr=False)
    open_domain: bool = False

    @property
    def dimension(self):
        return self.bounds.shape[0]

    @property
    def widths(self):
        return self.bounds[:, 1] - self.bounds[:, 0]

    def __call__(self, x):
        return evaluate(self, x)


def _box(lo, hi, d):
    return np.tile([float(lo), float(hi)], (d, 1))


PROBLEMS = {
    p.name: p
    for p in (
        TestProblem("GRL", "Gramacy and Lee", _box(0.5, 2.5, 1), -0.869, 10, gramacy_lee),
        TestProblem("ROS", "Rosenbrock", _box(-2, 2, 2), 0.0, 1, rosenbrock),
        TestProblem("MOT", "Modified Townsend", _box(-2, 2, 2), -2.969, 6, modified_townsend),
        TestProblem("ACY", "Ackley", _box(-2, 2, 2), 0.0, 25, ackley),
        TestProblem("RAS", "Rastrigin", _box(-2, 2, 2), 0.0, 25, rastrigin),
        TestProblem("HTN", "Hartman", _box(0, 1, 6), -3.322, 6, hartman6, open_domain=True),
    )
}
for _p in PROBLEMS.values():
    _p.bounds.setflags(write=False)


def get_problem(name):
    try:
        return PROBLEMS[name.upper()]
    except KeyError:
        raise KeyError(f"unknown problem {name!r}; choose from {sorted(PROBLEMS)}") from None


def evaluate(problem, x):
    """Objective value at ``x`` (a d-vector, or an ``(m, d)`` batch).

    Inputs may overshoot the box by round-off (1e-9 of the width) and are
    clipped back. Inputs of the open Hartman cube are additionally kept
    ``OPEN_MARGIN`` away from its faces.

    Raises
    ------
    ValueError
        On a dimension mismatch or an input clearly outside the domain.
    """
    x = np.asarray(x, dtype=float)
    if x.shape[-1:] != (problem.dimension,):
        raise ValueError(f"{problem.name} takes {problem.dimension}-vectors, got shape {x.shape}")
    lo, hi = problem.bounds[:, 0], problem.bounds[:, 1]
    tol = _BOUND_TOL * (hi - lo)
    if np.any(x < lo - tol) or np.any(x > hi + tol) or np.any(~np.isfinite(x)):
        raise ValueError(f"input {x} lies outside the {problem.name} domain")
    if problem.open_domain:
        x = np.clip(x, lo + OPEN_MARGIN, hi - OPEN_MARGIN)
    else:
        x = np.clip(x, lo, hi)
    out = problem.func(x)
    return float(out) if np.ndim(out) == 0 else out


def reference_solution(problem):
    """Published global minimum value of ``problem``."""
    return problem.global_minimum_value
