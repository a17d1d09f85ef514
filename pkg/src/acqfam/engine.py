"""Sequential Bayesian-optimization loop."""

from dataclasses import dataclass, field
import time
from typing import NamedTuple

import numpy as np

from .acquisition import FamilyParams, acquisition_values
from .gp import Dataset, FitConfig, FitError, condition, fit
from .sampling import as_bounds, latin_hypercube, make_rng
from .testbed import TestProblem

__all__ = [
    "OptimizerConfig",
    "RunConfig",
    "RunTrace",
    "RunError",
    "IterationRecord",
    "latin_hypercube",
    "maximize_acquisition",
    "run_bo",
]

# inputs closer than this (per coordinate, as a fraction of the width) count as repeats
DUPLICATE_TOL = 1e-10

# streams derived from a run seed
_STREAM_DESIGN, _STREAM_FIT, _STREAM_ACQ = 0, 1, 2


class RunError(RuntimeError):
    """A BO run could not continue; ``iteration`` is the evaluation index."""

    def __init__(self, message, iteration):
        super().__init__(f"iteration {iteration}: {message}")
        self.iteration = iteration


@dataclass(frozen=True)
class OptimizerConfig:
    """Controls for the inner acquisition maximization.

    A Latin hypercube pool of ``pool_per_dim * d`` points is scored, midpoints
    between the incumbent and the ``n_leaders`` best pool points are added,
    together with ``local_per_dim * d`` points scattered around the incumbent
    at radii log-uniform in ``local_radii`` (fractions of the width). The
    ``n_refine`` best candidates are polished by a coordinate pattern
    search of ``refine_steps`` steps. The first step is ``initial_step`` of
    the domain width and halves after every unsuccessful poll.
    """

    pool_per_dim: int = 2000
    n_leaders: int = 10
    local_per_dim: int = 50
    local_radii: tuple = (1e-6, 1e-1)
    n_refine: int = 5
    refine_steps: int = 50
    initial_step: float = 0.05


@dataclass(frozen=True)
class RunConfig:
    problem: TestProblem
    params: FamilyParams
    n_init: int = 10
    n_sequential: int = 490
    seed: int = 0
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    fit_starts: int = 8
    refit_every: int = 1
    debug: bool = False

    def __post_init__(self):
        if self.n_init < 2:
            raise ValueError("n_init must be at least 2")
        if self.n_sequential < 0:
            raise ValueError("n_sequential must be non-negative")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        if self.refit_every < 1 or self.fit_starts < 1:
            raise ValueError("refit_every and fit_starts must be positive")

    @property
    def budget(self):
        return self.n_init + self.n_sequential


class IterationRecord(NamedTuple):
    iteration: int
    x: np.ndarray
    y: float
    best: float


@dataclass
class RunTrace:
    """Everything evaluated during one run, in evaluation order.

    ``audit`` is filled only for debug runs: one entry per sequential step
    with the chosen point's score and the best score in its candidate pool.
    """

    inputs: np.ndarray
    outputs: np.ndarray
    n_init: int
    seed: int
    wall_time: float = 0.0
    audit: list = field(default_factory=list)

    @property
    def best_so_far(self):
        return np.minimum.accumulate(self.outputs)

    @property
    def final_solution(self):
        return float(self.outputs.min())

    @property
    def records(self):
        best = self.best_so_far
        return [
            IterationRecord(i + 1, self.inputs[i], float(self.outputs[i]), float(best[i]))
            for i in range(len(self.outputs))
        ]

    def __len__(self):
        return len(self.outputs)


def _ranking(values, means, X):
    # best first: highest score, then lowest predictive mean, then lexicographic x
    keys = [X[:, j] for j in range(X.shape[1] - 1, -1, -1)] + [means, -values]
    return np.lexsort(keys)


def _pattern_search(model, fmin, params, bounds, starts, values, cfg):
    lo, hi = bounds[:, 0], bounds[:, 1]
    width = hi - lo
    k, d = starts.shape
    x = starts.copy()
    fx = values.copy()
    step = np.full(k, cfg.initial_step)
    offsets = np.vstack([np.eye(d), -np.eye(d)])
    for _ in range(cfg.refine_steps):
        polls = x[:, None, :] + step[:, None, None] * offsets[None] * width
        polls = np.clip(polls, lo, hi)
        v, _ = acquisition_values(model, polls.reshape(-1, d), fmin, params)
        v = v.reshape(k, 2 * d)
        j = np.argmax(v, axis=1)
        gain = v[np.arange(k), j]
        moved = gain > fx
        x[moved] = polls[moved, j[moved]]
        fx[moved] = gain[moved]
        step[~moved] *= 0.5
    return x


def _is_repeat(x, X, width):
    return bool(np.any(np.all(np.abs(X - x) <= DUPLICATE_TOL * width, axis=1)))


def maximize_acquisition(model, fmin, params, bounds, seed, optimizer=None, audit=None):
    """Approximate ``argmax_x a(x)`` over a box.

    Parameters
    ----------
    model : FittedSurrogate
    fmin : float
        Best observed objective value.
    params : FamilyParams
    bounds : array_like, shape (d, 2)
    seed : int or numpy.random.Generator
        Source for the candidate pool.
    optimizer : OptimizerConfig, optional
    audit : list, optional
        If given, a dict describing the choice is appended to it.

    Returns
    -------
    ndarray, shape (d,)
        An in-bounds point that does not repeat an evaluated input.
    """
    cfg = optimizer or OptimizerConfig()
    b = as_bounds(bounds)
    width = b[:, 1] - b[:, 0]
    d = b.shape[0]
    rng = seed if isinstance(seed, np.random.Generator) else make_rng(seed)

    pool = latin_hypercube(cfg.pool_per_dim * d, b, rng)
    vals, means = acquisition_values(model, pool, fmin, params)
    order = _ranking(vals, means, pool)

    data = model.dataset
    incumbent = data.inputs[np.argmin(data.outputs)]
    mids = 0.5 * (pool[order[: cfg.n_leaders]] + incumbent)
    if cfg.local_per_dim > 0:
        m = cfg.local_per_dim * d
        direction = rng.standard_normal((m, d))
        direction /= np.linalg.norm(direction, axis=1, keepdims=True)
        lo_r, hi_r = np.log10(cfg.local_radii)
        radius = 10.0 ** rng.uniform(lo_r, hi_r, (m, 1))
        local = np.clip(incumbent + radius * direction * width, b[:, 0], b[:, 1])
        mids = np.vstack([mids, local])
    mvals, mmeans = acquisition_values(model, mids, fmin, params)
    cand = np.vstack([pool, mids])
    cvals = np.concatenate([vals, mvals])
    cmeans = np.concatenate([means, mmeans])

    top = _ranking(cvals, cmeans, cand)[: cfg.n_refine]
    refined = _pattern_search(model, fmin, params, b, cand[top], cvals[top], cfg)
    rvals, rmeans = acquisition_values(model, refined, fmin, params)

    allx = np.vstack([cand, refined])
    allv = np.concatenate([cvals, rvals])
    allm = np.concatenate([cmeans, rmeans])
    best = _ranking(allv, allm, allx)[0]
    x = allx[best].copy()

    repeat = _is_repeat(x, data.inputs, width)
    if repeat:
        # step toward the least explored pool point
        target = pool[np.argmax(model.predict(pool).sd)]
        direction = (target - x) / width
        norm = np.linalg.norm(direction)
        if norm > 0:
            x = np.clip(x + cfg.initial_step * width * direction / norm, b[:, 0], b[:, 1])
        if norm == 0 or _is_repeat(x, data.inputs, width):
            x = target.copy()
    if audit is not None:
        chosen, _ = acquisition_values(model, x[None], fmin, params)
        audit.append(
            {
                "value": float(allv[best]),
                "chosen_value": float(chosen[0]),
                "pool_max": float(cvals.max()),
                "repeat_avoided": repeat,
            }
        )
    return x


def run_bo(config):
    """Run one sequential optimization and return its full trace.

    ``n_init`` Latin hypercube points are evaluated first; each of the
    ``n_sequential`` steps then fits the surrogate, maximizes the
    acquisition and evaluates the chosen point. Identical configs give
    identical traces.

    Raises
    ------
    RunError
        If the surrogate cannot be fitted at some step.
    """
    problem = config.problem
    bounds = problem.bounds
    widths = tuple(problem.widths)
    t0 = time.perf_counter()

    X0 = latin_hypercube(config.n_init, bounds, make_rng(config.seed, _STREAM_DESIGN))
    data = Dataset(X0, problem(X0))
    audit = []
    hp = None
    for it in range(config.n_sequential):
        try:
            if hp is None or it % config.refit_every == 0:
                fit_cfg = FitConfig(
                    n_starts=config.fit_starts,
                    seed=make_rng(config.seed, _STREAM_FIT, it),
                    widths=widths,
                    initial=hp,
                )
                model = fit(data, fit_cfg)
            else:
                model = condition(data, hp)
        except FitError as err:
            raise RunError(f"surrogate fit failed: {err}", data.n + 1) from err
        hp = model.hyperparameters
        x = maximize_acquisition(
            model,
            float(data.outputs.min()),
            config.params,
            bounds,
            make_rng(config.seed, _STREAM_ACQ, it),
            config.optimizer,
            audit if config.debug else None,
        )
        data = data.append(x, problem(x))

    return RunTrace(
        inputs=np.array(data.inputs),
        outputs=np.array(data.outputs),
        n_init=config.n_init,
        seed=config.seed,
        wall_time=time.perf_counter() - t0,
        audit=audit,
    )
