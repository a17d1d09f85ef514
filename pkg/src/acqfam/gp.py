"""Gaussian-process surrogate with a squared-exponential kernel.

The prior mean is the constant sample mean of the outputs and the kernel is

    k(x, x') = s2 * exp(-0.5 * sum_j ((x_j - x'_j) / l_j)^2)

with one lengthscale ``l_j`` per input dimension. A small nugget is added to
the diagonal for conditioning only; predictions are for the noise-free
latent function.

Hyperparameters are fitted by maximum likelihood. For fixed lengthscales the
likelihood maximizer of ``s2`` has a closed form, so the numerical search only
runs over the log-lengthscales, using the analytic gradient of the profiled
log-likelihood.
"""

from dataclasses import dataclass, field, replace
from math import log, pi

import numpy as np
from scipy.linalg import cho_solve, cholesky, solve_triangular
from scipy.optimize import minimize

from .sampling import latin_hypercube, make_rng

#: Nugget ratios (relative to the signal variance) tried in order.
NUGGET_LADDER = (1e-8, 1e-7, 1e-6, 1e-5, 1e-4)

_DUPLICATE_TOL = 1e-12


class FitError(RuntimeError):
    """Raised when a surrogate cannot be fitted or factorized."""


class DuplicateInputError(ValueError):
    """Raised when a dataset would contain the same input twice."""


@dataclass(frozen=True)
class Dataset:
    """Evaluated inputs and their objective values.

    ``inputs`` has shape ``(n, d)`` (a 1-d array is read as ``n`` scalar
    inputs) and ``outputs`` has shape ``(n,)``.
    """

    inputs: np.ndarray
    outputs: np.ndarray

    def __post_init__(self):
        X = np.asarray(self.inputs, dtype=float)
        if X.ndim == 1:
            X = X.reshape(-1, 1)
        y = np.asarray(self.outputs, dtype=float).reshape(-1)
        if X.ndim != 2 or X.shape[0] < 1:
            raise ValueError("dataset needs at least one input vector")
        if X.shape[0] != y.shape[0]:
            raise ValueError(f"{X.shape[0]} inputs but {y.shape[0]} outputs")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
            raise ValueError("dataset values must be finite")
        if X.shape[0] > 1:
            diff = np.abs(X[:, None, :] - X[None, :, :]).max(axis=2)
            diff[np.diag_indices_from(diff)] = np.inf
            if np.any(diff <= _DUPLICATE_TOL):
                raise DuplicateInputError("dataset contains duplicate inputs")
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "inputs", X)
        object.__setattr__(self, "outputs", y)

    @property
    def n(self):
        return self.inputs.shape[0]

    @property
    def dim(self):
        return self.inputs.shape[1]

    def append(self, x, y):
        """Return a new dataset with ``(x, y)`` added at the end."""
        x = np.asarray(x, dtype=float).reshape(-1)
        if x.shape[0] != self.dim:
            raise ValueError(f"expected a {self.dim}-vector, got shape {x.shape}")
        if np.any(np.abs(self.inputs - x).max(axis=1) <= _DUPLICATE_TOL):
            raise DuplicateInputError(f"input {x} is already in the dataset")
        return Dataset(np.vstack([self.inputs, x]), np.append(self.outputs, float(y)))


@dataclass(frozen=True)
class Hyperparameters:
    lengthscales: tuple
    signal_variance: float
    nugget: float

    def __post_init__(self):
        ls = tuple(float(v) for v in np.atleast_1d(self.lengthscales))
        object.__setattr__(self, "lengthscales", ls)
        if not all(v > 0 for v in ls):
            raise ValueError("lengthscales must be positive")
        if not (self.signal_variance > 0 and self.nugget > 0):
            raise ValueError("signal variance and nugget must be positive")


@dataclass(frozen=True)
class FitConfig:
    """Controls for maximum-likelihood fitting.

    ``widths`` are the per-dimension domain widths the lengthscale search box
    is tied to (defaults to the data range). ``initial`` is an optional warm
    start tried in addition to the ``n_starts`` space-filling starts.
    """

    n_starts: int = 8
    seed: int = 0
    widths: tuple | None = None
    lengthscale_range: tuple = (1e-2, 1e1)
    initial: Hyperparameters | None = None
    maxiter: int = 100


@dataclass(frozen=True)
class PredictiveDistribution:
    mean: np.ndarray | float
    sd: np.ndarray | float


@dataclass(frozen=True, eq=False)
class FittedSurrogate:
    dataset: Dataset
    hyperparameters: Hyperparameters
    factor: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)
    output_mean: float

    def predict(self, x):
        return predict(self, x)


def _sq_dists(X1, X2):
    # per-dimension squared differences, shape (d, n1, n2)
    return (X1.T[:, :, None] - X2.T[:, None, :]) ** 2


def _corr_from_sq(sq, lengthscales):
    ls = np.asarray(lengthscales, dtype=float)
    return np.exp(-0.5 * np.tensordot(1.0 / ls**2, sq, axes=1))


def _cholesky(R, ratio):
    n = R.shape[0]
    try:
        return cholesky(R + ratio * np.eye(n), lower=True, check_finite=False)
    except np.linalg.LinAlgError:
        return None


def _factor_with_ladder(R, start_ratio):
    """Cholesky of ``R + ratio*I``, escalating the ratio on failure."""
    ratios = [r for r in NUGGET_LADDER if r >= start_ratio * (1 - 1e-9)]
    # off-ladder requests are tried as given first
    if not ratios or ratios[0] > start_ratio * (1 + 1e-9):
        ratios.insert(0, start_ratio)
    for ratio in ratios:
        L = _cholesky(R, ratio)
        if L is not None:
            return L, ratio
    raise FitError(
        f"kernel matrix not positive definite even with nugget ratio {NUGGET_LADDER[-1]:g}; "
        "the inputs are too close together for the current lengthscales"
    )


def _signal_floor(y):
    return 1e-12 * max(1.0, float(np.mean(y * y)))


def _profile(sq, r, log_ls, ratio, floor, want_grad=True):
    ls = np.exp(log_ls)
    R = _corr_from_sq(sq, ls)
    L, ratio = _factor_with_ladder(R, ratio)
    n = r.shape[0]
    alpha = cho_solve((L, True), r, check_finite=False)
    quad = float(r @ alpha)
    s2 = max(quad / n, floor)
    value = -0.5 * n * log(2 * pi * s2) - np.sum(np.log(np.diag(L))) - 0.5 * quad / s2
    if not want_grad:
        return value, None, ratio
    Cinv = cho_solve((L, True), np.eye(n), check_finite=False)
    grad = np.empty(len(ls))
    for j in range(len(ls)):
        dR = R * sq[j] / ls[j] ** 2
        grad[j] = 0.5 * (alpha @ dR @ alpha / s2 - np.sum(Cinv * dR))
    return value, grad, ratio


def profile_log_likelihood(data, lengthscales, nugget_ratio=NUGGET_LADDER[0]):
    """Log-likelihood with the signal variance at its closed-form optimum.

    Returns
    -------
    value : float
    grad : ndarray
        Gradient with respect to the log-lengthscales.
    """
    r = data.outputs - data.outputs.mean()
    sq = _sq_dists(data.inputs, data.inputs)
    value, grad, _ = _profile(sq, r, np.log(lengthscales), nugget_ratio, _signal_floor(r))
    return value, grad


def log_marginal_likelihood(data, hp):
    """Exact Gaussian log marginal likelihood of the centered outputs.

    The covariance is ``s2 * R + nugget * I``. If that matrix cannot be
    factorized the nugget is escalated along ``NUGGET_LADDER``.
    """
    if len(hp.lengthscales) != data.dim:
        raise ValueError("one lengthscale per input dimension is required")
    r = data.outputs - data.outputs.mean()
    R = _corr_from_sq(_sq_dists(data.inputs, data.inputs), hp.lengthscales)
    s2 = hp.signal_variance
    L, ratio = _factor_with_ladder(R, hp.nugget / s2)
    alpha = cho_solve((L, True), r, check_finite=False) / s2
    logdet = 2 * np.sum(np.log(np.diag(L))) + data.n * log(s2)
    return float(-0.5 * r @ alpha - 0.5 * logdet - 0.5 * data.n * log(2 * pi))


def condition(data, hp):
    """Build a surrogate for ``data`` with fixed hyperparameters."""
    if len(hp.lengthscales) != data.dim:
        raise ValueError("one lengthscale per input dimension is required")
    ybar = float(data.outputs.mean())
    r = data.outputs - ybar
    s2 = hp.signal_variance
    R = _corr_from_sq(_sq_dists(data.inputs, data.inputs), hp.lengthscales)
    L, ratio = _factor_with_ladder(R, hp.nugget / s2)
    # factor of the covariance s2 * (R + ratio I)
    factor = np.sqrt(s2) * L
    weights = cho_solve((factor, True), r, check_finite=False)
    factor.setflags(write=False)
    weights.setflags(write=False)
    hp = replace(hp, nugget=ratio * s2)
    return FittedSurrogate(data, hp, factor, weights, ybar)


def fit(data, config=None):
    """Fit hyperparameters by multi-start maximum likelihood.

    Starts are a Latin hypercube over the log-lengthscale box plus the
    optional warm start; each is polished with L-BFGS-B. The result is
    deterministic for a given ``config.seed``.

    Raises
    ------
    FitError
        With fewer than two points, or when no start yields a factorizable
        kernel matrix.
    """
    config = config or FitConfig()
    if data.n < 2:
        raise FitError("fitting a surrogate needs at least two data points")
    X, y = data.inputs, data.outputs
    r = y - y.mean()
    floor = _signal_floor(r)
    if config.widths is not None:
        widths = np.asarray(config.widths, dtype=float)
    else:
        widths = np.ptp(X, axis=0)
        widths = np.where(widths > 0, widths, 1.0)
    lo_frac, hi_frac = config.lengthscale_range
    box = np.column_stack([np.log(lo_frac * widths), np.log(hi_frac * widths)])

    rng = config.seed if isinstance(config.seed, np.random.Generator) else make_rng(config.seed)
    starts = latin_hypercube(config.n_starts, box, rng)
    if config.initial is not None:
        warm = np.clip(np.log(config.initial.lengthscales), box[:, 0], box[:, 1])
        starts = np.vstack([warm, starts])

    sq = _sq_dists(X, X)

    def objective(theta):
        try:
            value, grad, _ = _profile(sq, r, theta, NUGGET_LADDER[0], floor)
        except FitError:
            return 1e100, np.zeros_like(theta)
        return -value, -grad

    best_theta, best_value = None, -np.inf
    for x0 in starts:
        res = minimize(
            objective, x0, jac=True, method="L-BFGS-B", bounds=box,
            options={"maxiter": config.maxiter},
        )
        theta = np.clip(res.x, box[:, 0], box[:, 1])
        try:
            value, _, _ = _profile(sq, r, theta, NUGGET_LADDER[0], floor, want_grad=False)
        except FitError:
            continue
        if value > best_value:
            best_theta, best_value = theta, value
    if best_theta is None:
        raise FitError("no multi-start produced a factorizable kernel matrix")

    ls = np.exp(best_theta)
    R = _corr_from_sq(sq, ls)
    L, ratio = _factor_with_ladder(R, NUGGET_LADDER[0])
    quad = float(r @ cho_solve((L, True), r, check_finite=False))
    s2 = max(quad / data.n, floor)
    return condition(data, Hyperparameters(tuple(ls), s2, ratio * s2))


def predict(model, x):
    """Predictive mean and standard deviation at ``x``.

    ``x`` is a single d-vector (scalars are returned) or an ``(m, d)``
    array (arrays of length m are returned). Negative variances from
    round-off are clamped to zero.
    """
    x = np.asarray(x, dtype=float)
    d = model.dataset.dim
    single = x.ndim <= 1
    if single:
        x = x.reshape(1, -1)
    if x.ndim != 2 or x.shape[1] != d:
        raise ValueError(f"expected points of dimension {d}, got shape {x.shape}")
    hp = model.hyperparameters
    k = hp.signal_variance * _corr_from_sq(_sq_dists(x, model.dataset.inputs), hp.lengthscales)
    mean = model.output_mean + k @ model.weights
    v = solve_triangular(model.factor, k.T, lower=True, check_finite=False)
    var = np.maximum(hp.signal_variance - np.einsum("ij,ij->j", v, v), 0.0)
    sd = np.sqrt(var)
    if single:
        return PredictiveDistribution(float(mean[0]), float(sd[0]))
    return PredictiveDistribution(mean, sd)
