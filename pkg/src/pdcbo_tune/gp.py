"""Exact Gaussian process regression with a squared-exponential kernel."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_solve, solve_triangular

from .errors import ConfigError, FactorizationError, ShapeError

JITTER = 1e-8
N_PRIOR_MEAN_OBS = 5


@dataclass(frozen=True)
class SeKernelHyper:
    signal_variance: float
    lengthscales: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "lengthscales", tuple(float(v) for v in self.lengthscales))
        if not self.signal_variance > 0:
            raise ConfigError(f"signal_variance must be > 0, got {self.signal_variance}")
        if not self.lengthscales:
            raise ConfigError("at least one lengthscale is required")
        if any(not v > 0 for v in self.lengthscales):
            raise ConfigError(f"lengthscales must be > 0, got {self.lengthscales}")

    @property
    def dim(self) -> int:
        return len(self.lengthscales)

    def to_log_vector(self) -> np.ndarray:
        return np.log(np.r_[self.signal_variance, self.lengthscales])

    @classmethod
    def from_log_vector(cls, v) -> SeKernelHyper:
        v = np.exp(np.asarray(v, dtype=float))
        return cls(float(v[0]), tuple(v[1:]))


@dataclass(frozen=True)
class Posterior:
    mean: float
    variance: float

    @property
    def std(self) -> float:
        return math.sqrt(self.variance)


def kernel_matrix(X, Y, hyper: SeKernelHyper) -> np.ndarray:
    """Cross-covariance ``k(X_i, Y_j)`` for row-stacked inputs."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    ls = np.asarray(hyper.lengthscales)
    if X.shape[1] != ls.size or Y.shape[1] != ls.size:
        raise ShapeError(
            f"inputs have dims {X.shape[1]} and {Y.shape[1]}, kernel expects {ls.size}"
        )
    diff = (X[:, None, :] - Y[None, :, :]) / ls
    sq = np.einsum("ijk,ijk->ij", diff, diff)
    return hyper.signal_variance * np.exp(-sq)


def se_kernel(x, y, hyper: SeKernelHyper) -> float:
    """sigma^2 * exp(-sum(((x_i - y_i) / l_i)^2)) for a single pair."""
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if x.size != hyper.dim or y.size != hyper.dim:
        raise ShapeError(f"inputs have dims {x.size} and {y.size}, kernel expects {hyper.dim}")
    r = (x - y) / np.asarray(hyper.lengthscales)
    return float(hyper.signal_variance * np.exp(-np.dot(r, r)))


@dataclass
class GpModel:
    """One GP surrogate: hyperparameters, history and a Cholesky factor.

    ``prior_mean=None`` selects the automatic prior: the mean of the first
    five outputs (zero before any data).
    """

    hyper: SeKernelHyper
    noise_variance: float | None = None
    prior_mean: float | None = None
    inputs: list = field(default_factory=list)
    outputs: list = field(default_factory=list)
    _chol: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.noise_variance is None:
            self.noise_variance = 1e-2 * self.hyper.signal_variance
        if self.noise_variance < 0:
            raise ConfigError(f"noise_variance must be >= 0, got {self.noise_variance}")
        self.inputs = [np.asarray(x, dtype=float).ravel() for x in self.inputs]
        self.outputs = [float(y) for y in self.outputs]
        if len(self.inputs) != len(self.outputs):
            raise ShapeError("inputs and outputs must have equal length")
        for x in self.inputs:
            self._check_dim(x)
        self._chol = None

    def __len__(self):
        return len(self.outputs)

    @property
    def dim(self) -> int:
        return self.hyper.dim

    @property
    def mean_value(self) -> float:
        if self.prior_mean is not None:
            return float(self.prior_mean)
        if not self.outputs:
            return 0.0
        return float(np.mean(self.outputs[:N_PRIOR_MEAN_OBS]))

    @property
    def diag_offset(self) -> float:
        return self.noise_variance + JITTER * self.hyper.signal_variance

    def _check_dim(self, x):
        if x.size != self.dim:
            raise ShapeError(f"input has dim {x.size}, model expects {self.dim}")

    def copy(self) -> GpModel:
        new = GpModel(self.hyper, self.noise_variance, self.prior_mean,
                      list(self.inputs), list(self.outputs))
        new._chol = self._chol
        return new

    def with_hyper(self, hyper: SeKernelHyper) -> GpModel:
        return GpModel(hyper, self.noise_variance, self.prior_mean,
                       list(self.inputs), list(self.outputs))

    def add_observation(self, x, y) -> GpModel:
        """Append ``(x, y)`` and extend the Cholesky factor by one row."""
        x = np.asarray(x, dtype=float).ravel()
        self._check_dim(x)
        y = float(y)
        if self._chol is not None:
            X = np.asarray(self.inputs)
            k = kernel_matrix(X, x[None, :], self.hyper)[:, 0]
            row = solve_triangular(self._chol, k, lower=True)
            d2 = self.hyper.signal_variance + self.diag_offset - row @ row
            if d2 > 0:
                n = self._chol.shape[0]
                L = np.zeros((n + 1, n + 1))
                L[:n, :n] = self._chol
                L[n, :n] = row
                L[n, n] = math.sqrt(d2)
                self._chol = L
            else:
                self._chol = None
        self.inputs.append(x)
        self.outputs.append(y)
        return self

    def _factor(self) -> np.ndarray:
        if self._chol is None and self.inputs:
            X = np.asarray(self.inputs)
            K = kernel_matrix(X, X, self.hyper)
            K[np.diag_indices_from(K)] += self.diag_offset
            try:
                self._chol = np.linalg.cholesky(K)
            except np.linalg.LinAlgError as exc:
                raise FactorizationError(f"Gram matrix not positive definite (n={len(X)})") from exc
        return self._chol

    def predict(self, X) -> tuple[np.ndarray, np.ndarray]:
        """Posterior mean and variance at each row of ``X``."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.dim:
            raise ShapeError(f"query has dim {X.shape[1]}, model expects {self.dim}")
        mu0 = self.mean_value
        if not self.inputs:
            return (np.full(len(X), mu0), np.full(len(X), self.hyper.signal_variance))
        L = self._factor()
        resid = np.asarray(self.outputs) - mu0
        alpha = cho_solve((L, True), resid)
        Ks = kernel_matrix(np.asarray(self.inputs), X, self.hyper)
        mean = Ks.T @ alpha + mu0
        V = solve_triangular(L, Ks, lower=True)
        var = self.hyper.signal_variance - np.sum(V * V, axis=0)
        return mean, np.maximum(var, 0.0)

    def posterior(self, x) -> Posterior:
        x = np.asarray(x, dtype=float).ravel()
        self._check_dim(x)
        mean, var = self.predict(x[None, :])
        return Posterior(float(mean[0]), float(var[0]))

    def log_marginal_likelihood(self) -> float:
        if not self.outputs:
            raise ConfigError("log marginal likelihood needs at least one observation")
        L = self._factor()
        resid = np.asarray(self.outputs) - self.mean_value
        alpha = cho_solve((L, True), resid)
        n = len(resid)
        return float(-0.5 * resid @ alpha - np.sum(np.log(np.diag(L))) - 0.5 * n * math.log(2 * math.pi))


def fit_hyperparameters(model: GpModel, bounds, levels: int = 7,
                        max_grid: int = 20000, sweeps: int = 3) -> SeKernelHyper:
    """Maximize the log evidence over a grid in log-hyperparameter space.

    ``bounds`` is a sequence of ``(lo, hi)`` pairs on the natural log of
    ``(signal_variance, *lengthscales)``. When the full Cartesian grid has at
    most ``max_grid`` points it is enumerated exhaustively, otherwise
    coordinate-wise sweeps over the same per-axis levels are used. The
    incumbent hyperparameters compete too when they lie inside the box, so the
    result is never worse than the incumbent.
    """
    bounds = [tuple(map(float, b)) for b in (bounds or [])]
    if not bounds:
        raise ConfigError("empty hyperparameter bounds")
    if len(bounds) != model.dim + 1:
        raise ConfigError(f"expected {model.dim + 1} bounds, got {len(bounds)}")
    for lo, hi in bounds:
        if not lo <= hi:
            raise ConfigError(f"invalid bound ({lo}, {hi})")
    if len(model) < 5:
        raise ConfigError("hyperparameter fitting needs at least 5 observations")

    axes = [np.unique(np.linspace(lo, hi, levels)) for lo, hi in bounds]

    def score(logv):
        try:
            return model.with_hyper(SeKernelHyper.from_log_vector(logv)).log_marginal_likelihood()
        except FactorizationError:
            return -math.inf

    best_v = None
    best = -math.inf
    if math.prod(len(a) for a in axes) <= max_grid:
        for combo in itertools.product(*axes):
            s = score(combo)
            if s > best:
                best, best_v = s, np.array(combo)
    else:
        cur = np.array([a[len(a) // 2] for a in axes])
        cur_s = score(cur)
        for _ in range(sweeps):
            for i, axis in enumerate(axes):
                for level in axis:
                    trial = cur.copy()
                    trial[i] = level
                    s = score(trial)
                    if s > cur_s:
                        cur, cur_s = trial, s
        best, best_v = cur_s, cur

    inc = model.hyper.to_log_vector()
    inside = all(lo - 1e-12 <= v <= hi + 1e-12 for v, (lo, hi) in zip(inc, bounds))
    if best_v is None or (inside and score(inc) > best):
        return model.hyper
    return SeKernelHyper.from_log_vector(best_v)
