"""Gaussian-process surrogate over joint (theta, xi) inputs.

Zero prior mean, unit-amplitude RBF kernel, white observation noise. Inputs
are expected in the unit cube (see :class:`InputScaler`); targets are
optionally standardized before fitting and mapped back on prediction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import LinAlgError, cholesky, cho_solve, solve_triangular
from scipy.stats import norm

from .errors import DomainError, NumericalError

NOISE_FLOOR = 1e-6


@dataclass(frozen=True)
class Sample:
    theta: np.ndarray
    xi: float
    value: float


@dataclass(frozen=True)
class InputScaler:
    """Affine map of (theta, xi) onto [0, 1]^(d+1)."""

    theta_bounds: np.ndarray
    xi_range: tuple[float, float]

    def transform(self, theta, xi):
        theta = np.atleast_2d(np.asarray(theta, dtype=float))
        xi = np.broadcast_to(np.asarray(xi, dtype=float), theta.shape[:1])
        lo, hi = self.theta_bounds[:, 0], self.theta_bounds[:, 1]
        t = (theta - lo) / (hi - lo)
        x0, x1 = self.xi_range
        z = (xi - x0) / (x1 - x0) if x1 > x0 else np.zeros_like(xi)
        return np.column_stack([t, z])

    def grid_rows(self, theta, levels):
        """Rows for every (theta_b, level_i) pair, theta-major: shape (B*n, d+1)."""
        theta = np.atleast_2d(np.asarray(theta, dtype=float))
        b, n = theta.shape[0], len(levels)
        return self.transform(np.repeat(theta, n, axis=0), np.tile(levels, b))


@dataclass(frozen=True)
class GpConfig:
    """Hyperparameter policy.

    ``mode='mle'`` picks (lengthscale, noise) maximizing the log marginal
    likelihood over the two grids; ``mode='fixed'`` uses the given values.
    """

    mode: str = "mle"
    lengthscale: float = 0.2
    noise: float = 1e-3
    lengthscale_grid: tuple[float, ...] = field(
        default_factory=lambda: tuple(np.geomspace(0.05, 1.0, 16))
    )
    noise_grid: tuple[float, ...] = field(default_factory=lambda: tuple(np.geomspace(1e-4, 1e-1, 8)))
    normalize_y: bool = True

    def __post_init__(self):
        if self.mode not in ("mle", "fixed"):
            raise DomainError(f"unknown hyperparameter mode {self.mode!r}")
        if self.lengthscale <= 0:
            raise DomainError("lengthscale must be positive")
        if self.noise < NOISE_FLOOR:
            raise DomainError(f"noise must be at least the floor {NOISE_FLOOR}")


def rbf_kernel(x, x2, l):
    if l <= 0:
        raise DomainError("lengthscale must be positive")
    x, x2 = np.asarray(x, dtype=float), np.asarray(x2, dtype=float)
    if x.shape != x2.shape:
        raise DomainError("kernel inputs differ in dimension")
    return float(math.exp(-np.sum((x - x2) ** 2) / (2 * l * l)))


def _sqdist(a, b):
    d = np.sum(a * a, 1)[:, None] + np.sum(b * b, 1)[None, :] - 2 * a @ b.T
    return np.maximum(d, 0.0)


def kernel_matrix(a, b, l):
    return np.exp(-_sqdist(np.atleast_2d(a), np.atleast_2d(b)) / (2 * l * l))


def _factor(k, noise):
    a = k + noise * noise * np.eye(len(k))
    md = float(np.mean(np.diag(a)))
    jitter = 0.0
    while True:
        try:
            return cholesky(a + jitter * np.eye(len(k)), lower=True), jitter
        except LinAlgError:
            jitter = 1e-10 * md if jitter == 0.0 else 2 * jitter
            if jitter > 1e-6 * md:
                raise NumericalError(
                    f"kernel matrix not positive definite even with jitter {jitter:.3g} (noise={noise:.3g})"
                ) from None


@dataclass(frozen=True)
class GpModel:
    X: np.ndarray
    y: np.ndarray
    lengthscale: float
    noise: float
    y_mean: float
    y_scale: float
    chol: np.ndarray
    alpha: np.ndarray
    jitter: float
    log_marginal_likelihood: float

    def predict(self, Xq):
        """Posterior mean and standard deviation at each row of ``Xq``."""
        mu, var = self.predict_raw_variance(Xq)
        return mu, self.y_scale * np.sqrt(np.maximum(var, 0.0))

    def predict_raw_variance(self, Xq):
        """Mean (target units) and unclamped variance on the standardized scale."""
        Xq = np.atleast_2d(np.asarray(Xq, dtype=float))
        if Xq.shape[1] != self.X.shape[1]:
            raise DomainError("query dimension differs from training inputs")
        ks = kernel_matrix(Xq, self.X, self.lengthscale)
        mu = ks @ self.alpha
        v = solve_triangular(self.chol, ks.T, lower=True, check_finite=False)
        var = 1.0 - np.sum(v * v, axis=0)
        return self.y_mean + self.y_scale * mu, var


def _build(X, y, l, noise, normalize_y):
    if normalize_y:
        mean = float(np.mean(y))
        scale = float(np.std(y))
        if scale <= 0.0 or not np.isfinite(scale):
            scale = 1.0
    else:
        mean, scale = 0.0, 1.0
    z = (y - mean) / scale
    k = kernel_matrix(X, X, l)
    chol, jitter = _factor(k, noise)
    alpha = cho_solve((chol, True), z, check_finite=False)
    lml = -0.5 * float(z @ alpha) - float(np.sum(np.log(np.diag(chol)))) - 0.5 * len(z) * math.log(2 * math.pi)
    return GpModel(X, y, l, noise, mean, scale, chol, alpha, jitter, lml)


def fit(X, y, config: GpConfig = GpConfig()) -> GpModel:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float)
    if len(X) < 2 or len(X) != len(y):
        raise DomainError("need at least two samples with matching targets")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise DomainError("non-finite training data")
    if config.mode == "fixed":
        return _build(X, y, config.lengthscale, config.noise, config.normalize_y)
    best = None
    for l in config.lengthscale_grid:
        for eps in config.noise_grid:
            try:
                model = _build(X, y, float(l), float(max(eps, NOISE_FLOOR)), config.normalize_y)
            except NumericalError:
                continue
            if best is None or model.log_marginal_likelihood > best.log_marginal_likelihood:
                best = model
    if best is None:
        raise NumericalError("no hyperparameter pair gave a positive-definite kernel matrix")
    return best


def posterior(model: GpModel, x):
    mu, sigma = model.predict(np.atleast_2d(x))
    return float(mu[0]), float(sigma[0])


def lcb_values(mu, sigma, beta):
    return mu - beta * sigma


def ei_values(mu, sigma, best_value, standard=False):
    """Expected improvement below ``best_value``.

    With ``standard=False`` a zero standard deviation sets ``z = 0``, so the
    value is ``(best - mu) / 2`` and can be negative. ``standard=True`` uses
    ``max(best - mu, 0)`` there instead.
    """
    mu, sigma = np.asarray(mu, dtype=float), np.asarray(sigma, dtype=float)
    gap = best_value - mu
    pos = sigma > 0
    z = np.where(pos, gap / np.where(pos, sigma, 1.0), 0.0)
    out = norm.cdf(z) * gap + norm.pdf(z) * sigma
    if standard:
        out = np.where(pos, out, np.maximum(gap, 0.0))
    return out


def lcb(model: GpModel, x, beta=2.0):
    if beta < 0:
        raise DomainError("beta must be non-negative")
    mu, sigma = posterior(model, x)
    return mu - beta * sigma


def ei(model: GpModel, x, best_value, standard=False):
    mu, sigma = posterior(model, x)
    return float(ei_values(mu, sigma, best_value, standard))
