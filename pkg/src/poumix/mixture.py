"""Per-partition Gaussian noise: mixture density, moments, sampling, loss.

At a point x the label is modeled as q(x) + mu_i + sigma_i * z with the
component index drawn from the partition weights phi(x), so the density is
the mixture sum_i phi_i(x) * N(y | mu_i + q(x), sigma_i). The training loss
is the summed negative log density with exact analytic gradients.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, InputError, NumericalError
from .linalg import logsumexp
from .polynomials import PolynomialSet, evaluate_all

LOG_2PI = float(np.log(2.0 * np.pi))

# Partition weights below this are treated as exactly zero inside the
# log-density (their terms enter logsumexp as -inf).
PHI_ZERO = 1e-300

# Negative variance of magnitude below this is rounding noise; clamp to 0.
VARIANCE_CLAMP = 1e-14


@dataclass(frozen=True)
class NoiseModel:
    """Component means and log standard deviations, one pair per partition."""

    mu: np.ndarray
    log_sigma: np.ndarray

    @property
    def sigma(self) -> np.ndarray:
        return np.exp(self.log_sigma)

    @property
    def num_components(self) -> int:
        return self.mu.shape[0]


@dataclass(frozen=True)
class Prediction:
    mean: np.ndarray
    variance: np.ndarray
    std: np.ndarray


def init_noise(y, num_components: int, sigma_scale: float = 1.0) -> NoiseModel:
    """Starting noise parameters: means at evenly spaced quantiles of y.

    Training clusters the label range, so quantiles start near that fixed
    point. Sigma starts at sigma_scale * range/num_components. The scale
    trades robustness for specialization: below 1, components overlap less
    at the start and commit to their own label cluster early, which keeps
    them from merging on strongly clustered data.
    """
    if sigma_scale <= 0:
        raise InputError("sigma_scale must be > 0")
    y = np.asarray(y, dtype=float).ravel()
    qs = (np.arange(num_components) + 0.5) / num_components
    mu = np.quantile(y, qs)
    spread = float(y.max() - y.min())
    if spread <= 0:
        spread = float(num_components)
    sigma0 = sigma_scale * spread / num_components
    return NoiseModel(mu=mu, log_sigma=np.full(num_components, np.log(sigma0)))


def sigma_floor(y) -> float:
    """Smallest sigma allowed during training; guards the likelihood blow-up
    when a component collapses onto a single point."""
    y = np.asarray(y, dtype=float)
    spread = float(y.max() - y.min())
    return 1e-6 * spread if spread > 0 else 1e-12


def q_values(poly: PolynomialSet, phi, x) -> np.ndarray:
    """Deterministic component Q(x_j) = sum_i phi_i(x_j) p_i(x_j)."""
    phi = np.asarray(phi, dtype=float)
    if phi.ndim != 2 or phi.shape[1] != poly.num_partitions:
        raise DimensionError(
            f"phi has {phi.shape[1] if phi.ndim == 2 else '?'} columns, "
            f"polynomial set has {poly.num_partitions} partitions"
        )
    values = evaluate_all(poly, x)
    if values.shape[0] != phi.shape[0]:
        raise DimensionError(
            f"phi has {phi.shape[0]} rows but {values.shape[0]} points given"
        )
    return np.sum(phi * values, axis=1)


def _log_terms(phi, y, q, noise):
    """Per-sample, per-component log(phi_i) + log N(y | mu_i + q, sigma_i)."""
    sigma = noise.sigma
    resid = y[:, None] - q[:, None] - noise.mu[None, :]
    log_norm = -0.5 * LOG_2PI - noise.log_sigma[None, :] - 0.5 * (resid / sigma[None, :]) ** 2
    with np.errstate(divide="ignore"):
        log_phi = np.where(phi < PHI_ZERO, -np.inf, np.log(np.maximum(phi, PHI_ZERO)))
    return log_phi + log_norm, log_norm, resid


def log_density(phi_row, y: float, q: float, noise: NoiseModel) -> float:
    """Log of the mixture density at a single point."""
    phi_row = np.atleast_2d(np.asarray(phi_row, dtype=float))
    terms, _, _ = _log_terms(phi_row, np.atleast_1d(float(y)), np.atleast_1d(float(q)), noise)
    return float(logsumexp(terms[0]))


def nll_loss(phi, y, q, noise: NoiseModel) -> float:
    """Negative log likelihood summed over samples (samples independent)."""
    phi, y, q = _check_shapes(phi, y, q, noise)
    terms, _, _ = _log_terms(phi, y, q, noise)
    return float(-np.sum(logsumexp(terms, axis=1)))


def nll_gradients(phi, y, q, noise: NoiseModel):
    """Exact gradients of nll_loss w.r.t. phi, mu, log_sigma and q.

    Returns (dL_dphi (N, M), dL_dmu (M,), dL_dlogsigma (M,), dL_dq (N,)).
    dL_dphi feeds the network backward pass; dL_dq feeds polynomial
    coefficients when those are trained.
    """
    phi, y, q = _check_shapes(phi, y, q, noise)
    terms, log_norm, resid = _log_terms(phi, y, q, noise)
    lse = logsumexp(terms, axis=1)
    # Responsibilities: posterior component weights per sample. Zero-weight
    # components get -inf terms and hence exactly zero responsibility.
    resp = np.exp(terms - lse[:, None])
    d_phi = -np.exp(log_norm - lse[:, None])
    scaled = resid / noise.sigma[None, :] ** 2
    d_mu = -np.sum(resp * scaled, axis=0)
    d_q = -np.sum(resp * scaled, axis=1)
    d_log_sigma = -np.sum(resp * (resid * scaled - 1.0), axis=0)
    return d_phi, d_mu, d_log_sigma, d_q


def predict(phi, q, noise: NoiseModel) -> Prediction:
    """Closed-form mean and variance of the mixture at each point."""
    phi = np.atleast_2d(np.asarray(phi, dtype=float))
    phi, _, q = _check_shapes(phi, np.zeros(phi.shape[0]), q, noise)
    shifted_mean = phi @ noise.mu
    mean = shifted_mean + q
    variance = phi @ noise.sigma ** 2 + phi @ noise.mu ** 2 - shifted_mean ** 2
    bad = variance < -VARIANCE_CLAMP
    if np.any(bad):
        raise NumericalError(
            f"mixture variance {variance[bad].min()} below the rounding clamp"
        )
    variance = np.maximum(variance, 0.0)
    return Prediction(mean=mean, variance=variance, std=np.sqrt(variance))


def sample_generative(phi_row, q: float, noise: NoiseModel, rng,
                      size: int | None = None):
    """Draw from the mixture at one point: pick a component by its partition
    weight, then add that component's Gaussian noise to q.

    Scalar by default; ``size`` draws a vector of independent samples.
    """
    phi_row = np.asarray(phi_row, dtype=float)
    idx = rng.choice(phi_row.shape[0], size=size, p=phi_row)
    z = rng.standard_normal(size)
    out = q + noise.mu[idx] + noise.sigma[idx] * z
    return float(out) if size is None else out


def _check_shapes(phi, y, q, noise):
    phi = np.atleast_2d(np.asarray(phi, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    q = np.asarray(q, dtype=float)
    if q.ndim == 0:
        q = np.full(phi.shape[0], float(q))
    q = q.ravel()
    if phi.shape[1] != noise.num_components:
        raise DimensionError(
            f"phi has {phi.shape[1]} columns, noise model has {noise.num_components}"
        )
    if y.shape[0] != phi.shape[0] or q.shape[0] != phi.shape[0]:
        raise DimensionError(
            f"inconsistent lengths: phi {phi.shape[0]}, y {y.shape[0]}, q {q.shape[0]}"
        )
    return phi, y, q
