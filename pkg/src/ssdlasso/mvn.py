"""Multivariate normal box probabilities, possibly rank deficient.

Every criterion in this package reduces to ``P(lower <= X <= upper)`` for a
Gaussian ``X`` whose covariance may be singular (inactive-block conditional
covariances of supersaturated designs never have full rank). Two code paths:

* strictly positive definite covariance: sequential-conditioning transform to
  the unit cube (Genz-style), integrated with randomized scrambled Sobol
  points. The integrand is smooth, so accuracy is far better than the plain
  indicator estimate.
* rank-deficient covariance: eigenfactorize, write ``X = mean + B e`` with
  ``e`` standard normal of dimension ``rank``, and average the indicator of
  all ``2 d`` half-space constraints over randomized Sobol points.

Both paths report ``std_error`` as the standard deviation of the per-
randomization estimates divided by ``sqrt(randomizations)`` and are bit-for-bit
deterministic given ``(seed, randomization index)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr, ndtri
from scipy.stats import qmc

from .errors import DimensionMismatch, NotPsd
from .parallel import derive_seed

__all__ = [
    "GaussianRegion",
    "QmcConfig",
    "ProbabilityEstimate",
    "norm_cdf",
    "norm_pdf",
    "norm_ppf",
    "factorize_psd",
    "box_probability",
    "one_factor_box_probability",
]

_SQRT_2PI = float(np.sqrt(2.0 * np.pi))
_UNIT_EPS = 1e-15


def norm_cdf(x):
    """Standard normal CDF; exact 0/1 at -inf/+inf, |error| < 1e-15."""
    return ndtr(x)


def norm_pdf(x):
    """Standard normal density."""
    return np.exp(-0.5 * np.square(x)) / _SQRT_2PI


def norm_ppf(q):
    """Standard normal quantile function."""
    return ndtri(q)


@dataclass(frozen=True)
class QmcConfig:
    """Budget and determinism knobs for the QMC integrator.

    ``sample_budget`` is points per randomization; total points are
    ``sample_budget * randomizations``. ``rank_tolerance`` is the relative
    eigenvalue cutoff separating "numerically zero" directions.
    """

    sample_budget: int = 4096
    randomizations: int = 8
    seed: int = 0
    rank_tolerance: float = 1e-10

    def __post_init__(self) -> None:
        if self.sample_budget < 256:
            raise ValueError("sample_budget must be >= 256")
        if self.randomizations < 8:
            raise ValueError("randomizations must be >= 8")
        if not (0.0 < self.rank_tolerance <= 1e-4):
            raise ValueError("rank_tolerance must lie in (0, 1e-4]")


@dataclass(frozen=True)
class ProbabilityEstimate:
    """A probability in [0, 1] with its Monte-Carlo standard error.

    ``std_error == 0`` only for exact (univariate or analytically separable)
    results. ``rank_used`` records the covariance rank the estimate relied on.
    """

    value: float
    std_error: float
    rank_used: int


@dataclass(frozen=True)
class GaussianRegion:
    """Mean, covariance and axis-aligned box bounds of one integration task."""

    mean: np.ndarray
    covariance: np.ndarray
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "mean", np.asarray(self.mean, dtype=float))
        object.__setattr__(self, "covariance", np.asarray(self.covariance, dtype=float))
        object.__setattr__(self, "lower", np.asarray(self.lower, dtype=float))
        object.__setattr__(self, "upper", np.asarray(self.upper, dtype=float))
        d = self.mean.shape[0]
        if self.covariance.shape != (d, d):
            raise DimensionMismatch(
                f"covariance shape {self.covariance.shape} does not match mean length {d}"
            )
        if self.lower.shape != (d,) or self.upper.shape != (d,):
            raise DimensionMismatch("bounds must have the same length as the mean")
        sym_err = np.abs(self.covariance - self.covariance.T)
        scale = max(1.0, float(np.abs(self.covariance).max(initial=0.0)))
        if sym_err.max(initial=0.0) > 1e-10 * scale:
            raise DimensionMismatch("covariance is not symmetric within 1e-10")
        if np.any(self.lower > self.upper):
            raise ValueError("lower bound exceeds upper bound")

    @property
    def dim(self) -> int:
        return self.mean.shape[0]


def factorize_psd(covariance: np.ndarray, rank_tolerance: float) -> tuple[np.ndarray, int]:
    """Eigen-factor a symmetric nonnegative-definite matrix.

    Returns ``(factor, rank)`` with ``factor @ factor.T ~= covariance``;
    the ``rank`` columns are orthogonal eigenvectors scaled by the square
    roots of their eigenvalues.

    Raises :class:`NotPsd` when an eigenvalue falls below
    ``-1e-8 * max(eigenvalue)``.
    """
    cov = np.asarray(covariance, dtype=float)
    cov = 0.5 * (cov + cov.T)
    if cov.size == 0:
        return np.zeros((0, 0)), 0
    eigvals, eigvecs = np.linalg.eigh(cov)
    top = float(eigvals.max(initial=0.0))
    if top <= 0.0:
        if eigvals.min(initial=0.0) < -1e-12:
            raise NotPsd(f"matrix is negative definite (min eigenvalue {eigvals.min()})")
        return np.zeros((cov.shape[0], 0)), 0
    if eigvals.min() < -1e-8 * top:
        raise NotPsd(
            f"eigenvalue {eigvals.min():.3e} below -1e-8 * max eigenvalue {top:.3e}"
        )
    keep = eigvals > rank_tolerance * top
    rank = int(np.count_nonzero(keep))
    factor = eigvecs[:, keep] * np.sqrt(np.clip(eigvals[keep], 0.0, None))
    return factor, rank


def _sobol_uniform(dim: int, n: int, seed: int) -> np.ndarray:
    """Scrambled Sobol points in the open unit cube, shape (n, dim)."""
    engine = qmc.Sobol(d=dim, scramble=True, seed=int(seed) & ((1 << 63) - 1))
    pts = engine.random(n)
    return np.clip(pts, _UNIT_EPS, 1.0 - _UNIT_EPS)


def std_normal_qmc(dim: int, n: int, seed: int) -> np.ndarray:
    """Scrambled-Sobol standard normal draws, shape (n, dim)."""
    return ndtri(_sobol_uniform(dim, n, seed))


def genz_estimates(
    chol: np.ndarray,
    lower: np.ndarray,
    upper: np.ndarray,
    config: QmcConfig,
    seed_tag: object = "genz",
) -> np.ndarray:
    """Per-randomization Genz estimates for a batch of centered boxes.

    ``chol`` is the lower Cholesky factor of a positive-definite covariance;
    ``lower``/``upper`` have shape (batch, d) and may contain infinities.
    Returns an array of shape (batch, randomizations). The first variable is
    integrated analytically, so the QMC dimension is d - 1.
    """
    lower = np.atleast_2d(np.asarray(lower, dtype=float))
    upper = np.atleast_2d(np.asarray(upper, dtype=float))
    batch, d = lower.shape
    nrand = config.randomizations
    out = np.empty((batch, nrand))
    if d == 1:
        col = ndtr(upper[:, 0] / chol[0, 0]) - ndtr(lower[:, 0] / chol[0, 0])
        out[:] = col[:, None]
        return out
    n = config.sample_budget
    a0 = ndtr(lower[:, 0] / chol[0, 0])[:, None]
    b0 = ndtr(upper[:, 0] / chol[0, 0])[:, None]
    for r in range(nrand):
        u = _sobol_uniform(d - 1, n, derive_seed(config.seed, seed_tag, r)).T
        c = np.broadcast_to(a0, (batch, n)).copy()
        dd = np.broadcast_to(b0, (batch, n)).copy()
        pv = dd - c
        y = np.empty((d - 1, batch, n))
        for i in range(1, d):
            z = np.clip(c + u[i - 1][None, :] * (dd - c), _UNIT_EPS, 1.0 - _UNIT_EPS)
            y[i - 1] = ndtri(z)
            s = np.einsum("j,jbn->bn", chol[i, :i], y[:i])
            ct = chol[i, i]
            c = ndtr((lower[:, i][:, None] - s) / ct)
            dd = ndtr((upper[:, i][:, None] - s) / ct)
            pv = pv * np.clip(dd - c, 0.0, 1.0)
        out[:, r] = pv.mean(axis=1)
    return out


def _indicator_estimates(
    mean: np.ndarray,
    factor: np.ndarray,
    lower: np.ndarray,
    upper: np.ndarray,
    config: QmcConfig,
    seed_tag: object,
) -> np.ndarray:
    """Per-randomization indicator-QMC estimates for ``mean + factor @ e``."""
    rank = factor.shape[1]
    n = config.sample_budget
    out = np.empty(config.randomizations)
    for r in range(config.randomizations):
        e = std_normal_qmc(rank, n, derive_seed(config.seed, seed_tag, r))
        x = mean[None, :] + e @ factor.T
        ok = np.all((x >= lower[None, :]) & (x <= upper[None, :]), axis=1)
        out[r] = ok.mean()
    return out


def box_probability(region: GaussianRegion, config: QmcConfig) -> ProbabilityEstimate:
    """Probability that the Gaussian of ``region`` falls inside its box.

    Exact (zero std error) for dimension <= 1 and for rank-0 covariance;
    otherwise QMC with the path chosen by the covariance rank. Deterministic
    for a fixed ``config``.
    """
    d = region.dim
    if d == 0:
        return ProbabilityEstimate(1.0, 0.0, 0)
    lo = region.lower - region.mean
    hi = region.upper - region.mean
    if d == 1:
        sd = float(np.sqrt(max(region.covariance[0, 0], 0.0)))
        if sd == 0.0:
            inside = float(lo[0] <= 0.0 <= hi[0])
            return ProbabilityEstimate(inside, 0.0, 0)
        value = float(ndtr(hi[0] / sd) - ndtr(lo[0] / sd))
        return ProbabilityEstimate(min(max(value, 0.0), 1.0), 0.0, 1)
    factor, rank = factorize_psd(region.covariance, config.rank_tolerance)
    if rank == 0:
        inside = float(np.all(lo <= 0.0) and np.all(hi >= 0.0))
        return ProbabilityEstimate(inside, 0.0, 0)
    if rank == d:
        try:
            chol = np.linalg.cholesky(0.5 * (region.covariance + region.covariance.T))
        except np.linalg.LinAlgError:
            chol = None
        if chol is not None:
            ests = genz_estimates(chol, lo[None, :], hi[None, :], config)[0]
            return _summarize(ests, rank)
    ests = _indicator_estimates(np.zeros(d), factor, lo, hi, config, "rankdef")
    return _summarize(ests, rank)


def _summarize(estimates: np.ndarray, rank: int) -> ProbabilityEstimate:
    value = float(np.clip(estimates.mean(), 0.0, 1.0))
    std_error = float(estimates.std(ddof=1) / np.sqrt(len(estimates)))
    return ProbabilityEstimate(value, std_error, rank)


def one_factor_box_probability(
    mean: np.ndarray,
    noise_var: float,
    loading: np.ndarray,
    lower: np.ndarray,
    upper: np.ndarray,
    nodes: int = 1201,
) -> float:
    """Exact box probability for covariance ``noise_var * I + loading loading^T``.

    Writing ``X = mean + sqrt(noise_var) xi + loading s`` with independent
    standard normals reduces the box probability to a one-dimensional
    integral, evaluated by trapezoid quadrature on s in [-10, 10]; the
    integrand is smooth and Gaussian-tailed, so the rule converges
    geometrically (errors ~1e-12 at the default node count).

    Supports batched means/bounds of shape (batch, d).
    """
    mean = np.atleast_2d(np.asarray(mean, dtype=float))
    lower = np.atleast_2d(np.asarray(lower, dtype=float))
    upper = np.atleast_2d(np.asarray(upper, dtype=float))
    if noise_var <= 0.0:
        raise NotPsd("one-factor quadrature requires positive noise variance")
    s = np.linspace(-10.0, 10.0, nodes)
    w = norm_pdf(s) * (s[1] - s[0])
    sd = float(np.sqrt(noise_var))
    shift = np.outer(s, np.asarray(loading, dtype=float))  # (nodes, d)
    lo = (lower[:, None, :] - mean[:, None, :] - shift[None, :, :]) / sd
    hi = (upper[:, None, :] - mean[:, None, :] - shift[None, :, :]) / sd
    cell = np.clip(ndtr(hi) - ndtr(lo), 0.0, 1.0)
    prod = np.prod(cell, axis=2)  # (batch, nodes)
    vals = prod @ w
    return np.clip(vals, 0.0, 1.0)
