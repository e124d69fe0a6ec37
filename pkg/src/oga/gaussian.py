"""Class centroids, pooled covariance and precision estimation."""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import DegenerateCovariance, NumericsError, ValidationError

# features are unit-norm, so an absolute threshold on tr(Sigma) is meaningful
DEGENERATE_TRACE = 1e-12
JITTER_STEPS = (1e-8, 1e-7, 1e-6, 1e-5)


class Estimator(enum.Enum):
    RIDGE = "ridge"
    INVERSE = "inverse"
    IDENTITY_FALLBACK = "identity"


POLICIES = ("auto", "ridge", "inverse")
INVERSE_METHODS = ("cholesky", "pinv")


@dataclass(frozen=True, eq=False)
class GaussianModel:
    centroids: np.ndarray   # K x d, NaN rows for absent classes
    present: np.ndarray     # K bools
    covariance: np.ndarray  # d x d
    precision: np.ndarray   # d x d
    n: int
    estimator: Estimator

    @property
    def n_classes(self) -> int:
        return self.centroids.shape[0]

    @property
    def d(self) -> int:
        return self.centroids.shape[1]

    def __eq__(self, other):
        if not isinstance(other, GaussianModel):
            return NotImplemented
        return (
            self.n == other.n
            and self.estimator is other.estimator
            and np.array_equal(self.present, other.present)
            and np.array_equal(self.centroids, other.centroids, equal_nan=True)
            and np.array_equal(self.covariance, other.covariance)
            and np.array_equal(self.precision, other.precision)
        )


def empty_model(n_classes: int, d: int) -> GaussianModel:
    return GaussianModel(
        centroids=np.full((n_classes, d), np.nan),
        present=np.zeros(n_classes, dtype=bool),
        covariance=np.zeros((d, d)),
        precision=np.eye(d),
        n=0,
        estimator=Estimator.IDENTITY_FALLBACK,
    )


def fit_centroids(snapshot) -> tuple[np.ndarray, np.ndarray]:
    """Per-class means; returns (centroids with NaN rows, presence mask)."""
    if len(snapshot) == 0:
        raise ValidationError("snapshot has no classes")
    d = snapshot[0].shape[1]
    centroids = np.full((len(snapshot), d), np.nan)
    present = np.zeros(len(snapshot), dtype=bool)
    for k, feats in enumerate(snapshot):
        if len(feats):
            centroids[k] = np.mean(feats, axis=0)
            present[k] = True
    return centroids, present


def fit_covariance(snapshot, centroids) -> tuple[np.ndarray, int]:
    """Pooled within-class covariance with an ``n - 1`` denominator.

    Each sample is centred on its own class centroid. Raises
    DegenerateCovariance when fewer than two samples are cached.
    """
    n = sum(len(f) for f in snapshot)
    if n < 2:
        raise DegenerateCovariance(f"need at least 2 cached samples, have {n}")
    deviations = np.concatenate(
        [f - centroids[k] for k, f in enumerate(snapshot) if len(f)], axis=0
    )
    sigma = deviations.T @ deviations / (n - 1)
    return (sigma + sigma.T) / 2, n


def _spd_inverse(a: np.ndarray) -> np.ndarray:
    factor = scipy.linalg.cho_factor(a, lower=True, check_finite=False)
    inv = scipy.linalg.cho_solve(factor, np.eye(a.shape[0]), check_finite=False)
    return (inv + inv.T) / 2


def bayes_ridge_precision(sigma: np.ndarray, n: int, d: int | None = None) -> np.ndarray:
    """Shrinkage precision ``d * (n Sigma + tr(Sigma) I)^-1``."""
    sigma = np.asarray(sigma, dtype=np.float64)
    d = sigma.shape[0] if d is None else d
    trace = float(np.trace(sigma))
    if not trace > DEGENERATE_TRACE:
        raise DegenerateCovariance(f"trace {trace} too small for a ridge estimate")
    try:
        return d * _spd_inverse(n * sigma + trace * np.eye(d))
    except np.linalg.LinAlgError as exc:
        raise NumericsError("ridge system is not positive definite") from exc


def inverse_precision(sigma: np.ndarray, method: str = "cholesky") -> np.ndarray:
    """Sigma^-1 by Cholesky with escalating diagonal jitter, or pseudo-inverse."""
    sigma = np.asarray(sigma, dtype=np.float64)
    if method == "pinv":
        p = np.linalg.pinv(sigma, hermitian=True)
        return (p + p.T) / 2
    if method != "cholesky":
        raise ValidationError(f"unknown inverse method {method!r}")
    d = sigma.shape[0]
    scale = np.trace(sigma) / d
    for jitter in (0.0,) + JITTER_STEPS:
        try:
            return _spd_inverse(sigma + jitter * scale * np.eye(d))
        except np.linalg.LinAlgError:
            continue
    raise NumericsError("covariance not positive definite even after jitter")


def select_precision(
    sigma: np.ndarray | None,
    n: int,
    d: int,
    policy: str = "auto",
    inverse_method: str = "cholesky",
) -> tuple[np.ndarray, Estimator]:
    """Pick the precision estimate for ``n`` cached samples.

    ``auto`` uses the ridge estimate below ``4d`` samples and the plain
    inverse from ``4d`` on. Too few samples or a zero-trace covariance give
    the identity.
    """
    if policy not in POLICIES:
        raise ValidationError(f"unknown estimator policy {policy!r}")
    if sigma is None or n < 2 or not np.trace(sigma) > DEGENERATE_TRACE:
        return np.eye(d), Estimator.IDENTITY_FALLBACK
    use_ridge = policy == "ridge" or (policy == "auto" and n < 4 * d)
    if use_ridge:
        return bayes_ridge_precision(sigma, n, d), Estimator.RIDGE
    return inverse_precision(sigma, inverse_method), Estimator.INVERSE


def refit(snapshot, policy: str = "auto", inverse_method: str = "cholesky") -> GaussianModel:
    """Recompute centroids, covariance and precision from a cache snapshot."""
    centroids, present = fit_centroids(snapshot)
    d = centroids.shape[1]
    try:
        sigma, n = fit_covariance(snapshot, centroids)
    except DegenerateCovariance:
        sigma, n = np.zeros((d, d)), sum(len(f) for f in snapshot)
    precision, used = select_precision(sigma, n, d, policy, inverse_method)
    for arr in (centroids, present, sigma, precision):
        arr.setflags(write=False)
    return GaussianModel(centroids, present, sigma, precision, n, used)
