"""Prediction rules layered on zero-shot outputs.

The OGA rule multiplies the zero-shot soft label by the Gaussian likelihood
raised to ``nu`` and renormalizes. With a shared covariance every
class-independent factor of the density cancels, so only the quadratic form
``-1/2 (f - mu_k)^T P (f - mu_k)`` is needed.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .gaussian import GaussianModel
from .zeroshot import ZeroShotOutput, log_softmax


@dataclass(frozen=True)
class OgaConfig:
    nu: float = 0.05

    def __post_init__(self):
        if not self.nu >= 0:
            raise ValidationError(f"nu must be >= 0, got {self.nu}")


@dataclass(frozen=True)
class TipAdapterConfig:
    alpha: float = 2.0
    beta: float = 5.0  # not given for the baseline; implementation default

    def __post_init__(self):
        if not self.beta > 0:
            raise ValidationError(f"beta must be > 0, got {self.beta}")


@dataclass(frozen=True)
class AdaptedPrediction:
    posterior: np.ndarray  # B x K
    predicted: np.ndarray  # B


def log_likelihood_quadratic(features, model: GaussianModel) -> np.ndarray:
    """``q_k = -1/2 (f - mu_k)^T P (f - mu_k)`` for a vector or a B x d batch.

    Absent classes get the smallest q among present classes, so an unseen
    class is never favoured by the likelihood term. With no class present
    every q is 0.
    """
    features = np.asarray(features, dtype=np.float64)
    single = features.ndim == 1
    f = features.reshape(-1, model.d)
    q = np.zeros((f.shape[0], model.n_classes))
    if model.present.any():
        mu = model.centroids[model.present]
        diff = f[:, None, :] - mu[None, :, :]  # B x Kp x d
        q_present = -0.5 * np.einsum("bkd,bkd->bk", diff @ model.precision, diff)
        q[:, model.present] = q_present
        q[:, ~model.present] = q_present.min(axis=1, keepdims=True)
    return q[0] if single else q


def map_posterior(prior, quadratics, nu: float) -> np.ndarray:
    """Posterior proportional to ``exp(nu * q_k) * prior_k``.

    Works on a vector or row-wise on matrices. ``nu == 0`` returns the prior
    unchanged.
    """
    prior = np.asarray(prior, dtype=np.float64)
    if np.any(prior < 0):
        raise ValidationError("negative prior probability")
    sums = prior.sum(axis=-1)
    if np.any(sums == 0):
        raise ValidationError("prior is identically zero")
    if not np.allclose(sums, 1.0, atol=1e-6, rtol=0):
        raise ValidationError("prior does not sum to 1")
    if nu == 0:
        return prior.copy()
    with np.errstate(divide="ignore"):
        log_prior = np.log(prior)
    return _map_from_log_prior(log_prior, np.asarray(quadratics, dtype=np.float64), nu)


def _map_from_log_prior(log_prior: np.ndarray, q: np.ndarray, nu: float) -> np.ndarray:
    # -inf prior entries stay at zero mass; the max over a row is finite
    # because at least one prior entry is positive
    z = nu * q + log_prior
    z = z - z.max(axis=-1, keepdims=True)
    w = np.exp(z)
    return w / w.sum(axis=-1, keepdims=True)


def oga_predict(batch, zs: ZeroShotOutput, model: GaussianModel, cfg: OgaConfig) -> AdaptedPrediction:
    if len(zs) == 0:
        k = model.n_classes
        return AdaptedPrediction(np.empty((0, k)), np.empty(0, dtype=np.int64))
    if cfg.nu == 0 or not model.present.any():
        return AdaptedPrediction(zs.probs.copy(), zs.pseudo_label.copy())
    q = log_likelihood_quadratic(np.asarray(batch).reshape(len(zs), -1), model)
    posterior = _map_from_log_prior(zs.log_probs, q, cfg.nu)
    return AdaptedPrediction(posterior, np.argmax(posterior, axis=1).astype(np.int64))


def tip_adapter_logits(features, zs_logits, snapshot, cfg: TipAdapterConfig) -> np.ndarray:
    """Zero-shot logits plus ``alpha * sum_m exp(-beta (1 - f . f_m))`` per class.

    Accepts one feature (vector) or a batch (rows); empty classes add nothing.
    """
    f = np.asarray(features, dtype=np.float64)
    single = f.ndim == 1
    f = f.reshape(-1, f.shape[-1])
    logits = np.array(zs_logits, dtype=np.float64).reshape(f.shape[0], -1)
    if cfg.alpha != 0:
        for k, cached in enumerate(snapshot):
            if len(cached):
                affinity = np.exp(-cfg.beta * (1.0 - f @ np.asarray(cached, dtype=np.float64).T))
                logits[:, k] += cfg.alpha * affinity.sum(axis=1)
    return logits[0] if single else logits


def tip_adapter_predict(batch, zs: ZeroShotOutput, snapshot, cfg: TipAdapterConfig,
                        temperature: float) -> AdaptedPrediction:
    if len(zs) == 0:
        k = zs.logits.shape[1]
        return AdaptedPrediction(np.empty((0, k)), np.empty(0, dtype=np.int64))
    logits = tip_adapter_logits(np.asarray(batch).reshape(len(zs), -1), zs.logits, snapshot, cfg)
    posterior = np.exp(log_softmax(logits, temperature))
    return AdaptedPrediction(posterior, np.argmax(logits, axis=1).astype(np.int64))
