"""Cosine logits, temperature softmax, entropy and pseudo-labels."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .embedding_io import TextClassifier
from .errors import NumericsError, ValidationError


@dataclass(frozen=True)
class ZeroShotOutput:
    logits: np.ndarray        # B x K cosine similarities
    log_probs: np.ndarray     # B x K, log of the soft labels
    probs: np.ndarray         # B x K soft labels
    entropy: np.ndarray       # B, nats
    pseudo_label: np.ndarray  # B

    def __len__(self):
        return self.logits.shape[0]

    def take(self, rows) -> "ZeroShotOutput":
        return ZeroShotOutput(
            self.logits[rows], self.log_probs[rows], self.probs[rows],
            self.entropy[rows], self.pseudo_label[rows],
        )


def compute_logits(batch: np.ndarray, classifier: TextClassifier) -> np.ndarray:
    batch = np.asarray(batch, dtype=np.float64)
    if batch.ndim != 2 or batch.shape[1] != classifier.d:
        raise ValidationError(
            f"batch shape {batch.shape} incompatible with classifier dimension {classifier.d}"
        )
    return batch @ classifier.class_embeddings.astype(np.float64).T


def log_softmax(logits: np.ndarray, temperature: float = 1.0) -> np.ndarray:
    """Row-wise log-softmax of ``logits / temperature`` with max subtraction."""
    logits = np.asarray(logits, dtype=np.float64)
    if not np.all(np.isfinite(logits)):
        raise NumericsError("non-finite logit")
    if not temperature > 0:
        raise ValidationError(f"temperature must be positive, got {temperature}")
    z = logits / temperature
    z = z - z.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


def softmax(logits: np.ndarray, temperature: float = 1.0) -> np.ndarray:
    return np.exp(log_softmax(logits, temperature))


def shannon_entropy(probs: np.ndarray) -> np.ndarray | float:
    """Entropy in nats, with 0 log 0 taken as 0. Works row-wise on matrices."""
    probs = np.asarray(probs, dtype=np.float64)
    if np.any(probs < 0):
        raise ValidationError("negative probability")
    if not np.allclose(probs.sum(axis=-1), 1.0, atol=1e-6, rtol=0):
        raise ValidationError("probabilities do not sum to 1")
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(probs > 0, probs * np.log(probs), 0.0)
    ent = np.maximum(-terms.sum(axis=-1), 0.0)
    return float(ent) if ent.ndim == 0 else ent


def _entropy_from_log(log_probs: np.ndarray) -> np.ndarray:
    probs = np.exp(log_probs)
    with np.errstate(invalid="ignore"):
        terms = np.where(probs > 0, probs * log_probs, 0.0)
    return np.maximum(-terms.sum(axis=-1), 0.0)


def zero_shot_predict(batch: np.ndarray, classifier: TextClassifier) -> ZeroShotOutput:
    logits = compute_logits(np.asarray(batch).reshape(-1, classifier.d), classifier)
    if logits.shape[0] == 0:
        k = classifier.n_classes
        empty = np.empty((0, k))
        return ZeroShotOutput(empty, empty.copy(), empty.copy(), np.empty(0), np.empty(0, dtype=np.int64))
    log_probs = log_softmax(logits, classifier.temperature)
    return ZeroShotOutput(
        logits=logits,
        log_probs=log_probs,
        probs=np.exp(log_probs),
        entropy=_entropy_from_log(log_probs),
        # np.argmax returns the first maximum, i.e. the lowest class index
        pseudo_label=np.argmax(log_probs, axis=1).astype(np.int64),
    )
