"""Seeded single-pass streams and the update-then-predict loop."""
from __future__ import annotations

import base64
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .adapters import (
    AdaptedPrediction,
    OgaConfig,
    TipAdapterConfig,
    oga_predict,
    tip_adapter_predict,
)
from .cache import CacheConfig, EntropyCache
from .embedding_io import EmbeddingSet, TextClassifier
from .errors import ValidationError
from .gaussian import INVERSE_METHODS, POLICIES, Estimator, empty_model, refit
from .zeroshot import ZeroShotOutput, zero_shot_predict

METHODS = ("zeroshot", "oga", "tip")
WORKERS_ENV = "OGA_WORKERS"
_EVAL_CHUNK = 256
_U64 = 1 << 64


def make_stream(n, seed: int) -> np.ndarray:
    """Uniform permutation of ``range(n)`` fixed by ``seed``.

    Fisher-Yates driven by raw 64-bit PCG64 outputs (seeded through
    SeedSequence) with rejection sampling for unbiased indices. Only the
    bit generator's raw stream is used, so the result does not depend on
    numpy's higher-level sampling routines.
    """
    if isinstance(n, EmbeddingSet):
        n = n.n
    if n < 1:
        raise ValidationError("stream needs at least one sample")
    bitgen = np.random.PCG64(int(seed) % _U64)
    perm = list(range(n))
    pool: list[int] = []
    for i in range(n - 1, 0, -1):
        bound = i + 1
        limit = _U64 - (_U64 % bound)
        while True:
            if not pool:
                pool = [int(v) for v in bitgen.random_raw(max(i, 16))][::-1]
            u = pool.pop()
            if u < limit:
                break
        j = u % bound
        perm[i], perm[j] = perm[j], perm[i]
    return np.array(perm, dtype=np.int64)


@dataclass(frozen=True)
class StreamConfig:
    seed: int = 0
    batch_size: int = 32
    method: str = "oga"
    cache: CacheConfig = field(default_factory=CacheConfig)
    oga: OgaConfig = field(default_factory=OgaConfig)
    tip: TipAdapterConfig = field(default_factory=TipAdapterConfig)
    checkpoint_every: int | None = None
    estimator: str = "auto"
    inverse_method: str = "cholesky"
    update_first: bool = True

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValidationError("batch_size must be >= 1")
        if self.method not in METHODS:
            raise ValidationError(f"unknown method {self.method!r}; choose from {METHODS}")
        if self.estimator not in POLICIES:
            raise ValidationError(f"unknown estimator policy {self.estimator!r}")
        if self.inverse_method not in INVERSE_METHODS:
            raise ValidationError(f"unknown inverse method {self.inverse_method!r}")
        if self.checkpoint_every is not None and self.checkpoint_every < 1:
            raise ValidationError("checkpoint_every must be positive")


class OnlineAdapter:
    """Stateful adaptation for one stream: cache, Gaussian model, predictor.

    Never sees ground-truth labels; callers feed features (and optionally
    their precomputed zero-shot outputs) batch by batch.
    """

    def __init__(self, classifier: TextClassifier, cfg: StreamConfig):
        self.classifier = classifier
        self.cfg = cfg
        k, d = classifier.n_classes, classifier.d
        self.cache = EntropyCache(k, d, cfg.cache)
        self.model = empty_model(k, d)
        self.snapshot = self.cache.snapshot()
        self.mutations = 0

    def predict(self, features, zs: ZeroShotOutput | None = None) -> AdaptedPrediction:
        """Predict with the current state; does not touch the cache."""
        features = np.asarray(features)
        if zs is None:
            zs = zero_shot_predict(features, self.classifier)
        method = self.cfg.method
        if method == "zeroshot":
            return AdaptedPrediction(zs.probs, zs.pseudo_label)
        if method == "oga":
            return oga_predict(features, zs, self.model, self.cfg.oga)
        return tip_adapter_predict(features, zs, self.snapshot, self.cfg.tip,
                                   self.classifier.temperature)

    def update(self, features, zs: ZeroShotOutput) -> int:
        if self.cfg.method == "zeroshot":
            return 0
        changed = self.cache.apply_batch(zs, features)
        if changed:
            self.snapshot = self.cache.snapshot()
            if self.cfg.method == "oga":
                self.model = refit(self.snapshot, self.cfg.estimator, self.cfg.inverse_method)
            self.mutations += changed
        return changed

    def step(self, features, zs: ZeroShotOutput | None = None) -> AdaptedPrediction:
        features = np.asarray(features)
        if zs is None:
            zs = zero_shot_predict(features, self.classifier)
        if self.cfg.update_first:
            self.update(features, zs)
            return self.predict(features, zs)
        out = self.predict(features, zs)
        self.update(features, zs)
        return out


@dataclass
class RunTrace:
    seed: int
    predictions: np.ndarray       # by sample index
    per_sample_correct: np.ndarray  # bool, by sample index
    final_accuracy: float
    checkpoints: list = field(default_factory=list)  # (samples_seen, accuracy)
    cache_mutations: int = 0
    model_history: list = field(default_factory=list)  # (samples_seen, n, estimator)

    def to_dict(self) -> dict:
        n = len(self.per_sample_correct)
        return {
            "seed": int(self.seed),
            "n_samples": n,
            "final_accuracy": float(self.final_accuracy),
            "cache_mutations": int(self.cache_mutations),
            # numpy packbits, big-endian bit order within each byte
            "per_sample_correct": base64.b64encode(
                np.packbits(self.per_sample_correct.astype(np.uint8)).tobytes()).decode("ascii"),
            "predictions": base64.b64encode(
                self.predictions.astype("<i4").tobytes()).decode("ascii"),
            "checkpoints": [[int(s), float(a)] for s, a in self.checkpoints],
            "model_history": [[int(s), int(m), str(e)] for s, m, e in self.model_history],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "RunTrace":
        n = data["n_samples"]
        bits = np.unpackbits(np.frombuffer(base64.b64decode(data["per_sample_correct"]), dtype=np.uint8))
        preds = np.frombuffer(base64.b64decode(data["predictions"]), dtype="<i4").astype(np.int64)
        return cls(
            seed=data["seed"],
            predictions=preds,
            per_sample_correct=bits[:n].astype(bool),
            final_accuracy=data["final_accuracy"],
            checkpoints=[tuple(c) for c in data["checkpoints"]],
            cache_mutations=data["cache_mutations"],
            model_history=[tuple(m) for m in data["model_history"]],
        )

    def __eq__(self, other):
        if not isinstance(other, RunTrace):
            return NotImplemented
        return self.to_dict() == other.to_dict()


def _evaluate_full(adapter: OnlineAdapter, features, zs: ZeroShotOutput, labels) -> float:
    correct = 0
    for start in range(0, len(zs), _EVAL_CHUNK):
        rows = slice(start, start + _EVAL_CHUNK)
        pred = adapter.predict(features[rows], zs.take(rows)).predicted
        correct += int(np.sum(pred == labels[rows]))
    return correct / len(zs)


def run_stream(eset: EmbeddingSet, classifier: TextClassifier, cfg: StreamConfig,
               zs: ZeroShotOutput | None = None) -> RunTrace:
    """One shuffled pass over ``eset`` in batches; labels are read only to score."""
    if eset.n == 0:
        raise ValidationError("empty embedding set")
    if eset.d != classifier.d or eset.n_classes != classifier.n_classes:
        raise ValidationError("embedding set and classifier disagree on d or K")
    features = eset.features
    if zs is None:
        # zero-shot is stateless, so computing it once for the whole set
        # keeps every row bit-identical regardless of batching
        zs = zero_shot_predict(features, classifier)
    order = make_stream(eset.n, cfg.seed)
    adapter = OnlineAdapter(classifier, cfg)
    predictions = np.empty(eset.n, dtype=np.int64)
    checkpoints = []
    history = []
    for b, start in enumerate(range(0, eset.n, cfg.batch_size)):
        idx = order[start:start + cfg.batch_size]
        out = adapter.step(features[idx], zs.take(idx))
        predictions[idx] = out.predicted
        seen = start + len(idx)
        if cfg.method == "oga":
            history.append((seen, adapter.model.n, adapter.model.estimator.value))
        if cfg.checkpoint_every and (b + 1) % cfg.checkpoint_every == 0:
            checkpoints.append((seen, _evaluate_full(adapter, features, zs, eset.labels)))
    correct = predictions == eset.labels
    return RunTrace(
        seed=cfg.seed,
        predictions=predictions,
        per_sample_correct=correct,
        final_accuracy=float(np.mean(correct)),
        checkpoints=checkpoints,
        cache_mutations=adapter.mutations,
        model_history=history,
    )


def default_workers() -> int:
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


def run_many(eset: EmbeddingSet, classifier: TextClassifier, cfg: StreamConfig,
             seeds, workers: int | None = None) -> list[RunTrace]:
    """Independent runs, one per seed, returned in seed-list order."""
    seeds = [int(s) for s in seeds]
    if len(set(seeds)) != len(seeds):
        raise ValidationError("seeds must be distinct")
    zs = zero_shot_predict(eset.features, classifier)

    def one(seed):
        return run_stream(eset, classifier, replace(cfg, seed=seed), zs)

    workers = workers or default_workers()
    if workers == 1:
        return [one(s) for s in seeds]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(one, seeds))


__all__ = [
    "METHODS", "OnlineAdapter", "RunTrace", "StreamConfig", "Estimator",
    "make_stream", "run_many", "run_stream",
]
