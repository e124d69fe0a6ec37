"""Per-class bounded cache of confident (low zero-shot entropy) samples."""
from __future__ import annotations

import csv
import enum
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .zeroshot import ZeroShotOutput


@dataclass(frozen=True)
class CacheConfig:
    shots_per_class: int = 8

    def __post_init__(self):
        if self.shots_per_class < 1:
            raise ValidationError("shots_per_class must be >= 1")


class Outcome(enum.Enum):
    APPENDED = "appended"
    REPLACED = "replaced"
    REJECTED = "rejected"


@dataclass(frozen=True)
class InsertOutcome:
    kind: Outcome
    evicted_entropy: float | None = None

    @property
    def mutated(self) -> bool:
        return self.kind is not Outcome.REJECTED


class EntropyCache:
    """Entropy-priority store, one bounded list per class.

    Entries within a class keep insertion order; a replacement overwrites the
    evicted slot in place, so the oldest maximum-entropy entry is the one that
    goes when entropies tie.
    """

    def __init__(self, n_classes: int, d: int, config: CacheConfig | None = None):
        if n_classes < 1 or d < 1:
            raise ValidationError("cache needs n_classes >= 1 and d >= 1")
        self.n_classes = n_classes
        self.d = d
        self.config = config or CacheConfig()
        self._features: list[list[np.ndarray]] = [[] for _ in range(n_classes)]
        self._entropies: list[list[float]] = [[] for _ in range(n_classes)]
        # insertion stamps, used to find the oldest among tied maxima
        self._stamps: list[list[int]] = [[] for _ in range(n_classes)]
        self._clock = 0

    @property
    def capacity(self) -> int:
        return self.config.shots_per_class

    def __len__(self):
        return sum(len(e) for e in self._entropies)

    def class_size(self, k: int) -> int:
        return len(self._entropies[k])

    def entropies(self, k: int) -> list[float]:
        return list(self._entropies[k])

    def try_insert(self, feature, pseudo_label: int, entropy: float) -> InsertOutcome:
        k = int(pseudo_label)
        if not 0 <= k < self.n_classes:
            raise ValidationError(f"class index {pseudo_label} outside [0, {self.n_classes})")
        entropy = float(entropy)
        if not np.isfinite(entropy):
            raise ValidationError("entropy must be finite")
        feature = np.array(feature, dtype=np.float64).reshape(self.d)
        ents = self._entropies[k]
        self._clock += 1
        if len(ents) < self.capacity:
            self._features[k].append(feature)
            ents.append(entropy)
            self._stamps[k].append(self._clock)
            return InsertOutcome(Outcome.APPENDED)
        worst = max(ents)
        if entropy >= worst:
            return InsertOutcome(Outcome.REJECTED)
        stamps = self._stamps[k]
        slot = min((i for i, e in enumerate(ents) if e == worst), key=stamps.__getitem__)
        self._features[k][slot] = feature
        ents[slot] = entropy
        stamps[slot] = self._clock
        return InsertOutcome(Outcome.REPLACED, worst)

    def apply_batch(self, batch: ZeroShotOutput, features) -> int:
        """Offer each row in stream order; return the number of mutations."""
        features = np.asarray(features)
        if features.shape[0] != len(batch):
            raise ValidationError("zero-shot output and features are not row-aligned")
        mutations = 0
        for i in range(len(batch)):
            outcome = self.try_insert(features[i], batch.pseudo_label[i], batch.entropy[i])
            mutations += outcome.mutated
        return mutations

    def snapshot(self) -> tuple[np.ndarray, ...]:
        """Read-only per-class feature matrices (``0 x d`` for empty classes)."""
        out = []
        for feats in self._features:
            m = np.array(feats, dtype=np.float64).reshape(len(feats), self.d)
            m.setflags(write=False)
            out.append(m)
        return tuple(out)

    def dump_csv(self, path) -> None:
        """Debug dump: one row per entry, ``class,entropy,v1..vd``."""
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["class", "entropy"] + [f"v{j + 1}" for j in range(self.d)])
            for k in range(self.n_classes):
                for feat, ent in zip(self._features[k], self._entropies[k]):
                    writer.writerow([k, repr(ent)] + [repr(float(v)) for v in feat])
