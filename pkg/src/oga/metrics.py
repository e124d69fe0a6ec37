"""Run aggregation: mean, spread, expected tail accuracy, win rate."""
from __future__ import annotations

import math
import statistics
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError


@dataclass(frozen=True)
class MetricsReport:
    mean_accuracy: float
    std_accuracy: float
    eta: float
    n_runs: int
    tail_size: int
    per_run: tuple
    std_defined: bool = True

    def to_dict(self) -> dict:
        return {
            "mean_accuracy": self.mean_accuracy,
            "std_accuracy": self.std_accuracy,
            "eta": self.eta,
            "n_runs": self.n_runs,
            "tail_size": self.tail_size,
            "std_defined": self.std_defined,
            "per_run": list(self.per_run),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "MetricsReport":
        return cls(
            mean_accuracy=data["mean_accuracy"],
            std_accuracy=data["std_accuracy"],
            eta=data["eta"],
            n_runs=data["n_runs"],
            tail_size=data["tail_size"],
            per_run=tuple(data["per_run"]),
            std_defined=data["std_defined"],
        )


def tail_size(n_runs: int, fraction: float = 0.1) -> int:
    return max(1, math.floor(fraction * n_runs + 1e-9))


def expected_tail_accuracy(accuracies, fraction: float = 0.1) -> float:
    """Mean of the worst ``max(1, floor(fraction * N))`` accuracies.

    Taking a fixed count (rather than thresholding at the 10th percentile)
    keeps the tail size well defined under ties.
    """
    acc = np.asarray(accuracies, dtype=np.float64).ravel()
    if acc.size == 0:
        raise ValidationError("no accuracies given")
    if not 0 < fraction <= 1:
        raise ValidationError(f"fraction must be in (0, 1], got {fraction}")
    worst = np.sort(acc)[: tail_size(acc.size, fraction)]
    # exact rational means, rounded once; the clamp guards the final rounding
    return float(min(statistics.mean(worst.tolist()), statistics.mean(acc.tolist())))


def summarize(traces, fraction: float = 0.1) -> MetricsReport:
    """Aggregate run traces (or raw accuracies) in the given order."""
    traces = list(traces)
    if not traces:
        raise ValidationError("no runs to summarize")
    acc = np.array([getattr(t, "final_accuracy", t) for t in traces], dtype=np.float64)
    defined = acc.size > 1
    return MetricsReport(
        mean_accuracy=float(statistics.mean(acc.tolist())),
        std_accuracy=float(statistics.stdev(acc.tolist())) if defined else 0.0,
        eta=expected_tail_accuracy(acc, fraction),
        n_runs=int(acc.size),
        tail_size=tail_size(acc.size, fraction),
        per_run=tuple(float(a) for a in acc),
        std_defined=defined,
    )


def win_rate(a, b) -> float:
    """Fraction of aligned runs where ``a`` is strictly better than ``b``."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValidationError(f"length mismatch: {a.shape} vs {b.shape}")
    if a.size == 0:
        raise ValidationError("no runs to compare")
    return float(np.mean(a > b))
