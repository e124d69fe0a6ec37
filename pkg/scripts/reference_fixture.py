"""Reference evaluation of the synthetic fixtures.

Zero-shot accuracy is recomputed with plain Python loops over the generated
vectors (no package scoring code) so it can serve as an independent baseline.
Stream numbers come from the package's run loop and are the values frozen in
the test suite.
"""
import argparse
import math

from oga.embedding_io import generate_synthetic
from oga.metrics import summarize
from oga.stream import StreamConfig, run_many


def brute_force_zero_shot(eset, clf):
    correct = 0
    for row, label in zip(eset.features.tolist(), eset.labels.tolist()):
        best_k, best = 0, -math.inf
        for k, t in enumerate(clf.class_embeddings.tolist()):
            s = sum(a * b for a, b in zip(row, t))
            if s > best:
                best_k, best = k, s
        correct += best_k == label
    return correct / len(eset.labels)


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--runs", type=int, default=100)
    args = parser.parse_args()

    small = generate_synthetic(7, 5, 16, 200, 0.3, 0.1)
    print("K=5 fixture zero-shot accuracy:", repr(brute_force_zero_shot(*small)))
    r = summarize(run_many(*small, StreamConfig(method="oga"), range(args.runs)))
    print(f"K=5 fixture OGA: mean={r.mean_accuracy!r} std={r.std_accuracy!r} eta={r.eta!r}")

    big = generate_synthetic(7, 20, 32, 100, 0.3, 0.15)
    print("K=20 fixture zero-shot accuracy:", repr(brute_force_zero_shot(*big)))
    for method in ("oga", "tip"):
        r = summarize(run_many(*big, StreamConfig(method=method), range(args.runs)))
        print(f"K=20 fixture {method}: mean={r.mean_accuracy!r} std={r.std_accuracy!r} "
              f"eta={r.eta!r} min={min(r.per_run)!r} max={max(r.per_run)!r}")


if __name__ == "__main__":
    main()
