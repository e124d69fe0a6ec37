"""Accuracy-vs-stream traces on the synthetic fixture for several nu values.

Writes long-format CSV (nu, run, seed, samples_seen, accuracy) and prints the
mean curve's early value, minimum and plateau per nu.
"""
import argparse

import numpy as np

from oga.harness import ExperimentConfig, emit_trace_plot_data, run_experiment


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--nu", type=float, nargs="+", default=[0.0, 0.05, 0.25, 1.0])
    parser.add_argument("--runs", type=int, default=100)
    parser.add_argument("--every", type=int, default=1, help="batches between checkpoints")
    parser.add_argument("--out", default="nu_traces.csv")
    args = parser.parse_args()

    cfg = ExperimentConfig(
        name="synthetic-k20",
        synthetic=dict(seed=7, k=20, d=32, per_class=100, dispersion=0.3, text_noise=0.15),
        methods=("oga",), n_runs=args.runs, nus=tuple(args.nu), checkpoint_every=args.every,
    )
    report = run_experiment(cfg)
    by_nu = {}
    for res in report.cells:
        traces = report.traces[res.cell.label]
        by_nu[res.cell.nu] = traces
        curve = np.mean([[a for _, a in t.checkpoints] for t in traces], axis=0)
        print(f"nu={res.cell.nu:<5g} first={curve[0]:.4f} min={curve.min():.4f} plateau={curve[-1]:.4f}")
    print("wrote", emit_trace_plot_data(by_nu, args.out))


if __name__ == "__main__":
    main()
