"""Command line entry point: ``oga run | synth | report``."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .embedding_io import DEFAULT_TEMPERATURE, generate_synthetic, save_embedding_set, save_text_classifier
from .errors import ConfigError, FormatError, IoError, ValidationError
from .harness import emit_report, emit_trace_plot_data, load_config, load_report, run_experiment

log = logging.getLogger("oga")


def _cmd_run(args) -> int:
    cfg = load_config(args.config)
    fmt = args.format or cfg.output_format
    out = args.out or cfg.output or f"{cfg.name}_report.{'md' if fmt == 'markdown' else fmt}"
    report = run_experiment(cfg, workers=args.workers, cache_dump_dir=args.dump_cache)
    emit_report(report, out, fmt)
    log.info("wrote %s", out)
    if args.traces:
        if cfg.checkpoint_every is None:
            raise ConfigError("--traces needs checkpoint_every in the config")
        by_nu = {res.cell.nu: report.traces[res.cell.label]
                 for res in report.cells if res.cell.method == "oga"}
        emit_trace_plot_data(by_nu, args.traces)
        log.info("wrote %s", args.traces)
    for res in report.cells:
        m = res.metrics
        print(f"{res.cell.label:45s} mean={100 * m.mean_accuracy:6.2f} "
              f"std={100 * m.std_accuracy:5.2f} eta={100 * m.eta:6.2f}")
    return 0


def _cmd_synth(args) -> int:
    eset, clf = generate_synthetic(args.seed, args.k, args.d, args.per_class,
                                   args.dispersion, args.text_noise, args.temperature)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    ext = "ogae" if args.format == "binary" else "csv"
    save_embedding_set(out / f"embeddings.{ext}", eset, args.format)
    save_text_classifier(out / f"classifier.{'ogat' if args.format == 'binary' else 'csv'}", clf, args.format)
    print(f"wrote N={eset.n} d={eset.d} K={eset.n_classes} to {out}")
    return 0


def _cmd_report(args) -> int:
    reports = [r for path in args.inputs for r in load_report(path)]
    fmt = "markdown" if args.format == "md" else args.format
    if args.out:
        emit_report(reports, args.out, fmt)
    else:
        from .harness import render_csv, render_json, render_markdown
        if fmt == "json":
            sys.stdout.write("".join(render_json(r) for r in reports))
        elif fmt == "csv":
            sys.stdout.write(render_csv(reports))
        else:
            sys.stdout.write(render_markdown(reports))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="oga", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment matrix from a config file")
    run.add_argument("--config", required=True)
    run.add_argument("--out", help="report path (overrides 'output' in the config)")
    run.add_argument("--format", choices=["json", "csv", "markdown"])
    run.add_argument("--workers", type=int, help="worker threads (default: $OGA_WORKERS or 1)")
    run.add_argument("--traces", help="write checkpoint traces of OGA cells as CSV")
    run.add_argument("--dump-cache", metavar="DIR", help="dump the final cache of the first run per cell")
    run.set_defaults(func=_cmd_run)

    synth = sub.add_parser("synth", help="write a synthetic embedding set and classifier")
    synth.add_argument("--seed", type=int, required=True)
    synth.add_argument("--k", type=int, required=True)
    synth.add_argument("--d", type=int, required=True)
    synth.add_argument("--per-class", type=int, required=True)
    synth.add_argument("--dispersion", type=float, required=True)
    synth.add_argument("--text-noise", type=float, required=True)
    synth.add_argument("--temperature", type=float, default=DEFAULT_TEMPERATURE)
    synth.add_argument("--format", choices=["binary", "csv"], default="binary")
    synth.add_argument("--out", required=True, help="output directory")
    synth.set_defaults(func=_cmd_synth)

    report = sub.add_parser("report", help="re-render JSON reports")
    report.add_argument("--in", dest="inputs", action="append", required=True)
    report.add_argument("--format", choices=["md", "markdown", "csv", "json"], default="md")
    report.add_argument("--out")
    report.set_defaults(func=_cmd_report)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ConfigError, FormatError, ValidationError, IoError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
