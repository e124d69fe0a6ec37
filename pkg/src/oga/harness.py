"""Experiment matrix: configs, execution over shared seeds, report emission.

Config files are plain ``key = value`` lines; ``#`` starts a comment and list
values are comma separated::

    name = synthetic-demo
    synthetic = seed=7, k=20, d=32, per_class=100, dispersion=0.3, text_noise=0.15
    # or: embeddings = test.ogae / classifier = text.ogat
    temperature = 0.01
    methods = zeroshot, oga, tip
    n_runs = 100
    base_seed = 0
    batch_sizes = 32
    cache_sizes = 8
    nu = 0.05
    estimators = auto
    output = report.json
    output_format = json
"""
from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

from .adapters import OgaConfig, TipAdapterConfig
from .cache import CacheConfig
from .embedding_io import (
    DEFAULT_TEMPERATURE,
    generate_synthetic,
    load_embedding_set,
    load_text_classifier,
)
from .errors import ConfigError, IoError, ValidationError
from .gaussian import INVERSE_METHODS, POLICIES
from .metrics import MetricsReport, summarize, win_rate
from .stream import METHODS, OnlineAdapter, StreamConfig, make_stream, run_many

CSV_COLUMNS = ["dataset", "method", "batch_size", "cache_size", "nu", "estimator",
               "n_runs", "mean_acc", "std_acc", "eta"]
REPORT_FORMATS = ("json", "csv", "markdown")
_SYNTH_KEYS = ("seed", "k", "d", "per_class", "dispersion", "text_noise")


@dataclass(frozen=True)
class ExperimentConfig:
    name: str = "dataset"
    embeddings: str | None = None
    embeddings_format: str | None = None
    classifier: str | None = None
    synthetic: dict | None = None
    temperature: float = DEFAULT_TEMPERATURE
    methods: tuple = ("zeroshot", "oga", "tip")
    n_runs: int = 100
    base_seed: int = 0
    batch_sizes: tuple = (32,)
    cache_sizes: tuple = (8,)
    nus: tuple = (0.05,)
    estimators: tuple = ("auto",)
    inverse_method: str = "cholesky"
    tip_alpha: float = 2.0
    tip_beta: float = 5.0
    update_first: bool = True
    checkpoint_every: int | None = None
    output: str | None = None
    output_format: str = "json"

    def __post_init__(self):
        if (self.synthetic is None) == (self.embeddings is None):
            raise ConfigError("give exactly one of 'synthetic' or 'embeddings'")
        if self.embeddings is not None and self.classifier is None:
            raise ConfigError("'embeddings' requires 'classifier'")
        if self.synthetic is not None and self.classifier is not None:
            raise ConfigError("'classifier' conflicts with 'synthetic'")
        if self.synthetic is not None and set(self.synthetic) != set(_SYNTH_KEYS):
            raise ConfigError(f"synthetic settings need exactly {', '.join(_SYNTH_KEYS)}")
        if self.n_runs < 1:
            raise ConfigError("n_runs must be >= 1")
        if not self.methods or len(set(self.methods)) != len(self.methods):
            raise ConfigError("methods must be a non-empty list without repeats")
        for m in self.methods:
            if m not in METHODS:
                raise ConfigError(f"unknown method {m!r}; choose from {METHODS}")
        for e in self.estimators:
            if e not in POLICIES:
                raise ConfigError(f"unknown estimator {e!r}; choose from {POLICIES}")
        if self.inverse_method not in INVERSE_METHODS:
            raise ConfigError(f"unknown inverse_method {self.inverse_method!r}")
        if self.output_format not in REPORT_FORMATS:
            raise ConfigError(f"unknown output_format {self.output_format!r}")
        if not self.temperature > 0:
            raise ConfigError("temperature must be positive")
        # surface module-level constraints as config errors
        try:
            for b in self.batch_sizes:
                StreamConfig(batch_size=b)
            for c in self.cache_sizes:
                CacheConfig(c)
            for nu in self.nus:
                OgaConfig(nu)
            TipAdapterConfig(self.tip_alpha, self.tip_beta)
            if self.checkpoint_every is not None:
                StreamConfig(checkpoint_every=self.checkpoint_every)
        except ValidationError as exc:
            raise ConfigError(str(exc)) from exc
        for name in ("batch_sizes", "cache_sizes", "nus", "estimators"):
            if not getattr(self, name):
                raise ConfigError(f"{name} must not be empty")


# -- config parsing --------------------------------------------------------

def _split(value: str) -> list[str]:
    return [v.strip() for v in value.split(",") if v.strip()]


def _parse_synthetic(value: str) -> dict:
    params = {}
    for part in _split(value):
        if "=" not in part:
            raise ConfigError(f"synthetic entry {part!r} is not key=value")
        key, raw = (s.strip() for s in part.split("=", 1))
        params[key] = float(raw) if key in ("dispersion", "text_noise") else int(raw)
    return params


def _parse_bool(value: str) -> bool:
    lowered = value.lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {value!r}")


_PARSERS = {
    "name": str,
    "embeddings": str,
    "embeddings_format": str,
    "classifier": str,
    "synthetic": _parse_synthetic,
    "temperature": float,
    "methods": lambda v: tuple(_split(v)),
    "n_runs": int,
    "base_seed": int,
    "batch_sizes": lambda v: tuple(int(x) for x in _split(v)),
    "cache_sizes": lambda v: tuple(int(x) for x in _split(v)),
    "nus": lambda v: tuple(float(x) for x in _split(v)),
    "estimators": lambda v: tuple(_split(v)),
    "inverse_method": str,
    "tip_alpha": float,
    "tip_beta": float,
    "update_first": _parse_bool,
    "checkpoint_every": int,
    "output": str,
    "output_format": str,
}
_ALIASES = {"nu": "nus", "batch_size": "batch_sizes", "cache_size": "cache_sizes",
            "estimator": "estimators", "method": "methods"}


def parse_config(text: str, base_dir=None) -> ExperimentConfig:
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        key = _ALIASES.get(key, key)
        if key not in _PARSERS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        try:
            values[key] = _PARSERS[key](value)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {key!r}: {exc}") from exc
    if base_dir is not None:
        for key in ("embeddings", "classifier", "output"):
            if key in values and not os.path.isabs(values[key]):
                values[key] = str(Path(base_dir) / values[key])
    return ExperimentConfig(**values)


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    return parse_config(path.read_text(), base_dir=path.parent)


# -- execution -------------------------------------------------------------

@dataclass(frozen=True)
class Cell:
    dataset: str
    method: str
    batch_size: int
    cache_size: int | None = None
    nu: float | None = None
    estimator: str | None = None

    @property
    def label(self) -> str:
        parts = [f"bs={self.batch_size}"]
        if self.cache_size is not None:
            parts.append(f"cache={self.cache_size}")
        if self.nu is not None:
            parts.append(f"nu={self.nu:g}")
        if self.estimator is not None:
            parts.append(f"est={self.estimator}")
        return f"{self.method}[{','.join(parts)}]"


def expand_cells(cfg: ExperimentConfig) -> list[Cell]:
    """Every (method, ablation) combination, with irrelevant axes left None."""
    cells = []
    for method in cfg.methods:
        for bs in cfg.batch_sizes:
            if method == "zeroshot":
                cells.append(Cell(cfg.name, method, bs))
            elif method == "tip":
                cells.extend(Cell(cfg.name, method, bs, c) for c in cfg.cache_sizes)
            else:
                cells.extend(
                    Cell(cfg.name, method, bs, c, nu, est)
                    for c in cfg.cache_sizes for nu in cfg.nus for est in cfg.estimators
                )
    return cells


def stream_config(cfg: ExperimentConfig, cell: Cell) -> StreamConfig:
    return StreamConfig(
        seed=cfg.base_seed,
        batch_size=cell.batch_size,
        method=cell.method,
        cache=CacheConfig(cell.cache_size or 8),
        oga=OgaConfig(0.05 if cell.nu is None else cell.nu),
        tip=TipAdapterConfig(cfg.tip_alpha, cfg.tip_beta),
        checkpoint_every=cfg.checkpoint_every,
        estimator=cell.estimator or "auto",
        inverse_method=cfg.inverse_method,
        update_first=cfg.update_first,
    )


def load_inputs(cfg: ExperimentConfig):
    if cfg.synthetic is not None:
        s = cfg.synthetic
        return generate_synthetic(s["seed"], s["k"], s["d"], s["per_class"],
                                  s["dispersion"], s["text_noise"], cfg.temperature)
    eset = load_embedding_set(cfg.embeddings, cfg.embeddings_format)
    clf = load_text_classifier(cfg.classifier, cfg.temperature)
    return eset, clf


@dataclass
class CellResult:
    cell: Cell
    metrics: MetricsReport

    def to_dict(self) -> dict:
        return {"cell": asdict(self.cell), "label": self.cell.label, "metrics": self.metrics.to_dict()}

    @classmethod
    def from_dict(cls, data: dict) -> "CellResult":
        return cls(Cell(**data["cell"]), MetricsReport.from_dict(data["metrics"]))


@dataclass
class ExperimentReport:
    dataset: str
    seeds: list
    cells: list = field(default_factory=list)
    win_rates: list = field(default_factory=list)  # {"a", "b", "rate"}
    traces: dict = field(default_factory=dict, repr=False, compare=False)

    def to_dict(self) -> dict:
        return {
            "dataset": self.dataset,
            "seeds": list(self.seeds),
            "cells": [c.to_dict() for c in self.cells],
            "win_rates": list(self.win_rates),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentReport":
        return cls(
            dataset=data["dataset"],
            seeds=list(data["seeds"]),
            cells=[CellResult.from_dict(c) for c in data["cells"]],
            win_rates=list(data["win_rates"]),
        )

    def cell(self, label: str) -> CellResult:
        for c in self.cells:
            if c.cell.label == label:
                return c
        raise KeyError(label)

    def __eq__(self, other):
        if not isinstance(other, ExperimentReport):
            return NotImplemented
        return self.to_dict() == other.to_dict()


def run_experiment(cfg: ExperimentConfig, inputs=None, workers: int | None = None,
                   cache_dump_dir=None) -> ExperimentReport:
    """Run every cell on the same seeds ``base_seed .. base_seed + n_runs - 1``."""
    eset, clf = inputs if inputs is not None else load_inputs(cfg)
    seeds = list(range(cfg.base_seed, cfg.base_seed + cfg.n_runs))
    report = ExperimentReport(dataset=cfg.name, seeds=seeds)
    for cell in expand_cells(cfg):
        scfg = stream_config(cfg, cell)
        traces = run_many(eset, clf, scfg, seeds, workers=workers)
        report.traces[cell.label] = traces
        report.cells.append(CellResult(cell, summarize(traces)))
        if cache_dump_dir is not None and cell.method != "zeroshot":
            _dump_first_cache(eset, clf, scfg, seeds[0], cell, cache_dump_dir)
    for a in report.cells:
        for b in report.cells:
            if a is not b:
                report.win_rates.append({
                    "a": a.cell.label,
                    "b": b.cell.label,
                    "rate": win_rate(a.metrics.per_run, b.metrics.per_run),
                })
    return report


def _dump_first_cache(eset, clf, scfg, seed, cell, out_dir):
    adapter = OnlineAdapter(clf, replace(scfg, seed=seed))
    order = make_stream(eset.n, seed)
    for start in range(0, eset.n, scfg.batch_size):
        adapter.step(eset.features[order[start:start + scfg.batch_size]])
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    adapter.cache.dump_csv(out_dir / f"cache_{cell.label}_seed{seed}.csv")


# -- emission --------------------------------------------------------------

def _atomic_write(path, text: str) -> None:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def _fmt(value) -> str:
    if value is None:
        return ""
    return repr(value) if isinstance(value, float) else str(value)


def render_json(report: ExperimentReport) -> str:
    return json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n"


def render_csv(reports) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for report in _as_list(reports):
        for res in report.cells:
            c, m = res.cell, res.metrics
            writer.writerow([c.dataset, c.method, c.batch_size, _fmt(c.cache_size), _fmt(c.nu),
                             _fmt(c.estimator), m.n_runs, _fmt(m.mean_accuracy),
                             _fmt(m.std_accuracy), _fmt(m.eta)])
    return buf.getvalue()


def render_markdown(reports) -> str:
    """Two method-by-dataset tables: mean +/- std accuracy, then ETA (in %)."""
    reports = _as_list(reports)
    datasets = [r.dataset for r in reports]
    labels = []
    for r in reports:
        for res in r.cells:
            if res.cell.label not in labels:
                labels.append(res.cell.label)

    def table(title, render):
        head = "| Method | " + " | ".join(datasets) + " |"
        rule = "|---|" + "---|" * len(datasets)
        rows = [f"| {label} | " + " | ".join(render(r, label) for r in reports) + " |"
                for label in labels]
        return "\n".join([f"### {title}", "", head, rule] + rows)

    def mean_std(r, label):
        try:
            m = r.cell(label).metrics
        except KeyError:
            return "-"
        return f"{100 * m.mean_accuracy:.2f} ± {100 * m.std_accuracy:.2f}"

    def eta(r, label):
        try:
            return f"{100 * r.cell(label).metrics.eta:.2f}"
        except KeyError:
            return "-"

    return table("Average accuracy (%)", mean_std) + "\n\n" + table("ETA (%)", eta) + "\n"


def _as_list(reports):
    return [reports] if isinstance(reports, ExperimentReport) else list(reports)


def emit_report(reports, path, format: str = "json") -> Path:
    reports = _as_list(reports)
    if not reports or not any(r.cells for r in reports):
        raise ValidationError("report is empty")
    if format == "json":
        if len(reports) == 1:
            text = render_json(reports[0])
        else:
            text = json.dumps([r.to_dict() for r in reports], indent=2, sort_keys=True) + "\n"
    elif format == "csv":
        text = render_csv(reports)
    elif format in ("markdown", "md"):
        text = render_markdown(reports)
    else:
        raise ValidationError(f"unknown report format {format!r}")
    _atomic_write(path, text)
    return Path(path)


def load_report(path) -> list[ExperimentReport]:
    data = json.loads(Path(path).read_text())
    if isinstance(data, dict):
        data = [data]
    return [ExperimentReport.from_dict(d) for d in data]


def emit_trace_plot_data(traces_by_nu, path) -> Path:
    """Long-format CSV ``nu,run,seed,samples_seen,accuracy`` for accuracy-vs-stream plots."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["nu", "run", "seed", "samples_seen", "accuracy"])
    rows = 0
    for nu, traces in traces_by_nu.items():
        for run, trace in enumerate(traces):
            for seen, acc in trace.checkpoints:
                writer.writerow([_fmt(float(nu)), run, trace.seed, seen, _fmt(float(acc))])
                rows += 1
    if rows == 0:
        raise ConfigError("no checkpoints recorded; set checkpoint_every")
    _atomic_write(path, buf.getvalue())
    return Path(path)
