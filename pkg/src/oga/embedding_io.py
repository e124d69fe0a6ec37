"""Embedding data model and on-disk formats.

Binary embedding set (little-endian)::

    b"OGAE" | u16 version | u32 N | u32 d | u32 K | N*d float32 | N uint32 labels

Binary text classifier::

    b"OGAT" | u16 version | u32 K | u32 d | K*d float32

CSV embedding set: a header line ``d=<d>,K=<K>`` followed by one line per
sample, ``label,v1,...,vd``. CSV text classifier: same header, then K lines of
``v1,...,vd``.

Features are held as float32 (the precision of the files); arithmetic
downstream promotes to float64.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import FormatError, ValidationError

SET_MAGIC = b"OGAE"
CLASSIFIER_MAGIC = b"OGAT"
FORMAT_VERSION = 1
DEFAULT_TEMPERATURE = 0.01

# rows already this close to unit norm are kept bit-for-bit
_UNIT_NORM_SLACK = 1e-6
_ZERO_NORM = 1e-12


def normalize_rows(x: np.ndarray) -> np.ndarray:
    """Return float32 rows scaled to unit Euclidean norm.

    Rows whose norm is already within 1e-6 of one are left untouched, which
    keeps file round-trips bit-exact. Zero rows raise ValidationError.
    """
    x = np.asarray(x)
    if x.ndim != 2:
        raise ValidationError(f"expected a 2-d matrix, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValidationError("non-finite embedding values")
    x64 = x.astype(np.float64)
    norms = np.linalg.norm(x64, axis=1)
    if np.any(norms < _ZERO_NORM):
        bad = int(np.argmax(norms < _ZERO_NORM))
        raise ValidationError(f"row {bad} has zero norm")
    out = x.astype(np.float32, copy=True)
    off = np.abs(norms - 1.0) > _UNIT_NORM_SLACK
    if np.any(off):
        out[off] = (x64[off] / norms[off, None]).astype(np.float32)
    return out


@dataclass(frozen=True, eq=False)
class EmbeddingSet:
    features: np.ndarray
    labels: np.ndarray
    n_classes: int

    def __post_init__(self):
        features = np.asarray(self.features)
        labels = np.asarray(self.labels)
        if features.ndim != 2 or features.shape[0] < 1 or features.shape[1] < 2:
            raise ValidationError(f"features must be N x d with N >= 1, d >= 2; got {features.shape}")
        if self.n_classes < 2:
            raise ValidationError("need at least two classes")
        if labels.shape != (features.shape[0],):
            raise ValidationError("labels must be a vector aligned with feature rows")
        if not np.issubdtype(labels.dtype, np.integer):
            raise ValidationError("labels must be integers")
        if labels.min() < 0 or labels.max() >= self.n_classes:
            raise ValidationError(f"labels outside [0, {self.n_classes})")
        features = normalize_rows(features)
        features.setflags(write=False)
        labels = labels.astype(np.int64)
        labels.setflags(write=False)
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "labels", labels)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]

    def with_labels(self, labels) -> "EmbeddingSet":
        return EmbeddingSet(self.features, np.asarray(labels), self.n_classes)

    def __eq__(self, other):
        if not isinstance(other, EmbeddingSet):
            return NotImplemented
        return (
            self.n_classes == other.n_classes
            and self.features.dtype == other.features.dtype
            and np.array_equal(self.features, other.features)
            and np.array_equal(self.labels, other.labels)
        )


@dataclass(frozen=True, eq=False)
class TextClassifier:
    class_embeddings: np.ndarray
    temperature: float = DEFAULT_TEMPERATURE

    def __post_init__(self):
        if not (self.temperature > 0 and np.isfinite(self.temperature)):
            raise ValidationError(f"temperature must be positive, got {self.temperature}")
        emb = np.asarray(self.class_embeddings)
        if emb.ndim != 2 or emb.shape[0] < 2 or emb.shape[1] < 2:
            raise ValidationError(f"class embeddings must be K x d with K, d >= 2; got {emb.shape}")
        emb = normalize_rows(emb)
        emb.setflags(write=False)
        object.__setattr__(self, "class_embeddings", emb)
        object.__setattr__(self, "temperature", float(self.temperature))

    @property
    def n_classes(self) -> int:
        return self.class_embeddings.shape[0]

    @property
    def d(self) -> int:
        return self.class_embeddings.shape[1]

    def __eq__(self, other):
        if not isinstance(other, TextClassifier):
            return NotImplemented
        return self.temperature == other.temperature and np.array_equal(
            self.class_embeddings, other.class_embeddings
        )


# -- binary ---------------------------------------------------------------

def _read_exact(buf: bytes, offset: int, size: int, what: str) -> bytes:
    chunk = buf[offset:offset + size]
    if len(chunk) != size:
        raise FormatError(f"truncated file while reading {what}")
    return chunk


def _parse_binary_set(buf: bytes) -> EmbeddingSet:
    if buf[:4] != SET_MAGIC:
        raise FormatError("bad magic, expected OGAE")
    (version,) = struct.unpack("<H", _read_exact(buf, 4, 2, "version"))
    if version != FORMAT_VERSION:
        raise FormatError(f"unsupported version {version}")
    n, d, k = struct.unpack("<III", _read_exact(buf, 6, 12, "header"))
    offset = 18
    feats = np.frombuffer(_read_exact(buf, offset, 4 * n * d, "features"), dtype="<f4")
    offset += 4 * n * d
    labels = np.frombuffer(_read_exact(buf, offset, 4 * n, "labels"), dtype="<u4")
    offset += 4 * n
    if offset != len(buf):
        raise FormatError(f"{len(buf) - offset} trailing bytes after labels")
    return EmbeddingSet(feats.reshape(n, d).astype(np.float32), labels.astype(np.int64), int(k))


def _parse_binary_classifier(buf: bytes, temperature: float) -> TextClassifier:
    if buf[:4] != CLASSIFIER_MAGIC:
        raise FormatError("bad magic, expected OGAT")
    (version,) = struct.unpack("<H", _read_exact(buf, 4, 2, "version"))
    if version != FORMAT_VERSION:
        raise FormatError(f"unsupported version {version}")
    k, d = struct.unpack("<II", _read_exact(buf, 6, 8, "header"))
    body = buf[14:]
    if len(body) != 4 * k * d:
        raise FormatError(f"declared {k}x{d} floats but found {len(body)} bytes")
    emb = np.frombuffer(body, dtype="<f4").reshape(k, d).astype(np.float32)
    return TextClassifier(emb, temperature)


# -- csv -------------------------------------------------------------------

def _parse_header(line: str) -> dict[str, int]:
    fields = {}
    try:
        for part in line.strip().split(","):
            key, value = part.split("=")
            fields[key.strip()] = int(value)
    except ValueError as exc:
        raise FormatError(f"malformed header {line.strip()!r}") from exc
    if set(fields) != {"d", "K"}:
        raise FormatError(f"header must declare exactly d and K, got {line.strip()!r}")
    return fields


def _csv_rows(lines: list[str], width: int) -> np.ndarray:
    rows = []
    for lineno, line in enumerate(lines, start=2):
        if not line.strip():
            continue
        parts = line.strip().split(",")
        if len(parts) != width:
            raise FormatError(f"line {lineno}: expected {width} fields, got {len(parts)}")
        try:
            rows.append([float(p) for p in parts])
        except ValueError as exc:
            raise FormatError(f"line {lineno}: {exc}") from exc
    return np.array(rows, dtype=np.float64).reshape(len(rows), width)


def _parse_csv_set(text: str) -> EmbeddingSet:
    lines = text.splitlines()
    if not lines:
        raise FormatError("empty file")
    header = _parse_header(lines[0])
    d, k = header["d"], header["K"]
    table = _csv_rows(lines[1:], d + 1)
    if table.shape[0] == 0:
        raise ValidationError("no samples")
    raw_labels = table[:, 0]
    if np.any(raw_labels != np.round(raw_labels)):
        raise FormatError("non-integer label")
    return EmbeddingSet(table[:, 1:], raw_labels.astype(np.int64), k)


def _parse_csv_classifier(text: str, temperature: float) -> TextClassifier:
    lines = text.splitlines()
    if not lines:
        raise FormatError("empty file")
    header = _parse_header(lines[0])
    table = _csv_rows(lines[1:], header["d"])
    if table.shape[0] != header["K"]:
        raise FormatError(f"declared K={header['K']} but found {table.shape[0]} rows")
    return TextClassifier(table, temperature)


# -- public API ------------------------------------------------------------

def _infer_format(path: Path, data: bytes) -> str:
    if data[:4] in (SET_MAGIC, CLASSIFIER_MAGIC):
        return "binary"
    return "csv"


def load_embedding_set(path, format: str | None = None) -> EmbeddingSet:
    """Read an embedding set in ``binary`` or ``csv`` format (inferred if None)."""
    path = Path(path)
    data = path.read_bytes()
    fmt = format or _infer_format(path, data)
    if fmt == "binary":
        return _parse_binary_set(data)
    if fmt == "csv":
        return _parse_csv_set(data.decode("utf-8"))
    raise ValidationError(f"unknown format {fmt!r}")


def load_text_classifier(path, temperature: float = DEFAULT_TEMPERATURE) -> TextClassifier:
    if not (temperature > 0):
        raise ValidationError(f"temperature must be positive, got {temperature}")
    path = Path(path)
    data = path.read_bytes()
    if _infer_format(path, data) == "binary":
        return _parse_binary_classifier(data, temperature)
    return _parse_csv_classifier(data.decode("utf-8"), temperature)


def save_embedding_set(path, eset: EmbeddingSet, format: str = "binary") -> None:
    path = Path(path)
    if format == "binary":
        header = SET_MAGIC + struct.pack("<HIII", FORMAT_VERSION, eset.n, eset.d, eset.n_classes)
        body = eset.features.astype("<f4").tobytes() + eset.labels.astype("<u4").tobytes()
        path.write_bytes(header + body)
    elif format == "csv":
        lines = [f"d={eset.d},K={eset.n_classes}"]
        for label, row in zip(eset.labels, eset.features):
            lines.append(",".join([str(int(label))] + [repr(float(v)) for v in row]))
        path.write_text("\n".join(lines) + "\n")
    else:
        raise ValidationError(f"unknown format {format!r}")


def save_text_classifier(path, clf: TextClassifier, format: str = "binary") -> None:
    path = Path(path)
    if format == "binary":
        header = CLASSIFIER_MAGIC + struct.pack("<HII", FORMAT_VERSION, clf.n_classes, clf.d)
        path.write_bytes(header + clf.class_embeddings.astype("<f4").tobytes())
    elif format == "csv":
        lines = [f"d={clf.d},K={clf.n_classes}"]
        lines += [",".join(repr(float(v)) for v in row) for row in clf.class_embeddings]
        path.write_text("\n".join(lines) + "\n")
    else:
        raise ValidationError(f"unknown format {format!r}")


def generate_synthetic(
    seed: int,
    K: int,
    d: int,
    per_class: int,
    dispersion: float,
    text_noise: float,
    temperature: float = DEFAULT_TEMPERATURE,
) -> tuple[EmbeddingSet, TextClassifier]:
    """Sphere-projected Gaussian clusters standing in for CLIP features.

    Class means are uniform on the unit sphere; samples are ``mean + N(0,
    dispersion^2 I)`` and text embeddings ``mean + N(0, text_noise^2 I)``,
    all re-normalized. Samples are laid out class by class.
    """
    if K < 2 or d < 2 or per_class < 1:
        raise ValidationError(f"need K >= 2, d >= 2, per_class >= 1; got {K}, {d}, {per_class}")
    if dispersion < 0 or text_noise < 0:
        raise ValidationError("noise scales must be non-negative")
    rng = np.random.Generator(np.random.PCG64(seed))
    means = rng.standard_normal((K, d))
    means /= np.linalg.norm(means, axis=1, keepdims=True)
    noise = rng.standard_normal((K, per_class, d))
    samples = (means[:, None, :] + dispersion * noise).reshape(K * per_class, d)
    labels = np.repeat(np.arange(K), per_class)
    text = means + text_noise * rng.standard_normal((K, d))
    samples /= np.linalg.norm(samples, axis=1, keepdims=True)
    text /= np.linalg.norm(text, axis=1, keepdims=True)
    return (
        EmbeddingSet(samples.astype(np.float32), labels, K),
        TextClassifier(text.astype(np.float32), temperature),
    )
