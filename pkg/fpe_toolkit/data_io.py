"""Loaders for IDX image files and labeled embedding matrices.

Formats
-------
IDX
    Big-endian header: images magic ``0x00000803`` with ``n, rows, cols``
    followed by ``n * rows * cols`` unsigned bytes; labels magic
    ``0x00000801`` with ``n`` followed by ``n`` unsigned bytes. Files
    ending in ``.gz`` are decompressed transparently.
FPEE
    Little-endian: magic ``FPEE``, u16 version 1, u32 ``n``, u32 ``d``,
    u32 ``C``, then ``n * d`` float32 features row-major, then ``n`` u32
    labels. Features are promoted to float64 in memory.
CSV
    A header row ``label,f0,f1,...`` followed by one row per sample.
"""

from __future__ import annotations

import gzip
import json
import struct
from dataclasses import dataclass
from pathlib import Path

import humps
import numpy as np
import numpy.typing as npt

from .core_math import Matrix
from .errors import FormatError, InputError

__all__ = (
    "LabeledMatrixDataset",
    "load_idx",
    "load_fpee",
    "save_fpee",
    "load_csv",
    "save_sidecar",
    "load_sidecar",
)

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801
FPEE_MAGIC = b"FPEE"
FPEE_VERSION = 1
_FPEE_HEADER = struct.Struct("<4sHIII")


@dataclass(slots=True, frozen=True)
class LabeledMatrixDataset:
    """A feature matrix with integer class labels.

    Attributes
    ----------
    x: :class:`numpy.ndarray`
        The ``n x d`` float64 features.
    y: :class:`numpy.ndarray`
        The ``n`` class indices in ``[0, class_count)``.
    class_count: :class:`int`
        The number of classes ``C``.
    source: :class:`str`
        Where the data came from.
    """

    x: Matrix
    y: npt.NDArray[np.int64]
    class_count: int
    source: str = ""

    def __post_init__(self) -> None:
        if self.x.ndim != 2 or self.y.ndim != 1 or self.x.shape[0] != self.y.shape[0]:
            raise InputError(f"features {self.x.shape} do not match labels {self.y.shape}")
        if self.y.size and (self.y.min() < 0 or self.y.max() >= self.class_count):
            raise InputError(f"labels must lie in [0, {self.class_count})")

    @property
    def n(self) -> int:
        """The number of samples."""
        return self.x.shape[0]

    @property
    def d(self) -> int:
        """The number of features."""
        return self.x.shape[1]


def _read_bytes(path: str | Path) -> bytes:
    path = Path(path)
    if path.suffix == ".gz":
        with gzip.open(path, "rb") as f:
            return f.read()
    return path.read_bytes()


def load_idx(
    images_path: str | Path, labels_path: str | Path, class_count: int | None = None
) -> LabeledMatrixDataset:
    """Loads an IDX image/label pair such as FashionMNIST.

    Pixels are flattened row-major and scaled to ``[0, 1]`` by ``/255``.

    Parameters
    ----------
    images_path: :class:`str` | :class:`pathlib.Path`
        The images file.
    labels_path: :class:`str` | :class:`pathlib.Path`
        The labels file.
    class_count: :class:`int` | :class:`None`
        The number of classes; ``max(label) + 1`` when omitted.

    Raises
    ------
    FormatError
        On a bad magic number, a truncated file or a count mismatch.
    """

    images = _read_bytes(images_path)
    if len(images) < 16:
        raise FormatError("truncated IDX images header", len(images))
    magic, n, rows, cols = struct.unpack_from(">IIII", images, 0)
    if magic != IDX_IMAGES_MAGIC:
        raise FormatError(f"bad IDX images magic {magic:#010x}", 0)
    expected = 16 + n * rows * cols
    if len(images) != expected:
        raise FormatError(f"IDX images file has {len(images)} bytes, header implies {expected}", 4)

    labels = _read_bytes(labels_path)
    if len(labels) < 8:
        raise FormatError("truncated IDX labels header", len(labels))
    magic, n_labels = struct.unpack_from(">II", labels, 0)
    if magic != IDX_LABELS_MAGIC:
        raise FormatError(f"bad IDX labels magic {magic:#010x}", 0)
    if n_labels != n:
        raise FormatError(f"{n_labels} labels for {n} images", 4)
    if len(labels) != 8 + n:
        raise FormatError(f"IDX labels file has {len(labels)} bytes, header implies {8 + n}", 4)

    pixels = np.frombuffer(images, dtype=np.uint8, offset=16).reshape(n, rows * cols)
    y = np.frombuffer(labels, dtype=np.uint8, offset=8).astype(np.int64)
    count = class_count if class_count is not None else int(y.max(initial=-1)) + 1
    return LabeledMatrixDataset(
        x=pixels.astype(np.float64) / 255.0,
        y=y,
        class_count=count,
        source=f"idx:{Path(images_path).name}",
    )


def save_fpee(dataset: LabeledMatrixDataset, path: str | Path) -> None:
    """Writes `dataset` in the FPEE format."""

    header = _FPEE_HEADER.pack(
        FPEE_MAGIC, FPEE_VERSION, dataset.n, dataset.d, dataset.class_count
    )
    features = np.ascontiguousarray(dataset.x, dtype="<f4").tobytes()
    labels = np.ascontiguousarray(dataset.y, dtype="<u4").tobytes()
    Path(path).write_bytes(header + features + labels)


def load_fpee(path: str | Path) -> LabeledMatrixDataset:
    """Reads an FPEE file.

    Raises
    ------
    FormatError
        On a bad magic, an unknown version or a size mismatch with the header.
    """

    data = Path(path).read_bytes()
    if len(data) < _FPEE_HEADER.size:
        raise FormatError("truncated FPEE header", len(data))
    magic, version, n, d, classes = _FPEE_HEADER.unpack_from(data, 0)
    if magic != FPEE_MAGIC:
        raise FormatError(f"bad FPEE magic {magic!r}", 0)
    if version != FPEE_VERSION:
        raise FormatError(f"unsupported FPEE version {version}", 4)

    expected = _FPEE_HEADER.size + 4 * n * d + 4 * n
    if len(data) != expected:
        raise FormatError(f"FPEE file has {len(data)} bytes, header implies {expected}", 6)

    offset = _FPEE_HEADER.size
    x = np.frombuffer(data, dtype="<f4", count=n * d, offset=offset).reshape(n, d)
    y = np.frombuffer(data, dtype="<u4", count=n, offset=offset + 4 * n * d)
    if n and int(y.max()) >= classes:
        raise FormatError(f"label {int(y.max())} outside the {classes} declared classes", offset + 4 * n * d)
    return LabeledMatrixDataset(
        x=x.astype(np.float64),
        y=y.astype(np.int64),
        class_count=classes,
        source=f"fpee:{Path(path).name}",
    )


def load_csv(path: str | Path, class_count: int | None = None) -> LabeledMatrixDataset:
    """Reads a CSV with header ``label,f0,f1,...``.

    Raises
    ------
    FormatError
        If the header is not as documented, no data row follows it or a
        row cannot be parsed.
    """

    path = Path(path)
    with path.open("r", encoding="utf-8") as f:
        header = f.readline().strip().split(",")
        has_rows = any(line.strip() for line in f)
    if not header or header[0] != "label" or header[1:] != [f"f{i}" for i in range(len(header) - 1)]:
        raise FormatError("CSV header must read label,f0,f1,...", 0)
    if not has_rows:
        raise FormatError(f"CSV {path.name} has a header but no data rows")

    try:
        table = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2, dtype=np.float64)
    except ValueError as e:
        raise FormatError(f"unparseable CSV row: {e}") from e
    if table.shape[1] != len(header):
        raise FormatError(f"rows have {table.shape[1]} columns, header has {len(header)}")

    y = table[:, 0]
    if np.any(y != np.round(y)) or np.any(y < 0):
        raise FormatError("labels must be non-negative integers")
    y = y.astype(np.int64)
    count = class_count if class_count is not None else int(y.max(initial=-1)) + 1
    return LabeledMatrixDataset(
        x=table[:, 1:].astype(np.float32).astype(np.float64),
        y=y,
        class_count=count,
        source=f"csv:{path.name}",
    )


def save_sidecar(path: str | Path, metadata: dict) -> Path:
    """Writes `metadata` as camelCase JSON next to `path`; returns the
    sidecar path (``<path>.json``)."""

    sidecar = Path(f"{path}.json")
    sidecar.write_text(
        json.dumps(humps.camelize(metadata), indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )
    return sidecar


def load_sidecar(path: str | Path) -> dict:
    """Reads the JSON sidecar of `path` with snake_case keys."""
    return humps.decamelize(json.loads(Path(f"{path}.json").read_text(encoding="utf-8")))
