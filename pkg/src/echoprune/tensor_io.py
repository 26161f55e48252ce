"""Binary tensor container and selection-report serialization.

Tensor file layout (all integers little-endian):

    offset   size      field
    0        4         magic ``EPT1``
    4        1         format version (currently 1)
    5        1         dtype code (1 = 32-bit float, little-endian)
    6        1         rank (2 or 4)
    7        1         pad byte, must be zero
    8        8 * rank  dims, uint64 each
    8 + 8r   ...       payload, row-major float32, product(dims) scalars

Rank-4 files hold video token grids (frames, rows, cols, dim); rank-2
files hold text token sets (count, dim). Payloads are checked for
NaN/Inf on both read and write so downstream scoring can assume
finite data everywhere.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field

import numpy as np

MAGIC = b"EPT1"
VERSION = 1
DTYPE_FLOAT32 = 1

_HEADER_FIXED = 8  # magic + version + dtype + rank + pad


class TensorFormatError(ValueError):
    """Malformed tensor file; ``offset`` is the byte position of the fault."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


def _validate_payload(data: np.ndarray, what: str) -> None:
    if data.size == 0:
        raise ValueError(f"{what}: empty payload")
    if not np.all(np.isfinite(data)):
        bad = int(np.flatnonzero(~np.isfinite(data.reshape(-1)))[0])
        raise ValueError(f"{what}: non-finite scalar at flat index {bad}")


@dataclass
class VisualTokenGrid:
    """Video token embeddings, shape (frames, rows, cols, dim), float32."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.ascontiguousarray(self.data, dtype=np.float32)
        if arr.ndim != 4:
            raise ValueError(f"visual grid must be 4-D, got {arr.ndim}-D")
        if min(arr.shape) < 1:
            raise ValueError(f"all dims must be >= 1, got {arr.shape}")
        _validate_payload(arr, "visual grid")
        self.data = arr

    @property
    def frames(self) -> int:
        return self.data.shape[0]

    @property
    def rows(self) -> int:
        return self.data.shape[1]

    @property
    def cols(self) -> int:
        return self.data.shape[2]

    @property
    def dim(self) -> int:
        return self.data.shape[3]


@dataclass
class TextTokenSet:
    """Text token embeddings, shape (count, dim), float32."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.ascontiguousarray(self.data, dtype=np.float32)
        if arr.ndim != 2:
            raise ValueError(f"text set must be 2-D, got {arr.ndim}-D")
        if min(arr.shape) < 1:
            raise ValueError(f"all dims must be >= 1, got {arr.shape}")
        _validate_payload(arr, "text set")
        self.data = arr

    @property
    def count(self) -> int:
        return self.data.shape[0]

    @property
    def dim(self) -> int:
        return self.data.shape[1]


def header_size(rank: int) -> int:
    return _HEADER_FIXED + 8 * rank


def write_tensor(path, grid: VisualTokenGrid | TextTokenSet) -> None:
    """Write a grid or text set to ``path`` in the EPT1 layout.

    Non-finite data is rejected before any bytes are written.
    """
    data = grid.data
    _validate_payload(data, "payload")
    rank = data.ndim
    header = MAGIC + bytes([VERSION, DTYPE_FLOAT32, rank, 0])
    header += b"".join(struct.pack("<Q", d) for d in data.shape)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(data, dtype="<f4").tobytes())


def read_tensor(path) -> VisualTokenGrid | TextTokenSet:
    """Read an EPT1 file; rank 4 yields a VisualTokenGrid, rank 2 a TextTokenSet."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _HEADER_FIXED:
        raise TensorFormatError(
            f"file too short for fixed header: {len(raw)} < {_HEADER_FIXED} bytes", 0
        )
    if raw[:4] != MAGIC:
        raise TensorFormatError(f"bad magic {raw[:4]!r}, expected {MAGIC!r}", 0)
    version, dtype_code, rank, pad = raw[4], raw[5], raw[6], raw[7]
    if version != VERSION:
        raise TensorFormatError(f"unsupported version {version}", 4)
    if dtype_code != DTYPE_FLOAT32:
        raise TensorFormatError(f"unsupported dtype code {dtype_code}", 5)
    if rank not in (2, 4):
        raise TensorFormatError(f"unsupported rank {rank}, expected 2 or 4", 6)
    if pad != 0:
        raise TensorFormatError(f"nonzero pad byte {pad}", 7)
    hsize = header_size(rank)
    if len(raw) < hsize:
        raise TensorFormatError(
            f"truncated header: expected {hsize} bytes, got {len(raw)}", len(raw)
        )
    dims = struct.unpack_from(f"<{rank}Q", raw, _HEADER_FIXED)
    for i, d in enumerate(dims):
        if d < 1:
            raise TensorFormatError(f"dim {i} is zero", _HEADER_FIXED + 8 * i)
    count = 1
    for d in dims:
        count *= d
    expected = hsize + 4 * count
    if len(raw) != expected:
        raise TensorFormatError(
            f"truncated payload: expected {expected} bytes total, got {len(raw)}",
            len(raw),
        )
    data = np.frombuffer(raw, dtype="<f4", count=count, offset=hsize).reshape(dims)
    finite = np.isfinite(data.reshape(-1))
    if not finite.all():
        bad = int(np.flatnonzero(~finite)[0])
        raise TensorFormatError(
            f"non-finite scalar at flat index {bad}", hsize + 4 * bad
        )
    data = data.copy()  # decouple from the raw buffer
    if rank == 4:
        return VisualTokenGrid(data)
    return TextTokenSet(data)


# ---------------------------------------------------------------------------
# Selection report (JSON)
# ---------------------------------------------------------------------------


@dataclass
class KeptToken:
    """One retained token with its score breakdown."""

    frame: int
    row: int
    col: int
    score: float
    r: float
    d_corr: float
    d_echo: float

    def key(self) -> tuple[int, int, int]:
        return (self.frame, self.row, self.col)


@dataclass
class SelectionReport:
    """Everything cmd_prune knows about one run, JSON-serializable.

    Key order in the emitted document is fixed: config, budget,
    first_frame_quota, kept, stats. Floats are written with 9
    significant digits.
    """

    config: dict
    budget: int
    first_frame_quota: int
    kept: list[KeptToken]
    stats: dict = field(default_factory=dict)


def _json_scalar(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".9g")
    if value is None:
        return "null"
    return json.dumps(value)


def _json_value(value, indent: int) -> str:
    pad = "  " * indent
    inner = "  " * (indent + 1)
    if isinstance(value, dict):
        if not value:
            return "{}"
        items = [f'{inner}{json.dumps(str(k))}: {_json_value(v, indent + 1)}'
                 for k, v in value.items()]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(value, (list, tuple)):
        if not value:
            return "[]"
        items = [f"{inner}{_json_value(v, indent + 1)}" for v in value]
        return "[\n" + ",\n".join(items) + "\n" + pad + "]"
    return _json_scalar(value)


def report_to_dict(report: SelectionReport) -> dict:
    return {
        "config": report.config,
        "budget": report.budget,
        "first_frame_quota": report.first_frame_quota,
        "kept": [
            {
                "frame": tok.frame,
                "row": tok.row,
                "col": tok.col,
                "score": tok.score,
                "r": tok.r,
                "d_corr": tok.d_corr,
                "d_echo": tok.d_echo,
            }
            for tok in report.kept
        ],
        "stats": report.stats,
    }


def write_report(path, report: SelectionReport) -> None:
    """Serialize a SelectionReport as JSON with the fixed key order."""
    text = _json_value(report_to_dict(report), 0) + "\n"
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)


def read_report(path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)
