"""Field files, result tables and atomic writes.

GFF1 layout (little endian)::

    b"GFF1" | int32 d | int32 sizes[d] | int64 origin[d] | float64 values (row major)
    | uint64 n | n bytes of JSON metadata

``origin`` is the lower corner of the field's box.
"""

from __future__ import annotations

import csv
import io as _io
import json
import math
import os
import tempfile
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from .lattice import BoxRegion
from .sampler import FieldSample

MAGIC = b"GFF1"


class FieldFormatError(ValueError):
    pass


def _atomic_write(path: str | os.PathLike, data: bytes) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent if str(path.parent) else ".", prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except FileNotFoundError:
            pass
        raise


def atomic_write_text(path: str | os.PathLike, text: str) -> None:
    _atomic_write(path, text.encode("utf-8"))


def write_field(sample: FieldSample, path: str | os.PathLike) -> None:
    d = sample.dim
    head = bytearray(MAGIC)
    head += np.int32(d).astype("<i4").tobytes()
    head += np.asarray(sample.box.shape, dtype="<i4").tobytes()
    head += np.asarray(sample.box.lower, dtype="<i8").tobytes()
    meta = json.dumps(sample.meta, sort_keys=True).encode("utf-8")
    body = np.ascontiguousarray(sample.values, dtype="<f8").tobytes()
    _atomic_write(path, bytes(head) + body + np.uint64(len(meta)).astype("<u8").tobytes() + meta)


def _read_exact(fh, n: int, what: str) -> bytes:
    b = fh.read(n)
    if len(b) != n:
        raise FieldFormatError(f"truncated file: expected {n} bytes of {what}, got {len(b)}")
    return b


def read_field(path: str | os.PathLike, expect_dim: int | None = None) -> FieldSample:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != MAGIC:
            raise FieldFormatError(f"bad magic {magic!r}; expected {MAGIC!r}")
        d = int(np.frombuffer(_read_exact(fh, 4, "dimension"), "<i4")[0])
        if d < 1 or d > 16:
            raise FieldFormatError(f"implausible dimension {d}")
        if expect_dim is not None and d != expect_dim:
            raise FieldFormatError(f"dimension mismatch: file has d={d}, expected {expect_dim}")
        sizes = np.frombuffer(_read_exact(fh, 4 * d, "sizes"), "<i4").astype(int)
        if (sizes < 1).any():
            raise FieldFormatError(f"non-positive axis size in {sizes.tolist()}")
        origin = np.frombuffer(_read_exact(fh, 8 * d, "origin"), "<i8").astype(int)
        count = int(np.prod(sizes))
        values = np.frombuffer(_read_exact(fh, 8 * count, "values"), "<f8").reshape(tuple(sizes)).astype(np.float64)
        n = int(np.frombuffer(_read_exact(fh, 8, "metadata length"), "<u8")[0])
        try:
            meta = json.loads(_read_exact(fh, n, "metadata").decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise FieldFormatError(f"unreadable metadata block: {exc}") from None
        if fh.read(1):
            raise FieldFormatError("trailing bytes after metadata block")
    box = BoxRegion(tuple(int(o) for o in origin), tuple(int(o + s - 1) for o, s in zip(origin, sizes)))
    return FieldSample(box, values, meta)


# ---------------------------------------------------------------------------
# result emission


def _format_value(key: str, v: Any) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        if math.isnan(v):
            raise ValueError(f"NaN in field {key!r}")
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return format(float(v), ".17g")
    if isinstance(v, (list, tuple)):
        return " ".join(_format_value(key, x) for x in v)
    return str(v)


def _check_nan(obj: Any, where: str = "") -> None:
    if isinstance(obj, (float, np.floating)) and math.isnan(obj):
        raise ValueError(f"NaN in field {where!r}")
    if isinstance(obj, Mapping):
        for k, v in obj.items():
            _check_nan(v, f"{where}.{k}" if where else str(k))
    elif isinstance(obj, (list, tuple)):
        for i, v in enumerate(obj):
            _check_nan(v, f"{where}[{i}]")


def _jsonable(obj: Any) -> Any:
    if isinstance(obj, Mapping):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, float) and math.isinf(obj):
        return "inf" if obj > 0 else "-inf"
    return obj


def emit_results(records: Sequence[Mapping[str, Any]], fmt: str, path: str | os.PathLike,
                 columns: Sequence[str] | None = None, meta: Mapping[str, Any] | None = None) -> None:
    """Write ``records`` as CSV or JSON.

    Column order is ``columns`` if given, else first-seen key order.  A NaN
    anywhere aborts before anything is written.  JSON output is
    ``{"meta": ..., "records": [...]}``.
    """
    for i, r in enumerate(records):
        _check_nan(r, f"records[{i}]")
    if meta is not None:
        _check_nan(meta, "meta")
    if fmt == "json":
        doc = {"meta": _jsonable(dict(meta or {})), "records": _jsonable([dict(r) for r in records])}
        atomic_write_text(path, json.dumps(doc, indent=1, sort_keys=False) + "\n")
        return
    if fmt != "csv":
        raise ValueError(f"unknown format {fmt!r}")
    if columns is None:
        columns = []
        for r in records:
            for k in r:
                if k not in columns:
                    columns.append(k)
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in records:
        w.writerow([_format_value(k, r.get(k)) for k in columns])
    atomic_write_text(path, buf.getvalue())


def read_json_results(path: str | os.PathLike) -> dict:
    return json.loads(Path(path).read_text())
