"""On-disk formats: EMBF binary embeddings, CSV embeddings/partitions, reports.

EMBF layout: magic bytes "EMBF", one version byte 0x01, row count N and
column count d as unsigned 32-bit little-endian integers, then N*d IEEE-754
single-precision little-endian values in row-major order.

All writers are atomic (write to a temp file in the target directory, then
rename) and emit deterministic bytes for deterministic inputs: no
timestamps, sorted JSON keys, repr-formatted floats in CSV.
"""

from __future__ import annotations

import csv
import io
import json
import os
import struct
import tempfile
from typing import Sequence

import numpy as np

from .errors import FormatError

EMBF_MAGIC = b"EMBF"
EMBF_VERSION = 1
_HEADER = struct.Struct("<4sBII")


def atomic_write_bytes(path: str, data: bytes) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path: str, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


def write_json_report(path: str, doc: dict) -> None:
    atomic_write_text(path, json.dumps(doc, indent=2, sort_keys=True, allow_nan=False) + "\n")


def write_csv_report(path: str, rows: Sequence[Sequence[str]]) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerows(rows)
    atomic_write_text(path, buf.getvalue())


# ---------------------------------------------------------------------------
# Embeddings
# ---------------------------------------------------------------------------


def write_embf(path: str, vectors: np.ndarray) -> None:
    arr = np.ascontiguousarray(vectors, dtype="<f4")
    if arr.ndim != 2:
        raise FormatError(f"EMBF stores 2-D matrices, got shape {arr.shape}")
    n, d = arr.shape
    atomic_write_bytes(path, _HEADER.pack(EMBF_MAGIC, EMBF_VERSION, n, d) + arr.tobytes())


def read_embf(path: str) -> np.ndarray:
    with open(path, "rb") as fh:
        header = fh.read(_HEADER.size)
        if len(header) != _HEADER.size:
            raise FormatError(f"{path}: truncated EMBF header")
        magic, version, n, d = _HEADER.unpack(header)
        if magic != EMBF_MAGIC:
            raise FormatError(f"{path}: bad magic {magic!r}, expected {EMBF_MAGIC!r}")
        if version != EMBF_VERSION:
            raise FormatError(f"{path}: unsupported EMBF version {version}")
        payload = fh.read()
    expected = n * d * 4
    if len(payload) != expected:
        raise FormatError(f"{path}: expected {expected} payload bytes, found {len(payload)}")
    flat = np.frombuffer(payload, dtype="<f4")
    return flat.reshape(n, d).astype(np.float64)


def write_embeddings_csv(path: str, vectors: np.ndarray) -> None:
    arr = np.asarray(vectors, dtype=np.float64)
    if arr.ndim != 2:
        raise FormatError(f"embedding CSV stores 2-D matrices, got shape {arr.shape}")
    rows: list[list[str]] = [[f"f{k}" for k in range(arr.shape[1])]]
    rows.extend([repr(float(x)) for x in row] for row in arr)
    write_csv_report(path, rows)


def read_embeddings_csv(path: str) -> np.ndarray:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise FormatError(f"{path}: empty embedding CSV") from None
        expected = [f"f{k}" for k in range(len(header))]
        if header != expected:
            raise FormatError(f"{path}: embedding CSV header must be f0,f1,...,f{{d-1}}")
        d = len(header)
        data: list[list[float]] = []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != d:
                raise FormatError(f"{path}:{lineno}: expected {d} values, found {len(row)}")
            try:
                data.append([float(x) for x in row])
            except ValueError as exc:
                raise FormatError(f"{path}:{lineno}: non-numeric value") from exc
    if not data:
        raise FormatError(f"{path}: embedding CSV has a header but no rows")
    return np.array(data, dtype=np.float64)


def read_embeddings(path: str) -> np.ndarray:
    """Sniff EMBF by magic bytes, else parse as CSV."""
    with open(path, "rb") as fh:
        head = fh.read(4)
    if head == EMBF_MAGIC:
        return read_embf(path)
    return read_embeddings_csv(path)


# ---------------------------------------------------------------------------
# Partitions
# ---------------------------------------------------------------------------


def write_partition_csv(path: str, labels: Sequence[str]) -> None:
    rows = [["index", "subdataset"]]
    rows.extend([str(i), str(lab)] for i, lab in enumerate(labels))
    write_csv_report(path, rows)


def read_partition_csv(path: str) -> list[str]:
    """Labels ordered by 0-based row index; indices must cover 0..N-1 exactly once."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise FormatError(f"{path}: empty partition CSV") from None
        if header != ["index", "subdataset"]:
            raise FormatError(f"{path}: partition CSV header must be index,subdataset")
        entries: dict[int, str] = {}
        for lineno, row in enumerate(reader, start=2):
            if len(row) != 2:
                raise FormatError(f"{path}:{lineno}: expected 2 columns, found {len(row)}")
            try:
                idx = int(row[0])
            except ValueError as exc:
                raise FormatError(f"{path}:{lineno}: non-integer index {row[0]!r}") from exc
            if idx in entries:
                raise FormatError(f"{path}:{lineno}: duplicate index {idx}")
            entries[idx] = row[1]
    if not entries:
        raise FormatError(f"{path}: partition CSV has a header but no rows")
    n = len(entries)
    missing = sorted(set(range(n)) - set(entries))
    if missing:
        raise FormatError(f"{path}: indices must cover 0..{n - 1}; missing {missing[:3]}")
    return [entries[i] for i in range(n)]
