"""Reader/writer for the safetensors container.

Layout: 8-byte little-endian header length ``N``, ``N`` bytes of JSON mapping
tensor name -> ``{"dtype", "shape", "data_offsets"}`` (plus an optional
``"__metadata__"`` string map), then the raw little-endian payloads.
"""
from __future__ import annotations

import json
import os
import struct
import tempfile
from collections.abc import Mapping
from pathlib import Path

import ml_dtypes
import numpy as np

from .._parallel import ordered_map
from ..exceptions import DataError

DTYPES = {
    "F64": np.dtype("<f8"),
    "F32": np.dtype("<f4"),
    "F16": np.dtype("<f2"),
    "BF16": np.dtype(ml_dtypes.bfloat16),
    "I64": np.dtype("<i8"),
    "I32": np.dtype("<i4"),
    "I16": np.dtype("<i2"),
    "I8": np.dtype("i1"),
    "U64": np.dtype("<u8"),
    "U32": np.dtype("<u4"),
    "U16": np.dtype("<u2"),
    "U8": np.dtype("u1"),
    "BOOL": np.dtype("?"),
}
# payloads are laid out by descending dtype rank, then name, as the reference
# safetensors writer does; this keeps wide types aligned and files byte-identical
_LAYOUT_RANK = {c: i for i, c in enumerate(
    ["BOOL", "U8", "I8", "I16", "U16", "F16", "BF16", "I32", "U32", "F32", "F64", "I64", "U64"])}
FLOAT_CODES = frozenset({"F64", "F32", "F16", "BF16"})
_MAX_HEADER = 100 * 1024 * 1024


def dtype_code(dtype) -> str:
    dt = np.dtype(dtype)
    if dt.byteorder == ">":
        dt = dt.newbyteorder("<")
    for code, ref in DTYPES.items():
        if dt == ref:
            return code
    raise DataError(f"unsupported dtype {dt}")


class TensorArchive(Mapping):
    """Named tensors plus string metadata.

    ``tensors`` may be any mapping, including a lazy one that computes arrays on
    access (merge outputs) or memory-maps them from disk (loaded archives).
    """

    def __init__(self, tensors, metadata=None, name=None):
        self._tensors = tensors
        self.metadata = dict(metadata or {})
        self.name = name

    def __getitem__(self, key):
        return self._tensors[key]

    def __iter__(self):
        return iter(sorted(self._tensors))

    def __len__(self):
        return len(self._tensors)

    def spec(self, key):
        """``(dtype_code, shape)`` without materializing the tensor if possible."""
        t = self._tensors
        if hasattr(t, "spec"):
            return t.spec(key)
        arr = t[key]
        return dtype_code(arr.dtype), tuple(arr.shape)

    def materialize(self):
        return TensorArchive({k: np.array(self[k]) for k in self}, self.metadata, self.name)

    def __repr__(self):
        return f"TensorArchive(name={self.name!r}, tensors={len(self)})"


class _MappedTensors(Mapping):
    def __init__(self, buf, entries):
        self._buf = buf
        self._entries = entries  # name -> (code, shape, begin, end)

    def spec(self, key):
        code, shape, _, _ = self._entries[key]
        return code, shape

    def __getitem__(self, key):
        code, shape, begin, end = self._entries[key]
        return self._buf[begin:end].view(DTYPES[code]).reshape(shape)

    def __iter__(self):
        return iter(self._entries)

    def __len__(self):
        return len(self._entries)


def read_header(fh, file_size):
    raw = fh.read(8)
    if len(raw) != 8:
        raise DataError("truncated archive: missing header length")
    (n,) = struct.unpack("<Q", raw)
    if n > min(_MAX_HEADER, file_size - 8):
        raise DataError(f"header length {n} exceeds file size")
    try:
        header = json.loads(fh.read(n).decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise DataError(f"invalid archive header: {exc}") from None
    if not isinstance(header, dict):
        raise DataError("archive header must be a JSON object")
    return n, header


def _parse_entries(header, data_len):
    metadata = header.pop("__metadata__", None) or {}
    entries = {}
    spans = []
    for name, info in header.items():
        try:
            code, shape, (begin, end) = info["dtype"], info["shape"], info["data_offsets"]
        except (KeyError, TypeError, ValueError):
            raise DataError(f"tensor {name!r}: malformed header entry", field=name) from None
        if code not in DTYPES:
            raise DataError(f"tensor {name!r}: unsupported dtype {code!r}", field=name)
        if not all(isinstance(d, int) and d >= 0 for d in shape):
            raise DataError(f"tensor {name!r}: bad shape {shape!r}", field=name)
        expected = int(np.prod(shape, dtype=np.int64)) * DTYPES[code].itemsize
        if not (0 <= begin <= end <= data_len) or end - begin != expected:
            raise DataError(f"tensor {name!r}: data_offsets {begin, end} inconsistent with shape/dtype",
                            field=name)
        entries[name] = (code, tuple(shape), begin, end)
        spans.append((begin, end))
    spans.sort()
    pos = 0
    for begin, end in spans:
        if begin != pos:
            raise DataError("tensor payloads overlap or leave gaps")
        pos = end
    if pos != data_len:
        raise DataError("trailing bytes after the last tensor")
    return entries, metadata


def load_archive(path) -> TensorArchive:
    """Memory-map an archive; tensors are read on access."""
    path = Path(path)
    size = path.stat().st_size
    with open(path, "rb") as fh:
        n, header = read_header(fh, size)
    entries, metadata = _parse_entries(header, size - 8 - n)
    buf = np.memmap(path, dtype=np.uint8, mode="r", offset=8 + n) if size - 8 - n else np.zeros(0, np.uint8)
    return TensorArchive(_MappedTensors(buf, entries), metadata, name=path.stem)


def save_archive(archive, path, metadata=None, workers=1):
    """Write tensors one at a time so lazy archives stream.

    With ``workers > 1`` tensors are computed concurrently but written in
    a fixed order, so the file bytes do not depend on ``workers``.
    """
    shapes = {}
    for name in archive:
        shapes[name] = archive.spec(name) if isinstance(archive, TensorArchive) else (
            dtype_code(archive[name].dtype), tuple(archive[name].shape))
    names = sorted(shapes, key=lambda n: (-_LAYOUT_RANK[shapes[n][0]], n))
    specs = {}
    offset = 0
    for name in names:
        code, shape = shapes[name]
        nbytes = int(np.prod(shape, dtype=np.int64)) * DTYPES[code].itemsize
        specs[name] = {"dtype": code, "shape": list(shape), "data_offsets": [offset, offset + nbytes]}
        offset += nbytes
    meta = dict(getattr(archive, "metadata", {}) or {})
    meta.update(metadata or {})
    header = {}
    if meta:
        header["__metadata__"] = {str(k): str(v) for k, v in sorted(meta.items())}
    header.update(specs)
    blob = json.dumps(header, separators=(",", ":")).encode("utf-8")
    blob += b" " * (-len(blob) % 8)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(struct.pack("<Q", len(blob)))
            fh.write(blob)
            arrays = ordered_map(lambda n: np.asarray(archive[n]), names, workers, threads=True, window=workers)
            for name, arr in zip(names, arrays):
                code = specs[name]["dtype"]
                if tuple(arr.shape) != tuple(specs[name]["shape"]) or dtype_code(arr.dtype) != code:
                    raise DataError(f"tensor {name!r} changed shape/dtype while writing", field=name)
                fh.write(np.ascontiguousarray(arr, dtype=DTYPES[code]).tobytes())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path
