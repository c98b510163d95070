"""Binary feature-map cache (QNVF files).

Layout, all integers and floats little-endian:

    magic   4 bytes  b"QNVF"
    version u32      1
    spec    8 bytes  truncated sha256 of the filter spec description
    count   u32      number of records
    record  label u16, H u16, W u16, C u16, then H*W*C float32 values

Records are written in input order, so the cache preserves manifest order
and labels.  A build that fails midway leaves only a ``.partial`` file.
"""

from __future__ import annotations

import hashlib
import os
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterator, Sequence

import numpy as np

from .errors import DecodeError, DimensionError
from .quanv import QuanvFilterSpec, quanv_image

MAGIC = b"QNVF"
VERSION = 1
_HEADER = struct.Struct("<4sI8sI")
_RECORD = struct.Struct("<HHHH")


def spec_hash(spec: QuanvFilterSpec) -> bytes:
    return hashlib.sha256(spec.describe().encode()).digest()[:8]


@dataclass
class CacheBuildResult:
    path: Path
    written: int = 0
    skipped: list[tuple[str, str]] = field(default_factory=list)
    up_to_date: bool = False


def write_cache(path, spec: QuanvFilterSpec, records) -> int:
    """Write (label, feature_map) pairs atomically; returns record count."""
    path = Path(path)
    partial = path.with_name(path.name + ".partial")
    records = list(records)
    with open(partial, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, spec_hash(spec), len(records)))
        for label, values in records:
            values = np.ascontiguousarray(values, dtype=np.float32)
            if values.ndim != 3:
                raise DimensionError(f"feature map must be HxWxC, got {values.shape}")
            h, w, c = values.shape
            fh.write(_RECORD.pack(int(label), h, w, c))
            fh.write(values.astype("<f4").tobytes())
    os.replace(partial, path)
    return len(records)


def read_cache_records(path) -> Iterator[tuple[int, np.ndarray]]:
    """Yield (label, HxWxC float32 array) for each record."""
    with open(path, "rb") as fh:
        header = fh.read(_HEADER.size)
        if len(header) < _HEADER.size:
            raise DecodeError(f"{path}: truncated cache header")
        magic, version, _, count = _HEADER.unpack(header)
        if magic != MAGIC:
            raise DecodeError(f"{path}: bad magic {magic!r}")
        if version != VERSION:
            raise DecodeError(f"{path}: unsupported cache version {version}")
        for i in range(count):
            rec = fh.read(_RECORD.size)
            if len(rec) < _RECORD.size:
                raise DecodeError(f"{path}: truncated record header {i}")
            label, h, w, c = _RECORD.unpack(rec)
            payload = fh.read(4 * h * w * c)
            if len(payload) < 4 * h * w * c:
                raise DecodeError(f"{path}: truncated record payload {i}")
            values = np.frombuffer(payload, dtype="<f4").reshape(h, w, c)
            yield label, values.astype(np.float32)


def read_cache_header(path) -> tuple[bytes, int]:
    """(spec hash, record count) without reading payloads."""
    with open(path, "rb") as fh:
        header = fh.read(_HEADER.size)
    if len(header) < _HEADER.size:
        raise DecodeError(f"{path}: truncated cache header")
    magic, version, digest, count = _HEADER.unpack(header)
    if magic != MAGIC or version != VERSION:
        raise DecodeError(f"{path}: not a readable cache file")
    return digest, count


def load_cache_dataset(path) -> tuple[np.ndarray, np.ndarray]:
    """Stack all records into (X: N,H,W,C float32, y: N int64)."""
    features, labels = [], []
    for label, values in read_cache_records(path):
        features.append(values)
        labels.append(label)
    if not features:
        return np.zeros((0, 0, 0, 0), dtype=np.float32), np.zeros(0, dtype=np.int64)
    shapes = {f.shape for f in features}
    if len(shapes) > 1:
        raise DimensionError(f"{path}: mixed feature shapes {sorted(shapes)}")
    return np.stack(features), np.asarray(labels, dtype=np.int64)


def _cache_is_current(path: Path, spec: QuanvFilterSpec, labels: Sequence[int]) -> bool:
    if not path.exists():
        return False
    try:
        digest, count = read_cache_header(path)
        if digest != spec_hash(spec) or count != len(labels):
            return False
        found = []
        with open(path, "rb") as fh:
            fh.seek(_HEADER.size)
            for _ in range(count):
                rec = fh.read(_RECORD.size)
                if len(rec) < _RECORD.size:
                    return False
                label, h, w, c = _RECORD.unpack(rec)
                found.append(label)
                fh.seek(4 * h * w * c, os.SEEK_CUR)
                if fh.tell() > os.fstat(fh.fileno()).st_size:
                    return False
        return found == [int(x) for x in labels]
    except (OSError, DecodeError):
        return False


def quanv_dataset(
    items: Sequence[tuple[str, int]],
    spec: QuanvFilterSpec,
    cache_path,
    load_image: Callable[[str], np.ndarray],
) -> CacheBuildResult:
    """Quanvolve every (path, label) item into a cache file.

    Unreadable images are skipped and reported; the cache is rebuilt only
    when the existing file does not already match (spec hash, labels).
    """
    cache_path = Path(cache_path)
    result = CacheBuildResult(path=cache_path)
    labels = [label for _, label in items]
    if _cache_is_current(cache_path, spec, labels):
        result.up_to_date = True
        result.written = len(items)
        return result
    records = []
    for image_path, label in items:
        try:
            image = load_image(image_path)
        except Exception as exc:  # noqa: BLE001 - reported, not swallowed silently
            result.skipped.append((str(image_path), str(exc)))
            continue
        records.append((label, quanv_image(image, spec)))
    result.written = write_cache(cache_path, spec, records)
    return result
