"""Dataset ingestion: PPM decoding, preprocessing, manifests and splits.

Images are float32 arrays in [0, 1], shape HxWxC.  Manifests list
(path, class_id, split) records; splits are seeded, stratified and
reproduce bit-for-bit.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ConfigurationError, DecodeError, DimensionError, ValidationError
from .rng import Xoshiro256pp

GRAY_WEIGHTS = (0.299, 0.587, 0.114)
TARGET_SIZE = 64

SPLITS = ("train", "val", "test")


@dataclass(frozen=True)
class ManifestRecord:
    path: str
    class_id: int
    split: str = ""


@dataclass
class DatasetManifest:
    records: list[ManifestRecord]
    n_classes: int
    seed: int = 0
    class_names: dict[int, str] = field(default_factory=dict)

    def split_records(self, split: str) -> list[ManifestRecord]:
        if split not in SPLITS:
            raise ValidationError(f"unknown split {split!r}, expected one of {SPLITS}")
        return [r for r in self.records if r.split == split]


def _read_header_tokens(data: bytes, count: int) -> tuple[list[bytes], int]:
    """First ``count`` whitespace-separated header tokens, skipping # comments."""
    tokens: list[bytes] = []
    pos = 0
    while len(tokens) < count:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if pos >= len(data):
            raise DecodeError("truncated or malformed header")
        if data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos] not in (0x0A, 0x0D):
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        tokens.append(data[start:pos])
    return tokens, pos


def read_ppm_header(data: bytes) -> tuple[str, int, int, int, int]:
    """(format, width, height, maxval, payload offset) of a binary PPM/PGM."""
    if len(data) < 2 or data[:2] not in (b"P5", b"P6"):
        raise DecodeError("not a binary PPM (expected P5 or P6 magic)")
    tokens, pos = _read_header_tokens(data, 4)
    fmt = tokens[0].decode("ascii")
    try:
        width, height, maxval = (int(t) for t in tokens[1:])
    except ValueError as exc:
        raise DecodeError(f"non-numeric header field: {exc}") from exc
    if width <= 0 or height <= 0:
        raise DecodeError(f"degenerate dimensions {width}x{height}")
    if maxval != 255:
        raise DecodeError(f"unsupported maxval {maxval}, only 255 is handled")
    # Header ends with exactly one whitespace byte before the raster.
    return fmt, width, height, maxval, pos + 1


def decode_ppm(data: bytes) -> np.ndarray:
    """Binary PPM (P6) or PGM (P5) bytes to a float32 HxWxC array in [0, 1]."""
    fmt, width, height, _, offset = read_ppm_header(data)
    channels = 1 if fmt == "P5" else 3
    expected = width * height * channels
    payload = data[offset : offset + expected]
    if len(payload) < expected:
        raise DecodeError(
            f"truncated payload: expected {expected} bytes, got {len(payload)}"
        )
    pixels = np.frombuffer(payload, dtype=np.uint8).reshape(height, width, channels)
    return pixels.astype(np.float32) / 255.0


def encode_ppm(image: np.ndarray) -> bytes:
    """Inverse of :func:`decode_ppm` for maxval-255 images."""
    image = np.asarray(image)
    if image.ndim == 2:
        image = image[:, :, None]
    if image.ndim != 3 or image.shape[2] not in (1, 3):
        raise DimensionError(f"expected HxWx1 or HxWx3 image, got {image.shape}")
    h, w, c = image.shape
    fmt = b"P5" if c == 1 else b"P6"
    pixels = np.round(np.clip(image, 0.0, 1.0) * 255.0).astype(np.uint8)
    return fmt + f" {w} {h} 255\n".encode("ascii") + pixels.tobytes()


def to_grayscale(image: np.ndarray) -> np.ndarray:
    """Rec.601 luminance; single-channel input passes through."""
    image = np.asarray(image, dtype=np.float32)
    if image.ndim == 2:
        return image[:, :, None]
    if image.shape[2] == 1:
        return image
    if image.shape[2] != 3:
        raise DimensionError(f"expected 1 or 3 channels, got {image.shape[2]}")
    r, g, b = GRAY_WEIGHTS
    gray = r * image[:, :, 0] + g * image[:, :, 1] + b * image[:, :, 2]
    return gray[:, :, None].astype(np.float32)


def resize_bilinear(image: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Bilinear resampling with pixel-center alignment (align_corners false)."""
    image = np.asarray(image, dtype=np.float32)
    squeeze = image.ndim == 2
    if squeeze:
        image = image[:, :, None]
    h, w, c = image.shape
    if h < 2 or w < 2:
        raise DimensionError(f"source {h}x{w} too small to resample")
    src_y = np.clip((np.arange(out_h) + 0.5) * (h / out_h) - 0.5, 0.0, h - 1.0)
    src_x = np.clip((np.arange(out_w) + 0.5) * (w / out_w) - 0.5, 0.0, w - 1.0)
    y0 = np.floor(src_y).astype(np.int64)
    x0 = np.floor(src_x).astype(np.int64)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    wy = (src_y - y0).astype(np.float32)[:, None, None]
    wx = (src_x - x0).astype(np.float32)[None, :, None]
    top = image[y0][:, x0] * (1 - wx) + image[y0][:, x1] * wx
    bottom = image[y1][:, x0] * (1 - wx) + image[y1][:, x1] * wx
    out = top * (1 - wy) + bottom * wy
    out = np.clip(out, 0.0, 1.0)
    return out[:, :, 0] if squeeze else out


def load_grayscale_image(path, size: int = TARGET_SIZE) -> np.ndarray:
    """Decode, grayscale and resize one file to (size, size, 1)."""
    data = Path(path).read_bytes()
    return resize_bilinear(to_grayscale(decode_ppm(data)), size, size)


def one_hot(class_id: int, n_classes: int) -> np.ndarray:
    if not 0 <= class_id < n_classes:
        raise ValidationError(f"class id {class_id} out of range [0, {n_classes})")
    vec = np.zeros(n_classes, dtype=np.float32)
    vec[class_id] = 1.0
    return vec


def one_hot_batch(class_ids: Sequence[int], n_classes: int) -> np.ndarray:
    ids = np.asarray(class_ids, dtype=np.int64)
    if ids.size and (ids.min() < 0 or ids.max() >= n_classes):
        raise ValidationError(f"class ids out of range [0, {n_classes})")
    out = np.zeros((ids.shape[0], n_classes), dtype=np.float32)
    out[np.arange(ids.shape[0]), ids] = 1.0
    return out


def scan_dataset_dir(root) -> DatasetManifest:
    """Build an unsplit manifest: one class per subdirectory, both lexicographic."""
    root = Path(root)
    if not root.is_dir():
        raise ConfigurationError(f"dataset root {root} is not a directory")
    class_dirs = sorted(p for p in root.iterdir() if p.is_dir())
    if not class_dirs:
        raise ConfigurationError(f"dataset root {root} has no class subdirectories")
    records = []
    class_names = {}
    for class_id, class_dir in enumerate(class_dirs):
        files = sorted(p for p in class_dir.iterdir() if p.suffix.lower() == ".ppm")
        if not files:
            raise ConfigurationError(f"class directory {class_dir} has no .ppm files")
        class_names[class_id] = class_dir.name
        records.extend(ManifestRecord(str(p), class_id) for p in files)
    return DatasetManifest(records, n_classes=len(class_dirs), class_names=class_names)


def filter_by_size(
    manifest: DatasetManifest, min_size: int = TARGET_SIZE
) -> DatasetManifest:
    """Keep records whose image is strictly larger than min_size in both dims."""
    kept = []
    for record in manifest.records:
        with open(record.path, "rb") as fh:
            head = fh.read(256)
        _, width, height, _, _ = read_ppm_header(head)
        if height > min_size and width > min_size:
            kept.append(record)
    return replace(manifest, records=kept)


def _class_indices(records: Sequence[ManifestRecord], n_classes: int) -> list[list[int]]:
    groups: list[list[int]] = [[] for _ in range(n_classes)]
    for i, record in enumerate(records):
        groups[record.class_id].append(i)
    return groups


def subsample(manifest: DatasetManifest, max_samples: int, seed: int) -> DatasetManifest:
    """Seeded stratified subsample down to at most max_samples records.

    Per-class quotas are proportional, with largest remainders rounded up
    until the total is met.  Surviving records keep their original order.
    """
    total = len(manifest.records)
    if max_samples >= total:
        return manifest
    if max_samples < 1:
        raise ConfigurationError("max_samples must be >= 1")
    groups = _class_indices(manifest.records, manifest.n_classes)
    fractions = [len(g) * max_samples / total for g in groups]
    quotas = [int(f) for f in fractions]
    by_remainder = sorted(
        range(manifest.n_classes), key=lambda c: (fractions[c] - quotas[c], -c), reverse=True
    )
    for c in by_remainder[: max_samples - sum(quotas)]:
        quotas[c] += 1
    stream = Xoshiro256pp(seed)
    kept: list[int] = []
    for group, quota in zip(groups, quotas):
        order = list(range(len(group)))
        stream.shuffle(order)
        kept.extend(group[i] for i in order[:quota])
    records = [manifest.records[i] for i in sorted(kept)]
    return replace(manifest, records=records)


def split_dataset(
    manifest: DatasetManifest, seed: int, min_per_class: int = 10
) -> DatasetManifest:
    """Assign 80:10:10 train/val/test splits, stratified per class.

    Per class of n records: floor(0.8 n) train, floor(0.1 n) val, the rest
    test.  Classes below min_per_class are a configuration error.
    """
    groups = _class_indices(manifest.records, manifest.n_classes)
    too_small = [c for c, g in enumerate(groups) if len(g) < min_per_class]
    if too_small:
        raise ConfigurationError(
            f"classes below {min_per_class} records after filtering: {too_small}"
        )
    stream = Xoshiro256pp(seed)
    split_of = [""] * len(manifest.records)
    for group in groups:
        order = list(range(len(group)))
        stream.shuffle(order)
        n = len(group)
        n_train = int(0.8 * n)
        n_val = int(0.1 * n)
        for rank, i in enumerate(order):
            if rank < n_train:
                split_of[group[i]] = "train"
            elif rank < n_train + n_val:
                split_of[group[i]] = "val"
            else:
                split_of[group[i]] = "test"
    records = [replace(r, split=s) for r, s in zip(manifest.records, split_of)]
    return replace(manifest, records=records, seed=seed)


_MANIFEST_META = re.compile(r"#\s*seed=(\d+)\s+n_classes=(\d+)(?:\s+config=(\S+))?")


def write_manifest(manifest: DatasetManifest, path, config_hash: str = "") -> None:
    lines = [f"# seed={manifest.seed} n_classes={manifest.n_classes}"
             + (f" config={config_hash}" if config_hash else "")]
    lines.append("path,class_id,split")
    for record in manifest.records:
        lines.append(f"{record.path},{record.class_id},{record.split}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_manifest(path) -> DatasetManifest:
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise ConfigurationError(f"cannot read manifest {path}: {exc}") from exc
    if not lines:
        raise ConfigurationError(f"manifest {path} is empty")
    meta = _MANIFEST_META.match(lines[0])
    if not meta:
        raise ConfigurationError(f"manifest {path} missing seed/n_classes header")
    seed, n_classes = int(meta.group(1)), int(meta.group(2))
    if lines[1] != "path,class_id,split":
        raise ConfigurationError(f"manifest {path} has unexpected column header")
    records = []
    for line in lines[2:]:
        if not line.strip():
            continue
        file_path, class_id, split = line.rsplit(",", 2)
        records.append(ManifestRecord(file_path, int(class_id), split))
    return DatasetManifest(records, n_classes=n_classes, seed=seed)


def load_split_images(
    manifest: DatasetManifest, split: str, size: int = TARGET_SIZE
) -> tuple[np.ndarray, np.ndarray]:
    """Preprocessed image tensor (N, size, size, 1) and labels for one split."""
    records = manifest.split_records(split)
    images = np.stack(
        [load_grayscale_image(r.path, size) for r in records]
    ) if records else np.zeros((0, size, size, 1), dtype=np.float32)
    labels = np.asarray([r.class_id for r in records], dtype=np.int64)
    return images, labels
