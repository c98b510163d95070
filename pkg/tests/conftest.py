"""Shared fixtures: synthetic sign-like PPM datasets for pipeline tests.

Four visually distinct shape classes (disc, square, stripes, ring) drawn
over noisy backgrounds, written as binary PPM files in the expected
class-per-directory layout.  Everything is seeded and deterministic.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from quanvnet.data import encode_ppm
from quanvnet.qsim import Circuit, GateKind, GateOp

N_CLASSES = 4

SINGLE_KINDS = [GateKind.X, GateKind.Y, GateKind.Z, GateKind.H, GateKind.RX,
                GateKind.RY, GateKind.RZ, GateKind.U1, GateKind.U2, GateKind.U3]
TWO_KINDS = [GateKind.CNOT, GateKind.CZ, GateKind.CRY]


def random_circuit(rng: np.random.Generator, n_qubits: int, length: int) -> Circuit:
    """Uniformly random circuit over the full gate set."""
    ops = []
    for _ in range(length):
        if n_qubits >= 2 and rng.random() < 0.35:
            kind = TWO_KINDS[rng.integers(len(TWO_KINDS))]
            control, target = rng.choice(n_qubits, size=2, replace=False)
            targets = (int(control), int(target))
        else:
            kind = SINGLE_KINDS[rng.integers(len(SINGLE_KINDS))]
            targets = (int(rng.integers(n_qubits)),)
        params = tuple(float(x) for x in rng.uniform(0, 2 * np.pi, size=kind.n_params))
        ops.append(GateOp(kind, params, targets))
    return Circuit(n_qubits, ops)


def synth_sign(class_id: int, size: int, rng: np.random.Generator) -> np.ndarray:
    """One size x size x 3 float image with a class-specific bright shape."""
    img = rng.uniform(0.05, 0.30, size=(size, size, 3)).astype(np.float32)
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float32)
    cy = size / 2 + rng.uniform(-size * 0.05, size * 0.05)
    cx = size / 2 + rng.uniform(-size * 0.05, size * 0.05)
    r = size * rng.uniform(0.28, 0.36)
    dist2 = (yy - cy) ** 2 + (xx - cx) ** 2
    if class_id == 0:
        mask = dist2 < r**2
    elif class_id == 1:
        mask = (np.abs(yy - cy) < r) & (np.abs(xx - cx) < r)
    elif class_id == 2:
        stripe = max(2, size // 8)
        mask = (dist2 < r**2) & (((yy // stripe) % 2) == 0)
    else:
        mask = (dist2 < r**2) & (dist2 > (0.55 * r) ** 2)
    tint = np.array([[0.95, 0.85, 0.2], [0.2, 0.9, 0.95], [0.95, 0.3, 0.3],
                     [0.85, 0.95, 0.85]][class_id], dtype=np.float32)
    img[mask] = tint * rng.uniform(0.85, 1.0)
    return np.clip(img, 0.0, 1.0)


def make_sign_dataset(root: Path, n_per_class: int, seed: int,
                      size_range=(66, 80), n_undersized: int = 0) -> Path:
    """Write a class-per-directory PPM dataset under ``root``."""
    rng = np.random.default_rng(seed)
    for class_id in range(N_CLASSES):
        class_dir = root / f"{class_id:05d}"
        class_dir.mkdir(parents=True, exist_ok=True)
        for i in range(n_per_class):
            size = int(rng.integers(size_range[0], size_range[1] + 1))
            image = synth_sign(class_id, size, rng)
            (class_dir / f"{i:05d}.ppm").write_bytes(encode_ppm(image))
        for i in range(n_undersized):
            image = synth_sign(class_id, 48, rng)
            (class_dir / f"small_{i:05d}.ppm").write_bytes(encode_ppm(image))
    return root


@pytest.fixture(scope="session")
def small_dataset(tmp_path_factory) -> Path:
    """Quick 4-class dataset: 14 images per class, 2 undersized each."""
    root = tmp_path_factory.mktemp("signs_small")
    return make_sign_dataset(root, n_per_class=14, seed=101, n_undersized=2)


@pytest.fixture(scope="session")
def desk_dataset(tmp_path_factory) -> Path:
    """Desk-scale 4-class dataset: ~400 images above the 64-pixel filter."""
    root = tmp_path_factory.mktemp("signs_desk")
    return make_sign_dataset(root, n_per_class=100, seed=202, n_undersized=8)
