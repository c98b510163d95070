"""Quanvolution: map 2x2 image patches through a 4-qubit circuit.

Each patch pixel drives an RY data-embedding rotation on its own qubit
(top-left pixel -> qubit 0, row-major).  A fixed seeded random circuit of
RY layers and a CNOT entangling ring follows, and the per-qubit Pauli-Z
expectations become the output channels.  The transform is untrained and
fully determined by :class:`QuanvFilterSpec`.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass

import numpy as np

from . import qsim
from .errors import DimensionError
from .qsim import Circuit, GateKind, GateOp
from .rng import Xoshiro256pp

PATCH = 2
N_QUBITS = PATCH * PATCH


@dataclass(frozen=True)
class QuanvFilterSpec:
    """Complete description of the quanvolution transform.

    Patch size and stride are fixed at 2 (non-overlapping patches), so the
    output is (H//2, W//2) with ``4 * n_filters`` channels.
    """

    n_random_layers: int = 2
    seed: int = 0
    embed_scale: float = math.pi
    n_filters: int = 1

    patch_size: int = PATCH
    stride: int = PATCH
    n_qubits: int = N_QUBITS

    def __post_init__(self):
        if self.patch_size != PATCH or self.stride != PATCH:
            raise DimensionError("patch_size and stride are fixed at 2")
        if self.n_qubits != self.patch_size**2:
            raise DimensionError("n_qubits must equal patch_size**2")
        if self.n_random_layers < 0:
            raise DimensionError("n_random_layers must be >= 0")
        if self.n_filters < 1:
            raise DimensionError("n_filters must be >= 1")

    @property
    def n_channels(self) -> int:
        return self.n_qubits * self.n_filters

    def describe(self) -> str:
        """Canonical one-line form, hashed into cache headers."""
        return (
            f"patch={self.patch_size} stride={self.stride} qubits={self.n_qubits} "
            f"layers={self.n_random_layers} seed={self.seed} "
            f"scale={self.embed_scale!r} filters={self.n_filters}"
        )


_clamp_lock = threading.Lock()
_clamp_count = 0


def clamp_warning_count() -> int:
    """Number of out-of-range pixel values clamped during embedding so far."""
    return _clamp_count


def reset_clamp_warnings() -> None:
    global _clamp_count
    with _clamp_lock:
        _clamp_count = 0


def _note_clamped(n: int) -> None:
    global _clamp_count
    if n:
        with _clamp_lock:
            _clamp_count += n


def build_random_circuits(spec: QuanvFilterSpec) -> list[Circuit]:
    """One seeded random circuit per filter, all drawn from a single stream.

    Each layer is an RY(theta_q) on every qubit followed by the CNOT ring
    control q -> target (q+1) mod 4, so a layer contributes 8 ops.
    """
    stream = Xoshiro256pp(spec.seed)
    circuits = []
    for _ in range(spec.n_filters):
        circuit = Circuit(spec.n_qubits)
        for _ in range(spec.n_random_layers):
            for q in range(spec.n_qubits):
                circuit.append(GateOp(GateKind.RY, (stream.angle(),), (q,)))
            for q in range(spec.n_qubits):
                circuit.append(
                    GateOp(GateKind.CNOT, (), (q, (q + 1) % spec.n_qubits))
                )
        circuits.append(circuit)
    return circuits


def build_random_circuit(spec: QuanvFilterSpec) -> Circuit:
    """The first (or only) filter circuit for the spec."""
    return build_random_circuits(spec)[0]


def _clamped_patch(patch, spec: QuanvFilterSpec) -> np.ndarray:
    values = np.asarray(patch, dtype=np.float64).reshape(spec.n_qubits)
    out_of_range = int(np.count_nonzero((values < 0.0) | (values > 1.0)))
    if out_of_range:
        _note_clamped(out_of_range)
        values = np.clip(values, 0.0, 1.0)
    return values


def embed_patch(patch, spec: QuanvFilterSpec) -> Circuit:
    """Data-embedding circuit: RY(embed_scale * p_q) on qubit q."""
    values = _clamped_patch(patch, spec)
    circuit = Circuit(spec.n_qubits)
    for q, value in enumerate(values):
        circuit.append(GateOp(GateKind.RY, (spec.embed_scale * value,), (q,)))
    return circuit


def quanv_patch(patch, random_circuit: Circuit, spec: QuanvFilterSpec) -> np.ndarray:
    """Channel values for one patch: embed, entangle, read out <Z_q>."""
    state = qsim.run_circuit(embed_patch(patch, spec), qsim.state_zero(spec.n_qubits))
    state = qsim.run_circuit(random_circuit, state)
    return np.array(
        [qsim.pauli_z_expectation(state, q) for q in range(spec.n_qubits)]
    )


def _batch_apply_single(states: np.ndarray, mat: np.ndarray, qubit: int) -> np.ndarray:
    # states: (P, 2**n); same 2x2 applied to every row.
    n_amp = states.shape[1]
    low = 1 << qubit
    view = states.reshape(states.shape[0], n_amp >> (qubit + 1), 2, low)
    out = np.empty_like(view)
    out[:, :, 0, :] = mat[0, 0] * view[:, :, 0, :] + mat[0, 1] * view[:, :, 1, :]
    out[:, :, 1, :] = mat[1, 0] * view[:, :, 0, :] + mat[1, 1] * view[:, :, 1, :]
    return out.reshape(states.shape)


def _batch_apply_cnot(states: np.ndarray, control: int, target: int, n: int) -> np.ndarray:
    shaped = states.reshape((states.shape[0],) + (2,) * n)
    out = shaped.copy()
    c_axis = 1 + (n - 1 - control)
    t_axis = 1 + (n - 1 - target)
    idx = [slice(None)] * (n + 1)
    idx[c_axis] = 1
    sub = out[tuple(idx)]
    sub_t_axis = t_axis if t_axis < c_axis else t_axis - 1
    moved = np.moveaxis(sub, sub_t_axis, 1)
    flipped = moved[:, ::-1].copy()
    moved[:, :] = flipped
    return out.reshape(states.shape)


def _batch_embed_ry(states: np.ndarray, angles: np.ndarray, qubit: int) -> np.ndarray:
    # angles: one rotation per row of states.
    n_amp = states.shape[1]
    low = 1 << qubit
    c = np.cos(angles / 2)[:, None, None]
    s = np.sin(angles / 2)[:, None, None]
    view = states.reshape(states.shape[0], n_amp >> (qubit + 1), 2, low)
    out = np.empty_like(view)
    out[:, :, 0, :] = c * view[:, :, 0, :] - s * view[:, :, 1, :]
    out[:, :, 1, :] = s * view[:, :, 0, :] + c * view[:, :, 1, :]
    return out.reshape(states.shape)


def _batch_run(patches: np.ndarray, circuit: Circuit, spec: QuanvFilterSpec) -> np.ndarray:
    """Evolve many patches at once; rows of ``patches`` are flattened 2x2 blocks."""
    n = spec.n_qubits
    states = np.zeros((patches.shape[0], 1 << n), dtype=np.complex128)
    states[:, 0] = 1.0
    for q in range(n):
        states = _batch_embed_ry(states, spec.embed_scale * patches[:, q], q)
    for op in circuit.ops:
        if op.kind is GateKind.CNOT:
            states = _batch_apply_cnot(states, op.targets[0], op.targets[1], n)
        else:
            states = _batch_apply_single(
                states, qsim.gate_matrix(op.kind, op.params), op.targets[0]
            )
    probs = np.abs(states) ** 2
    expectations = np.empty((patches.shape[0], n))
    for q in range(n):
        low = 1 << q
        view = probs.reshape(probs.shape[0], probs.shape[1] >> (q + 1), 2, low)
        expectations[:, q] = view[:, :, 0, :].sum(axis=(1, 2)) - view[:, :, 1, :].sum(
            axis=(1, 2)
        )
    return expectations


def _extract_patches(image: np.ndarray) -> tuple[np.ndarray, int, int]:
    if image.ndim == 3:
        if image.shape[2] != 1:
            raise DimensionError(f"expected single-channel image, got {image.shape}")
        image = image[:, :, 0]
    if image.ndim != 2:
        raise DimensionError(f"expected HxW or HxWx1 image, got shape {image.shape}")
    h, w = image.shape
    if h < PATCH or w < PATCH:
        raise DimensionError(f"image {h}x{w} smaller than {PATCH}x{PATCH} patch")
    out_h, out_w = h // PATCH, w // PATCH
    cropped = image[: out_h * PATCH, : out_w * PATCH]
    blocks = cropped.reshape(out_h, PATCH, out_w, PATCH).transpose(0, 2, 1, 3)
    return blocks.reshape(out_h * out_w, N_QUBITS).astype(np.float64), out_h, out_w


def quanv_image(image: np.ndarray, spec: QuanvFilterSpec) -> np.ndarray:
    """Feature map for one image: (H//2, W//2, 4 * n_filters) float32 in [-1, 1].

    Partial edge patches are discarded.  All patches evolve in one batched
    pass per filter circuit; the result matches per-patch simulation.
    """
    patches, out_h, out_w = _extract_patches(np.asarray(image))
    out_of_range = int(np.count_nonzero((patches < 0.0) | (patches > 1.0)))
    if out_of_range:
        _note_clamped(out_of_range)
        patches = np.clip(patches, 0.0, 1.0)
    channels = [
        _batch_run(patches, circuit, spec) for circuit in build_random_circuits(spec)
    ]
    stacked = np.concatenate(channels, axis=1)
    return stacked.reshape(out_h, out_w, spec.n_channels).astype(np.float32)
