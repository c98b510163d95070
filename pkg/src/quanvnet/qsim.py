"""Dense state-vector simulator for small qubit registers.

States are complex128 arrays of length ``2**n`` in little-endian order:
basis index ``b`` encodes qubit ``q`` as bit ``q`` of ``b`` (qubit 0 is the
least significant bit).  Two-qubit matrices pack their row/column index as
``(control << 1) | target``.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import CapacityError, DimensionError, ParameterError, QubitIndexError

MAX_QUBITS = 24
DENSE_MAX_QUBITS = 6


class GateKind(Enum):
    X = "X"
    Y = "Y"
    Z = "Z"
    RX = "RX"
    RY = "RY"
    RZ = "RZ"
    H = "H"
    U1 = "U1"
    U2 = "U2"
    U3 = "U3"
    CNOT = "CNOT"
    CZ = "CZ"
    CRY = "CRY"

    @property
    def n_params(self) -> int:
        return _ARITY[self]

    @property
    def n_targets(self) -> int:
        return 2 if self in (GateKind.CNOT, GateKind.CZ, GateKind.CRY) else 1


_ARITY = {
    GateKind.X: 0,
    GateKind.Y: 0,
    GateKind.Z: 0,
    GateKind.H: 0,
    GateKind.CNOT: 0,
    GateKind.CZ: 0,
    GateKind.RX: 1,
    GateKind.RY: 1,
    GateKind.RZ: 1,
    GateKind.U1: 1,
    GateKind.CRY: 1,
    GateKind.U2: 2,
    GateKind.U3: 3,
}


@dataclass(frozen=True)
class GateOp:
    """One gate application: kind, angle parameters, target qubit(s).

    ``targets`` holds one index for single-qubit kinds and
    ``(control, target)`` for CNOT/CZ/CRY.
    """

    kind: GateKind
    params: tuple[float, ...] = ()
    targets: tuple[int, ...] = ()

    def __post_init__(self):
        if len(self.params) != self.kind.n_params:
            raise ParameterError(
                f"{self.kind.value} takes {self.kind.n_params} parameter(s), "
                f"got {len(self.params)}"
            )
        if len(self.targets) != self.kind.n_targets:
            raise QubitIndexError(
                f"{self.kind.value} acts on {self.kind.n_targets} qubit(s), "
                f"got targets {self.targets}"
            )
        if self.kind.n_targets == 2 and self.targets[0] == self.targets[1]:
            raise QubitIndexError("control and target must differ")


@dataclass
class Circuit:
    n_qubits: int
    ops: list[GateOp] = field(default_factory=list)

    def __post_init__(self):
        for op in self.ops:
            _check_targets(op, self.n_qubits)

    def append(self, op: GateOp) -> None:
        _check_targets(op, self.n_qubits)
        self.ops.append(op)

    def __len__(self) -> int:
        return len(self.ops)


def _check_targets(op: GateOp, n_qubits: int) -> None:
    for q in op.targets:
        if not 0 <= q < n_qubits:
            raise QubitIndexError(f"qubit {q} out of range for {n_qubits}-qubit register")


def state_zero(n_qubits: int) -> np.ndarray:
    """All-qubits-ground state |0...0>."""
    if not 1 <= n_qubits <= MAX_QUBITS:
        raise CapacityError(f"n_qubits must be in [1, {MAX_QUBITS}], got {n_qubits}")
    state = np.zeros(1 << n_qubits, dtype=np.complex128)
    state[0] = 1.0
    return state


def num_qubits(state: np.ndarray) -> int:
    n = int(state.shape[0]).bit_length() - 1
    if state.ndim != 1 or state.shape[0] != (1 << n):
        raise DimensionError(f"state length {state.shape} is not a power of two")
    return n


def gate_matrix(kind: GateKind, params: tuple[float, ...] = ()) -> np.ndarray:
    """Unitary matrix for a gate kind (2x2, or 4x4 with control as bit 1)."""
    if len(params) != kind.n_params:
        raise ParameterError(
            f"{kind.value} takes {kind.n_params} parameter(s), got {len(params)}"
        )
    if kind is GateKind.X:
        return np.array([[0, 1], [1, 0]], dtype=np.complex128)
    if kind is GateKind.Y:
        return np.array([[0, -1j], [1j, 0]], dtype=np.complex128)
    if kind is GateKind.Z:
        return np.array([[1, 0], [0, -1]], dtype=np.complex128)
    if kind is GateKind.H:
        return np.array([[1, 1], [1, -1]], dtype=np.complex128) / math.sqrt(2)
    if kind is GateKind.RX:
        c, s = math.cos(params[0] / 2), math.sin(params[0] / 2)
        return np.array([[c, -1j * s], [-1j * s, c]], dtype=np.complex128)
    if kind is GateKind.RY:
        c, s = math.cos(params[0] / 2), math.sin(params[0] / 2)
        return np.array([[c, -s], [s, c]], dtype=np.complex128)
    if kind is GateKind.RZ:
        half = 1j * params[0] / 2
        return np.array(
            [[cmath.exp(-half), 0], [0, cmath.exp(half)]], dtype=np.complex128
        )
    if kind is GateKind.U1:
        return np.array([[1, 0], [0, cmath.exp(1j * params[0])]], dtype=np.complex128)
    if kind is GateKind.U2:
        phi, lam = params
        return np.array(
            [
                [1, -cmath.exp(1j * lam)],
                [cmath.exp(1j * phi), cmath.exp(1j * (phi + lam))],
            ],
            dtype=np.complex128,
        ) / math.sqrt(2)
    if kind is GateKind.U3:
        theta, phi, lam = params
        c, s = math.cos(theta / 2), math.sin(theta / 2)
        return np.array(
            [
                [c, -cmath.exp(1j * lam) * s],
                [cmath.exp(1j * phi) * s, cmath.exp(1j * (phi + lam)) * c],
            ],
            dtype=np.complex128,
        )
    if kind is GateKind.CNOT:
        return np.array(
            [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]],
            dtype=np.complex128,
        )
    if kind is GateKind.CZ:
        return np.diag([1, 1, 1, -1]).astype(np.complex128)
    if kind is GateKind.CRY:
        c, s = math.cos(params[0] / 2), math.sin(params[0] / 2)
        return np.array(
            [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, c, -s], [0, 0, s, c]],
            dtype=np.complex128,
        )
    raise ParameterError(f"unknown gate kind {kind!r}")


def _apply_single(state: np.ndarray, mat: np.ndarray, qubit: int) -> np.ndarray:
    """Apply a 2x2 unitary to one qubit; touches each amplitude pair once."""
    n = state.shape[0]
    low = 1 << qubit
    view = state.reshape(n >> (qubit + 1), 2, low)
    out = np.empty_like(view)
    out[:, 0, :] = mat[0, 0] * view[:, 0, :] + mat[0, 1] * view[:, 1, :]
    out[:, 1, :] = mat[1, 0] * view[:, 0, :] + mat[1, 1] * view[:, 1, :]
    return out.reshape(n)


def _apply_controlled(
    state: np.ndarray, mat2: np.ndarray, control: int, target: int, n_qubits: int
) -> np.ndarray:
    """Apply a 2x2 unitary to ``target`` on the control=|1> subspace."""
    out = state.reshape((2,) * n_qubits).copy()
    c_axis = n_qubits - 1 - control
    t_axis = n_qubits - 1 - target
    idx = [slice(None)] * n_qubits
    idx[c_axis] = 1
    sub = out[tuple(idx)]
    sub_t_axis = t_axis if t_axis < c_axis else t_axis - 1
    moved = np.moveaxis(sub, sub_t_axis, 0)
    s0 = moved[0].copy()
    s1 = moved[1].copy()
    moved[0] = mat2[0, 0] * s0 + mat2[0, 1] * s1
    moved[1] = mat2[1, 0] * s0 + mat2[1, 1] * s1
    return out.reshape(state.shape[0])


_CONTROLLED_BASE = {
    GateKind.CNOT: GateKind.X,
    GateKind.CZ: GateKind.Z,
    GateKind.CRY: GateKind.RY,
}


def apply_gate(state: np.ndarray, op: GateOp) -> np.ndarray:
    """Return the state after applying one gate (input is not modified)."""
    n = num_qubits(state)
    _check_targets(op, n)
    if op.kind.n_targets == 1:
        return _apply_single(state, gate_matrix(op.kind, op.params), op.targets[0])
    base = gate_matrix(_CONTROLLED_BASE[op.kind], op.params)
    control, target = op.targets
    return _apply_controlled(state, base, control, target, n)


def run_circuit(circuit: Circuit, state: np.ndarray) -> np.ndarray:
    """Apply the circuit's ops in order to a copy of the state."""
    if num_qubits(state) != circuit.n_qubits:
        raise DimensionError(
            f"state has {num_qubits(state)} qubits, circuit expects {circuit.n_qubits}"
        )
    for op in circuit.ops:
        state = apply_gate(state, op)
    return state


def pauli_z_expectation(state: np.ndarray, qubit: int) -> float:
    """<Z_q> = P(bit q = 0) - P(bit q = 1)."""
    n = num_qubits(state)
    if not 0 <= qubit < n:
        raise QubitIndexError(f"qubit {qubit} out of range for {n}-qubit state")
    probs = np.abs(state) ** 2
    low = 1 << qubit
    view = probs.reshape(state.shape[0] >> (qubit + 1), 2, low)
    return float(view[:, 0, :].sum() - view[:, 1, :].sum())


def dense_circuit_matrix(circuit: Circuit) -> np.ndarray:
    """Full ``2**n x 2**n`` unitary of a circuit, by explicit basis-index lifting.

    Independent of :func:`apply_gate`; intended as an equivalence oracle.
    """
    n = circuit.n_qubits
    if n > DENSE_MAX_QUBITS:
        raise CapacityError(f"dense matrix capped at {DENSE_MAX_QUBITS} qubits, got {n}")
    dim = 1 << n
    total = np.eye(dim, dtype=np.complex128)
    for op in circuit.ops:
        lifted = np.zeros((dim, dim), dtype=np.complex128)
        if op.kind.n_targets == 1:
            mat = gate_matrix(op.kind, op.params)
            q = op.targets[0]
            for col in range(dim):
                bit = (col >> q) & 1
                rest = col & ~(1 << q)
                for out_bit in range(2):
                    lifted[rest | (out_bit << q), col] = mat[out_bit, bit]
        else:
            mat = gate_matrix(op.kind, op.params)
            control, target = op.targets
            for col in range(dim):
                c = (col >> control) & 1
                t = (col >> target) & 1
                rest = col & ~(1 << control) & ~(1 << target)
                for c_out in range(2):
                    for t_out in range(2):
                        row = rest | (c_out << control) | (t_out << target)
                        lifted[row, col] = mat[(c_out << 1) | t_out, (c << 1) | t]
        total = lifted @ total
    return total


def circuit_to_text(circuit: Circuit) -> str:
    """Debug dump, one op per line: ``KIND q0[,q1] [angle...]``."""
    lines = [f"# qubits {circuit.n_qubits}"]
    for op in circuit.ops:
        parts = [op.kind.value, ",".join(str(q) for q in op.targets)]
        parts.extend(repr(float(p)) for p in op.params)
        lines.append(" ".join(parts))
    return "\n".join(lines) + "\n"


def circuit_from_text(text: str) -> Circuit:
    n_qubits = None
    ops = []
    for raw in text.splitlines():
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            fields = line[1:].split()
            if len(fields) == 2 and fields[0] == "qubits":
                n_qubits = int(fields[1])
            continue
        tokens = line.split()
        kind = GateKind(tokens[0])
        targets = tuple(int(q) for q in tokens[1].split(","))
        params = tuple(float(p) for p in tokens[2:])
        ops.append(GateOp(kind, params, targets))
    if n_qubits is None:
        n_qubits = 1 + max((q for op in ops for q in op.targets), default=0)
    return Circuit(n_qubits, ops)
