"""Simulator unit tests: gate matrices, state evolution, readout, oracle."""

import math

import numpy as np
import pytest
from conftest import SINGLE_KINDS, TWO_KINDS, random_circuit
from hypothesis import given, settings
from hypothesis import strategies as st

from quanvnet.errors import (
    CapacityError,
    DimensionError,
    ParameterError,
    QubitIndexError,
)
from quanvnet.qsim import (
    Circuit,
    GateKind,
    GateOp,
    apply_gate,
    circuit_from_text,
    circuit_to_text,
    dense_circuit_matrix,
    gate_matrix,
    pauli_z_expectation,
    run_circuit,
    state_zero,
)

ALL_KINDS = SINGLE_KINDS + TWO_KINDS


def op(kind, params=(), targets=(0,)):
    return GateOp(kind, tuple(params), tuple(targets))


class TestStateZero:
    def test_one_qubit(self):
        assert np.array_equal(state_zero(1), [1, 0])

    def test_two_qubits(self):
        assert np.array_equal(state_zero(2), [1, 0, 0, 0])

    def test_four_qubits_normalized(self):
        state = state_zero(4)
        assert state.shape == (16,)
        assert np.linalg.norm(state) == 1.0

    @pytest.mark.parametrize("n", [0, -1, 25])
    def test_capacity(self, n):
        with pytest.raises(CapacityError):
            state_zero(n)


class TestGateMatrix:
    def test_pauli_x(self):
        assert np.array_equal(gate_matrix(GateKind.X), [[0, 1], [1, 0]])

    def test_ry_zero_is_identity(self):
        assert np.allclose(gate_matrix(GateKind.RY, (0.0,)), np.eye(2))

    def test_ry_pi(self):
        assert np.allclose(gate_matrix(GateKind.RY, (math.pi,)), [[0, -1], [1, 0]],
                           atol=1e-15)

    def test_cnot(self):
        expected = [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]]
        assert np.array_equal(gate_matrix(GateKind.CNOT), expected)

    def test_cz(self):
        assert np.array_equal(gate_matrix(GateKind.CZ), np.diag([1, 1, 1, -1]))

    def test_rx_convention(self):
        theta = 0.9
        c, s = math.cos(theta / 2), math.sin(theta / 2)
        assert np.allclose(gate_matrix(GateKind.RX, (theta,)),
                           [[c, -1j * s], [-1j * s, c]])

    def test_rz_convention(self):
        theta = 1.3
        expected = np.diag([np.exp(-0.5j * theta), np.exp(0.5j * theta)])
        assert np.allclose(gate_matrix(GateKind.RZ, (theta,)), expected)

    def test_u1_is_phase(self):
        lam = 0.7
        assert np.allclose(gate_matrix(GateKind.U1, (lam,)),
                           np.diag([1, np.exp(1j * lam)]))

    def test_wrong_arity(self):
        with pytest.raises(ParameterError):
            gate_matrix(GateKind.X, (0.1,))
        with pytest.raises(ParameterError):
            gate_matrix(GateKind.U3, (0.1,))

    def test_unitarity_100_random_draws(self):
        rng = np.random.default_rng(0)
        for kind in ALL_KINDS:
            for _ in range(100):
                params = tuple(rng.uniform(0, 2 * np.pi, size=kind.n_params))
                mat = gate_matrix(kind, params)
                assert np.allclose(mat.conj().T @ mat, np.eye(mat.shape[0]),
                                   atol=1e-12), kind


class TestApplyGate:
    def test_x_flips_ground(self):
        assert np.array_equal(apply_gate(state_zero(1), op(GateKind.X)), [0, 1])

    def test_hadamard_superposition(self):
        state = apply_gate(state_zero(1), op(GateKind.H))
        assert np.allclose(state, [1 / math.sqrt(2), 1 / math.sqrt(2)])

    def test_cnot_control_high_bit(self):
        # |10> (qubit 1 set) with control=1, target=0 becomes |11>.
        state = apply_gate(state_zero(2), op(GateKind.X, targets=(1,)))
        state = apply_gate(state, op(GateKind.CNOT, targets=(1, 0)))
        assert np.array_equal(state, [0, 0, 0, 1])

    def test_cry_idle_when_control_clear(self):
        state = apply_gate(state_zero(2), op(GateKind.CRY, (1.1,), (0, 1)))
        assert np.array_equal(state, [1, 0, 0, 0])

    def test_input_not_mutated(self):
        state = state_zero(1)
        apply_gate(state, op(GateKind.X))
        assert np.array_equal(state, [1, 0])

    def test_bad_qubit_index(self):
        with pytest.raises(QubitIndexError):
            apply_gate(state_zero(1), op(GateKind.X, targets=(1,)))

    def test_control_equals_target(self):
        with pytest.raises(QubitIndexError):
            op(GateKind.CNOT, targets=(0, 0))


class TestRunCircuit:
    def test_empty_circuit_identity(self):
        state = state_zero(4)
        assert np.array_equal(run_circuit(Circuit(4), state), state)

    def test_x_twice_is_identity(self):
        circuit = Circuit(1, [op(GateKind.X), op(GateKind.X)])
        assert np.allclose(run_circuit(circuit, state_zero(1)), [1, 0])

    def test_bell_state(self):
        circuit = Circuit(2, [op(GateKind.H), op(GateKind.CNOT, targets=(0, 1))])
        expected = [1 / math.sqrt(2), 0, 0, 1 / math.sqrt(2)]
        assert np.allclose(run_circuit(circuit, state_zero(2)), expected)

    def test_qubit_count_mismatch(self):
        with pytest.raises(DimensionError):
            run_circuit(Circuit(2), state_zero(3))

    @pytest.mark.parametrize("kind", [GateKind.X, GateKind.Y, GateKind.Z, GateKind.H])
    def test_single_qubit_involutions(self, kind):
        rng = np.random.default_rng(1)
        state = rng.normal(size=8) + 1j * rng.normal(size=8)
        state /= np.linalg.norm(state)
        twice = Circuit(3, [op(kind, targets=(1,)), op(kind, targets=(1,))])
        assert np.allclose(run_circuit(twice, state), state, atol=1e-12)

    @pytest.mark.parametrize("kind", [GateKind.CNOT, GateKind.CZ])
    def test_two_qubit_involutions(self, kind):
        rng = np.random.default_rng(2)
        state = rng.normal(size=8) + 1j * rng.normal(size=8)
        state /= np.linalg.norm(state)
        twice = Circuit(3, [op(kind, targets=(2, 0)), op(kind, targets=(2, 0))])
        assert np.allclose(run_circuit(twice, state), state, atol=1e-12)

    @pytest.mark.parametrize("kind", [GateKind.RX, GateKind.RY, GateKind.RZ])
    @given(a=st.floats(-10, 10), b=st.floats(-10, 10))
    @settings(max_examples=25, deadline=None)
    def test_rotation_additivity(self, kind, a, b):
        state = apply_gate(state_zero(1), op(GateKind.H))
        split = run_circuit(Circuit(1, [op(kind, (a,)), op(kind, (b,))]), state)
        joint = run_circuit(Circuit(1, [op(kind, (a + b,))]), state)
        assert np.allclose(split, joint, atol=1e-12)

    def test_norm_preserved_on_random_circuits(self):
        rng = np.random.default_rng(3)
        for _ in range(25):
            n = int(rng.integers(1, 5))
            circuit = random_circuit(rng, n, int(rng.integers(1, 51)))
            state = run_circuit(circuit, state_zero(n))
            assert abs(np.linalg.norm(state) - 1.0) < 1e-10


class TestPauliZExpectation:
    def test_ground_state(self):
        assert pauli_z_expectation(state_zero(1), 0) == 1.0

    def test_excited_state(self):
        state = apply_gate(state_zero(1), op(GateKind.X))
        assert pauli_z_expectation(state, 0) == -1.0

    def test_equal_superposition(self):
        state = apply_gate(state_zero(1), op(GateKind.H))
        assert abs(pauli_z_expectation(state, 0)) < 1e-12

    def test_ry_readout_is_cosine(self):
        for theta in np.linspace(-2 * math.pi, 2 * math.pi, 50):
            state = apply_gate(state_zero(1), op(GateKind.RY, (theta,)))
            assert abs(pauli_z_expectation(state, 0) - math.cos(theta)) < 1e-12

    def test_specific_angle(self):
        state = apply_gate(state_zero(1), op(GateKind.RY, (0.7,)))
        assert pauli_z_expectation(state, 0) == pytest.approx(0.7648421872844885,
                                                              abs=1e-12)

    def test_bounded_on_random_states(self):
        rng = np.random.default_rng(4)
        for _ in range(50):
            circuit = random_circuit(rng, 3, 20)
            state = run_circuit(circuit, state_zero(3))
            for q in range(3):
                assert -1.0 <= pauli_z_expectation(state, q) <= 1.0

    def test_bad_qubit(self):
        with pytest.raises(QubitIndexError):
            pauli_z_expectation(state_zero(2), 2)


class TestDenseOracle:
    def test_x_matrix(self):
        circuit = Circuit(1, [op(GateKind.X)])
        assert np.array_equal(dense_circuit_matrix(circuit), [[0, 1], [1, 0]])

    def test_empty_two_qubits(self):
        assert np.array_equal(dense_circuit_matrix(Circuit(2)), np.eye(4))

    def test_h_twice_identity(self):
        circuit = Circuit(1, [op(GateKind.H), op(GateKind.H)])
        assert np.allclose(dense_circuit_matrix(circuit), np.eye(2), atol=1e-12)

    def test_capacity(self):
        with pytest.raises(CapacityError):
            dense_circuit_matrix(Circuit(7))

    def test_apply_path_agrees_with_dense_oracle(self):
        rng = np.random.default_rng(5)
        for _ in range(60):
            n = int(rng.integers(1, 5))
            circuit = random_circuit(rng, n, int(rng.integers(1, 51)))
            via_kernels = run_circuit(circuit, state_zero(n))
            via_matrix = dense_circuit_matrix(circuit) @ state_zero(n)
            assert np.allclose(via_kernels, via_matrix, atol=1e-10)

    def test_oracle_matrices_are_unitary(self):
        rng = np.random.default_rng(6)
        for _ in range(10):
            circuit = random_circuit(rng, 3, 30)
            mat = dense_circuit_matrix(circuit)
            assert np.allclose(mat.conj().T @ mat, np.eye(8), atol=1e-10)


class TestTextSerialization:
    def test_round_trip(self):
        rng = np.random.default_rng(7)
        circuit = random_circuit(rng, 4, 25)
        parsed = circuit_from_text(circuit_to_text(circuit))
        assert parsed.n_qubits == circuit.n_qubits
        assert parsed.ops == circuit.ops

    def test_format_shape(self):
        circuit = Circuit(2, [op(GateKind.RY, (0.5,), (1,)),
                              op(GateKind.CNOT, targets=(0, 1))])
        text = circuit_to_text(circuit)
        assert text.splitlines()[1] == "RY 1 0.5"
        assert text.splitlines()[2] == "CNOT 0,1"
