import numpy as np
import pytest

from qdac import sim
from qdac.classical import compute_domain_stats
from qdac.data import Dataset

from conftest import random_state_vector


def test_amplitude_encode_examples():
    np.testing.assert_allclose(sim.amplitude_encode([1, 0, 0, 0]).amplitudes, [1, 0, 0, 0])
    np.testing.assert_allclose(sim.amplitude_encode([1, 1, 1, 1]).amplitudes, [0.5] * 4)
    np.testing.assert_allclose(sim.amplitude_encode([3, 4]).amplitudes, [0.6, 0.8])


def test_amplitude_encode_pads_and_rejects():
    s = sim.amplitude_encode([1, 1, 1], qubits=2)
    assert s.dim == 4 and s.amplitudes[3] == 0
    with pytest.raises(ValueError):
        sim.amplitude_encode([0, 0])
    with pytest.raises(ValueError):
        sim.amplitude_encode([1, 2, 3], qubits=1)


def test_state_validation():
    with pytest.raises(ValueError, match="normalized"):
        sim.StateVector(np.array([1.0, 1.0]), 1)
    with pytest.raises(ValueError, match="cap"):
        sim.basis_state(0, sim.MAX_QUBITS + 1)
    with pytest.raises(ValueError):
        sim.DensityMatrix(np.diag([0.7, 0.7]))
    with pytest.raises(ValueError):
        sim.DensityMatrix(np.diag([1.5, -0.5]))


def test_hadamard_on_zero():
    out = sim.apply(sim.basis_state(0, 1), [sim.h(0)])
    np.testing.assert_allclose(out.amplitudes, np.array([1, 1]) / np.sqrt(2), atol=1e-15)


@pytest.mark.parametrize("theta", [0.0, 0.4, 1.3, np.pi, 5.0])
def test_ry_convention(theta):
    out = sim.apply(sim.basis_state(0, 1), [sim.ry(theta, 0)])
    np.testing.assert_allclose(out.amplitudes, [np.cos(theta / 2), np.sin(theta / 2)], atol=1e-15)


def test_big_endian_ordering():
    out = sim.apply(sim.basis_state(0, 3), [sim.x(0)])
    assert out.probabilities()[4] == pytest.approx(1.0)
    out = sim.apply(sim.basis_state(0, 3), [sim.x(2)])
    assert out.probabilities()[1] == pytest.approx(1.0)


def _dense(gate, n):
    """Independent oracle: embed a gate via explicit basis-index arithmetic."""
    wires = list(gate.controls) + list(gate.targets)
    k = len(gate.targets)
    m = gate.target_matrix()
    u = np.zeros((2**n, 2**n), dtype=complex)
    for col in range(2**n):
        bits = [(col >> (n - 1 - q)) & 1 for q in range(n)]
        if not all(bits[c] for c in gate.controls):
            u[col, col] = 1
            continue
        sub = int("".join(str(bits[t]) for t in gate.targets), 2) if k else 0
        for out_sub in range(2**k):
            nb = list(bits)
            for i, t in enumerate(gate.targets):
                nb[t] = (out_sub >> (k - 1 - i)) & 1
            row = int("".join(map(str, nb)), 2)
            u[row, col] += m[out_sub, sub]
    assert len(set(wires)) == len(wires)
    return u


def test_random_three_qubit_circuit_matches_dense_product(rng):
    n = 3
    gates = []
    for _ in range(25):
        kind = rng.integers(7)
        a, b = rng.choice(n, 2, replace=False)
        theta = rng.uniform(-np.pi, np.pi)
        gates.append(
            [sim.h(a), sim.x(a), sim.ry(theta, a), sim.rz(theta, a), sim.cz(a, b), sim.cnot(a, b), sim.phase(theta, a, [b])][kind]
        )
    psi = sim.StateVector(random_state_vector(rng, 8), n)
    u = np.eye(8, dtype=complex)
    for g in gates:
        u = _dense(g, n) @ u
    out = sim.apply(psi, gates)
    np.testing.assert_allclose(out.amplitudes, u @ psi.amplitudes, atol=1e-10)
    np.testing.assert_allclose(sim.Circuit(n, gates).unitary(), u, atol=1e-10)


def test_circuit_rejects_bad_wires():
    with pytest.raises(ValueError):
        sim.Circuit(2).append(sim.h(2))
    with pytest.raises(ValueError):
        sim.cnot(1, 1)


def test_qft_examples():
    hadamard = np.array([[1, 1], [1, -1]]) / np.sqrt(2)
    np.testing.assert_allclose(sim.Circuit(1, [sim.qft_gate([0])]).unitary(), hadamard, atol=1e-12)
    out = sim.qft(sim.basis_state(0, 3), range(3))
    np.testing.assert_allclose(out.amplitudes, np.full(8, 1 / np.sqrt(8)), atol=1e-12)


def test_qft_matches_dft():
    w = np.exp(2j * np.pi / 8)
    dft = np.array([[w ** (j * k) for k in range(8)] for j in range(8)]) / np.sqrt(8)
    u = sim.Circuit(3, sim.qft_gate(range(3)).decompose()).unitary()
    np.testing.assert_allclose(u, dft, atol=1e-12)
    ui = sim.Circuit(3, sim.qft_gate(range(3), inverse=True).decompose()).unitary()
    np.testing.assert_allclose(ui, dft.conj().T, atol=1e-12)


def test_qft_on_subregister(rng):
    psi = sim.StateVector(random_state_vector(rng, 16), 4)
    out = sim.qft(psi, [1, 2])
    t = psi.amplitudes.reshape(2, 4, 2)
    expected = np.einsum("jk,akb->ajb", sim.dft_matrix(2), t).reshape(-1)
    np.testing.assert_allclose(out.amplitudes, expected, atol=1e-12)


def test_partial_trace_examples():
    plus = np.array([1, 1]) / np.sqrt(2)
    prod = sim.StateVector(np.kron([1, 0], plus), 2)
    np.testing.assert_allclose(sim.partial_trace(prod, [1]).matrix, np.outer(plus, plus), atol=1e-15)
    bell = sim.StateVector(np.array([1, 0, 0, 1]) / np.sqrt(2), 2)
    for keep in ([0], [1]):
        np.testing.assert_allclose(sim.partial_trace(bell, keep).matrix, np.eye(2) / 2, atol=1e-15)


def test_partial_trace_of_encoded_data_matrix(rng):
    x = rng.standard_normal((2, 2))
    state = sim.amplitude_encode(x.T.reshape(-1), 2)  # |column index>|feature>
    rho = sim.partial_trace(state, [1]).matrix
    stats = compute_domain_stats(Dataset(x, None, "target"))
    np.testing.assert_allclose(rho, stats.second_moment, atol=1e-10)
    np.testing.assert_allclose(rho, x @ x.T / np.sum(x**2), atol=1e-10)


def test_expectation_examples():
    z = np.diag([1.0, -1.0])
    assert sim.expectation(sim.basis_state(0, 1), z) == pytest.approx(1.0)
    plus = sim.apply(sim.basis_state(0, 1), [sim.h(0)])
    assert sim.expectation(plus, z) == pytest.approx(0.0, abs=1e-15)
    for theta in (0.3, 1.1, 2.5):
        s = sim.apply(sim.basis_state(0, 1), [sim.ry(theta, 0)])
        assert sim.expectation(s, z) == pytest.approx(np.cos(theta), abs=1e-12)
    with pytest.raises(ValueError):
        sim.expectation(plus, np.array([[0, 1], [0, 0]]))


def test_sample_shots_examples():
    assert sim.sample_shots(sim.basis_state(0, 1), [0], 777, seed=3) == {0: 777}
    plus = sim.apply(sim.basis_state(0, 1), [sim.h(0)])
    shots = 10**5
    freq = sim.sample_shots(plus, [0], shots, seed=11).get(0, 0) / shots
    assert abs(freq - 0.5) <= 5 * np.sqrt(0.25 / shots)


def test_sample_shots_total_variation(rng):
    psi = sim.StateVector(random_state_vector(rng, 8), 3)
    shots = 10**6
    counts = sim.sample_shots(psi, range(3), shots, seed=5)
    emp = np.array([counts.get(k, 0) for k in range(8)]) / shots
    assert 0.5 * np.abs(emp - psi.probabilities()).sum() < 0.01


def test_sample_shots_seeded():
    psi = sim.apply(sim.basis_state(0, 2), [sim.h(0), sim.h(1)])
    assert sim.sample_shots(psi, [0, 1], 500, 9) == sim.sample_shots(psi, [0, 1], 500, 9)
    assert sim.sample_shots(psi, [0, 1], 500, 9) != sim.sample_shots(psi, [0, 1], 500, 10)


def test_marginal_probabilities(rng):
    psi = sim.StateVector(random_state_vector(rng, 8), 3)
    p = sim.marginal_probabilities(psi, [2, 0])
    t = psi.probabilities().reshape(2, 2, 2)
    np.testing.assert_allclose(p, t.sum(axis=1).T.reshape(-1), atol=1e-15)
