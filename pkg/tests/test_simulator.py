from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from xebref import simulator
from xebref.clifford import CZ, H, S, X, Y, Z, clifford_group
from xebref.ensembles import haar_unitary
from xebref.simulator import (
    Circuit,
    Layer,
    LocalNoiseModel,
    SimulationIntegrityError,
    apply_depolarizing,
    apply_local_depolarizing,
    check_density_matrix,
    embed,
    ground_state,
    ideal_probabilities,
    probabilities,
    run_noisy_circuit,
    sample_bitstrings,
)

PAULIS = [np.eye(2), X, Y, Z]


def random_state(n, rng, rank=None):
    d = 2**n
    g = rng.normal(size=(d, rank or d)) + 1j * rng.normal(size=(d, rank or d))
    rho = g @ g.conj().T
    return rho / np.trace(rho)


def kraus_depolarizing(rho, qubit, n, p):
    # independent oracle: explicit Pauli Kraus operators
    out = p * rho
    for P in PAULIS:
        k = embed(P, (qubit,), n)
        out = out + (1 - p) / 4 * k @ rho @ k.conj().T
    return out


def test_local_noise_validates():
    with pytest.raises(ValueError):
        LocalNoiseModel((1.2, 0.9))
    with pytest.raises(ValueError):
        LocalNoiseModel((0.9,), interleaved_gate_p=-0.1)
    m = LocalNoiseModel.from_errors((0.006, 0.004))
    assert m.per_qubit_p == (0.994, 0.996)
    assert np.allclose(m.errors, (0.006, 0.004))


@pytest.mark.parametrize("n", [1, 2, 3])
def test_depolarizing_matches_kraus_form(n, rng):
    rho = random_state(n, rng)
    for q in range(n):
        got = apply_local_depolarizing(rho, q, 0.83)
        assert np.allclose(got, kraus_depolarizing(rho, q, n, 0.83), atol=1e-14)


def test_pauli_transfer_matrix_is_diagonal(rng):
    # single-qubit PTM of the channel is diag(1, p, p, p)
    p = 0.7
    ptm = np.empty((4, 4))
    for i, a in enumerate(PAULIS):
        out = apply_depolarizing(a.astype(complex) / 2, (0,), p)
        for j, b in enumerate(PAULIS):
            ptm[j, i] = np.real(np.trace(b @ out))
    assert np.allclose(ptm, np.diag([1, p, p, p]), atol=1e-14)


def test_two_qubit_depolarizing_fully_mixes(rng):
    rho = random_state(2, rng)
    assert np.allclose(apply_depolarizing(rho, (0, 1), 0.0), np.eye(4) / 4, atol=1e-15)
    assert np.allclose(apply_depolarizing(rho, (0, 1), 1.0), rho)


def test_depolarizing_rejects_bad_inputs():
    rho = ground_state(2)
    with pytest.raises(ValueError):
        apply_depolarizing(rho, (2,), 0.5)
    with pytest.raises(ValueError):
        apply_depolarizing(rho, (0,), 1.5)
    with pytest.raises(ValueError):
        apply_depolarizing(np.eye(3) / 3, (0,), 0.5)


@settings(max_examples=40, deadline=None)
@given(
    p=st.floats(0.0, 1.0),
    n=st.integers(1, 4),
    seed=st.integers(0, 2**31),
)
def test_channel_keeps_valid_state(p, n, seed):
    rng = np.random.default_rng(seed)
    rho = random_state(n, rng, rank=1)
    u = haar_unitary(2**n, rng)
    out = simulator.apply_unitary(rho, u)
    for q in range(n):
        out = apply_depolarizing(out, (q,), p)
    check_density_matrix(out)
    assert abs(np.trace(out) - 1) < simulator.TRACE_TOL


def test_integrity_check_catches_violations():
    with pytest.raises(SimulationIntegrityError):
        check_density_matrix(np.diag([0.6, 0.6]).astype(complex))
    with pytest.raises(SimulationIntegrityError):
        check_density_matrix(np.array([[0.5, 0.1], [0.2, 0.5]], dtype=complex))
    with pytest.raises(SimulationIntegrityError):
        check_density_matrix(np.diag([1.2, -0.2]).astype(complex))


def test_embed_orders_qubits():
    cnot01 = embed(np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]]), (0, 1), 2)
    cnot10 = embed(np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]]), (1, 0), 2)
    assert np.allclose(cnot01 @ [0, 0, 1, 0], [0, 0, 0, 1])
    assert np.allclose(cnot10 @ [0, 1, 0, 0], [0, 0, 0, 1])
    assert np.allclose(embed(X, (1,), 3), np.kron(np.kron(np.eye(2), X), np.eye(2)))


def test_noiseless_circuit_matches_statevector(rng):
    layers = [Layer((haar_unitary(2, rng), haar_unitary(2, rng))) for _ in range(5)]
    c = Circuit(2, layers, interleaved_gate=CZ)
    rho = run_noisy_circuit(c, LocalNoiseModel.noiseless(2))
    assert np.allclose(probabilities(rho), ideal_probabilities(c), atol=1e-13)


def test_superposition_and_full_depolarization():
    c = Circuit(2, [Layer((H, np.eye(2)))], interleaved_gate=CZ)
    probs = ideal_probabilities(c)
    assert np.allclose(probs, [0.5, 0, 0.5, 0])  # qubit 0 is the most significant bit
    rho = run_noisy_circuit(c, LocalNoiseModel((0.0, 0.0)))
    assert np.allclose(rho, np.eye(4) / 4, atol=1e-15)


def test_interleaved_gate_noise_on_target_qubits(rng):
    c = Circuit(2, [Layer((np.eye(2), np.eye(2)))], interleaved_gate=CZ)
    rho = run_noisy_circuit(c, LocalNoiseModel((1.0, 1.0), interleaved_gate_p=0.0))
    assert np.allclose(rho, np.eye(4) / 4)


def test_recovery_gate_restores_ground_state():
    g = clifford_group(2)
    rng = np.random.default_rng(3)
    layers = [Layer((g.matrices[i],)) for i in g.sample(rng, size=6)]
    c = Circuit(2, layers)
    c.recovery_gate = c.ideal_unitary().conj().T
    assert np.isclose(ideal_probabilities(c)[0], 1.0)
    # with single-qubit depolarizing the survival decays towards 1/4
    rho = run_noisy_circuit(c, LocalNoiseModel((0.9, 0.95)))
    assert 0.25 < probabilities(rho)[0] < 1.0


def test_circuit_validation():
    with pytest.raises(ValueError):
        Circuit(5)
    with pytest.raises(ValueError):
        Circuit(2, [Layer((H,))])
    with pytest.raises(ValueError):
        run_noisy_circuit(Circuit(2, [Layer((H, S))]), LocalNoiseModel((0.9,)))


def test_shot_sampling(rng):
    probs = np.array([0.1, 0.2, 0.3, 0.4])
    assert sample_bitstrings(probs, 0, rng) is not None
    assert np.array_equal(sample_bitstrings(probs, 0, rng), probs)
    counts = sample_bitstrings(probs, 1000, rng)
    assert counts.sum() == 1000 and counts.dtype.kind == "i"
    with pytest.raises(ValueError):
        sample_bitstrings(probs, -1, rng)


def test_batched_evolution_matches_loop(rng):
    us = np.array([np.kron(haar_unitary(2, rng), haar_unitary(2, rng)) for _ in range(12)]).reshape(4, 3, 4, 4)
    noise = LocalNoiseModel((0.97, 0.9), interleaved_gate_p=0.95)
    g = embed(CZ, (0, 1), 2)
    rho0 = np.broadcast_to(ground_state(2), (4, 4, 4))
    batched = simulator.evolve(rho0, [us[:, j] for j in range(3)], noise, g, (0, 1))
    for k in range(4):
        single = simulator.evolve(ground_state(2), list(us[k]), noise, g, (0, 1))
        assert np.allclose(batched[k], single, atol=1e-15)
