"""Random layer ensembles and batched circuit execution.

Every circuit draws from its own generator, derived from ``(seed, stream, depth, index)``,
so results do not depend on batching, chunking or thread scheduling.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .clifford import NAMED_GATES, clifford_group
from .simulator import (
    LocalNoiseModel,
    embed,
    evolve,
    ground_state,
    kron_factors,
    probabilities,
)

LAYER_KINDS = ("clifford-1q", "clifford-nq", "haar-1q", "haar-nq")
_CHUNK = 200_000  # max circuits * depth held in memory at once


def circuit_rng(seed: int, stream: int, depth: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(stream, depth, index)))


def haar_unitary(d: int, rng: np.random.Generator, size: int | tuple = ()) -> np.ndarray:
    """Haar-random unitaries via QR of a complex Ginibre matrix with phase fix."""
    shape = (size,) if isinstance(size, int) else tuple(size)
    z = (rng.standard_normal(shape + (d, d)) + 1j * rng.standard_normal(shape + (d, d))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    diag = np.diagonal(r, axis1=-2, axis2=-1)
    return q * (diag / np.abs(diag))[..., None, :]


def resolve_gate(gate) -> np.ndarray:
    if isinstance(gate, str):
        try:
            return NAMED_GATES[gate.upper()]
        except KeyError:
            raise ValueError(f"unknown gate name {gate!r}; known: {sorted(NAMED_GATES)}") from None
    u = np.asarray(gate, dtype=complex)
    d = u.shape[0]
    if u.shape != (d, d) or d & (d - 1) or not np.allclose(u.conj().T @ u, np.eye(d), atol=1e-10):
        raise ValueError("target gate must be a square unitary of power-of-two size")
    return u


@dataclass(frozen=True)
class Ensemble:
    """Random circuit family: reference layers plus an optional interleaved gate."""

    layer: str
    n: int
    target_gate: str | None = None
    target_qubits: tuple[int, ...] | None = None

    def __post_init__(self):
        if self.layer not in LAYER_KINDS:
            raise ValueError(f"unknown layer kind {self.layer!r}; expected one of {LAYER_KINDS}")
        if self.layer == "clifford-nq" and self.n > 2:
            raise ValueError("multi-qubit Clifford layers are available for n <= 2 only")

    @property
    def is_clifford(self) -> bool:
        return self.layer.startswith("clifford")

    @property
    def factorized(self) -> bool:
        return self.layer.endswith("1q")

    def gate(self) -> tuple[np.ndarray, tuple[int, ...]] | None:
        if self.target_gate is None:
            return None
        u = resolve_gate(self.target_gate)
        k = int(np.log2(u.shape[0]))
        qubits = self.target_qubits or tuple(range(k))
        return embed(u, qubits, self.n), qubits

    def sample_layers(self, rng: np.random.Generator, depth: int) -> np.ndarray:
        """Layer unitaries ``(depth, d, d)`` for one circuit."""
        if self.layer == "clifford-1q":
            table = clifford_group(1).matrices
            return kron_factors(table[rng.integers(0, len(table), size=(depth, self.n))])
        if self.layer == "clifford-nq":
            table = clifford_group(self.n).matrices
            return table[rng.integers(0, len(table), size=depth)]
        if self.layer == "haar-1q":
            return kron_factors(haar_unitary(2, rng, (depth, self.n)))
        return haar_unitary(2**self.n, rng, depth)


@dataclass
class BatchOutput:
    ideal: np.ndarray  # (K, d) noiseless output distributions
    noisy: np.ndarray  # (K, d) exact noisy output distributions
    rngs: list[np.random.Generator]


def run_batch(
    ensemble: Ensemble,
    depth: int,
    num_circuits: int,
    seed: int,
    stream: int,
    noise: LocalNoiseModel | None = None,
    recovery: bool = False,
    check: bool = False,
    first_index: int = 0,
) -> BatchOutput:
    """Simulate ``num_circuits`` independent circuits of one depth.

    With ``recovery`` the exact inverse of the ideal circuit (a Clifford looked up in
    the group table) is appended noiselessly.
    """
    d = 2**ensemble.n
    noise = noise or LocalNoiseModel.noiseless(ensemble.n)
    rngs = [circuit_rng(seed, stream, depth, first_index + k) for k in range(num_circuits)]
    gate = ensemble.gate()
    g_full, g_qubits = gate if gate else (None, ())
    step = max(1, _CHUNK // max(depth, 1))
    ideal, noisy = [], []
    for lo in range(0, num_circuits, step):
        chunk = rngs[lo : lo + step]
        layers = np.array([ensemble.sample_layers(r, depth) for r in chunk]).reshape(len(chunk), depth, d, d)
        total = np.broadcast_to(np.eye(d, dtype=complex), (len(chunk), d, d))
        for j in range(depth):
            total = layers[:, j] @ total
            if g_full is not None:
                total = g_full @ total
        rec = None
        if recovery:
            rec = _recovery_gates(total, ensemble.n)
            total = rec @ total
        psi = total[:, :, 0]
        ideal.append(np.abs(psi) ** 2)
        rho = np.broadcast_to(ground_state(ensemble.n), (len(chunk), d, d))
        rho = evolve(
            rho, [layers[:, j] for j in range(depth)], noise, g_full, g_qubits, rec, check=check
        )
        noisy.append(probabilities(rho))
    return BatchOutput(np.concatenate(ideal), np.concatenate(noisy), rngs)


def _recovery_gates(total: np.ndarray, n: int) -> np.ndarray:
    group = clifford_group(n)
    out = np.empty_like(total)
    for k, u in enumerate(total):
        out[k] = group.matrices[group.index_of(u.conj().T)]
    return out
