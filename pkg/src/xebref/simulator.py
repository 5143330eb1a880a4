"""Exact density-matrix simulation of benchmarking circuits under local depolarizing noise.

All state-evolution functions accept either one density matrix ``(d, d)`` or a
stack ``(..., d, d)``; batches of independent circuits share the same code path.
Qubit 0 is the most significant bit of a basis-state index.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

MAX_QUBITS = 4
TRACE_TOL = 1e-12
HERMITIAN_TOL = 1e-12
POSITIVITY_TOL = 1e-10


class SimulationIntegrityError(RuntimeError):
    """A density matrix lost Hermiticity, unit trace or positivity."""


@dataclass(frozen=True)
class LocalNoiseModel:
    """Per-qubit depolarizing parameters applied once per reference layer.

    ``interleaved_gate_p`` is the depolarizing parameter of the channel that
    follows every interleaved gate (on the gate's qubits); ``None`` means the
    interleaved gate is noiseless. ``layer_p`` optionally adds a depolarizing
    channel on all qubits after each reference layer, e.g. to stand in for the
    entangling gates needed to synthesize multi-qubit Clifford layers.
    """

    per_qubit_p: tuple[float, ...]
    interleaved_gate_p: float | None = None
    layer_p: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "per_qubit_p", tuple(float(p) for p in self.per_qubit_p))
        extra = tuple(p for p in (self.interleaved_gate_p, self.layer_p) if p is not None)
        for p in self.per_qubit_p + extra:
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"depolarizing parameter {p} outside [0, 1]")

    @classmethod
    def from_errors(
        cls,
        errors: Sequence[float],
        interleaved_gate_p: float | None = None,
        layer_p: float | None = None,
    ):
        return cls(tuple(1.0 - e for e in errors), interleaved_gate_p, layer_p)

    @classmethod
    def noiseless(cls, n: int) -> "LocalNoiseModel":
        return cls((1.0,) * n)

    @property
    def n(self) -> int:
        return len(self.per_qubit_p)

    @property
    def errors(self) -> tuple[float, ...]:
        return tuple(1.0 - p for p in self.per_qubit_p)


@dataclass
class Layer:
    """One reference layer: ``n`` single-qubit factors or one ``2**n`` unitary."""

    factors: tuple[np.ndarray, ...]
    indices: tuple[int, ...] | None = None

    @property
    def factorized(self) -> bool:
        return len(self.factors) > 1 or self.factors[0].shape == (2, 2)

    def unitary(self) -> np.ndarray:
        u = self.factors[0]
        for f in self.factors[1:]:
            u = np.kron(u, f)
        return u


@dataclass
class Circuit:
    n: int
    layers: list[Layer] = field(default_factory=list)
    interleaved_gate: np.ndarray | None = None
    interleaved_qubits: tuple[int, ...] | None = None
    recovery_gate: np.ndarray | None = None

    def __post_init__(self):
        if not 1 <= self.n <= MAX_QUBITS:
            raise ValueError(f"qubit count must be in 1..{MAX_QUBITS}, got {self.n}")
        d = 2**self.n
        for layer in self.layers:
            if layer.unitary().shape != (d, d):
                raise ValueError("layer does not act on all circuit qubits")
        if self.interleaved_gate is not None and self.interleaved_qubits is None:
            k = int(np.log2(self.interleaved_gate.shape[0]))
            self.interleaved_qubits = tuple(range(k))

    @property
    def depth(self) -> int:
        return len(self.layers)

    def interleaved_unitary(self) -> np.ndarray | None:
        if self.interleaved_gate is None:
            return None
        return embed(self.interleaved_gate, self.interleaved_qubits, self.n)

    def ideal_unitary(self) -> np.ndarray:
        d = 2**self.n
        u = np.eye(d, dtype=complex)
        g = self.interleaved_unitary()
        for layer in self.layers:
            u = layer.unitary() @ u
            if g is not None:
                u = g @ u
        if self.recovery_gate is not None:
            u = self.recovery_gate @ u
        return u


def embed(gate: np.ndarray, qubits: Sequence[int], n: int) -> np.ndarray:
    """Lift ``gate`` acting on ``qubits`` (in that order) to the full n-qubit space."""
    k = len(qubits)
    if gate.shape != (2**k, 2**k):
        raise ValueError("gate size does not match its qubit list")
    if tuple(qubits) == tuple(range(n)):
        return np.asarray(gate, dtype=complex)
    rest = [q for q in range(n) if q not in qubits]
    full = np.kron(gate, np.eye(2 ** len(rest)))
    order = list(qubits) + rest
    t = full.reshape((2,) * (2 * n))
    inv = np.argsort(order)
    t = t.transpose(list(inv) + [n + i for i in inv])
    return t.reshape(2**n, 2**n)


def kron_factors(factors: np.ndarray) -> np.ndarray:
    """Batched Kronecker product: ``(..., n, 2, 2) -> (..., 2**n, 2**n)``."""
    out = factors[..., 0, :, :]
    for q in range(1, factors.shape[-3]):
        f = factors[..., q, :, :]
        a, b = out.shape[-1], f.shape[-1]
        out = (out[..., :, None, :, None] * f[..., None, :, None, :]).reshape(
            out.shape[:-2] + (a * b, a * b)
        )
    return out


def ground_state(n: int) -> np.ndarray:
    d = 2**n
    rho = np.zeros((d, d), dtype=complex)
    rho[0, 0] = 1.0
    return rho


def _num_qubits(rho: np.ndarray) -> int:
    d = rho.shape[-1]
    n = d.bit_length() - 1
    if 2**n != d or rho.shape[-2] != d:
        raise ValueError(f"density matrix dimension {rho.shape[-2:]} is not 2**n square")
    return n


def apply_unitary(rho: np.ndarray, u: np.ndarray) -> np.ndarray:
    """``U rho U^dagger`` (broadcast over leading axes of either argument)."""
    if u.shape[-1] != rho.shape[-1]:
        raise ValueError(f"unitary of size {u.shape[-1]} applied to state of size {rho.shape[-1]}")
    return u @ rho @ np.conj(np.swapaxes(u, -1, -2))


def _twirl_qubit(rho: np.ndarray, qubit: int, n: int) -> np.ndarray:
    # (1/4) sum_P P rho P over the Paulis on one qubit, i.e. Tr_q(rho) x I/2
    d = 2**n
    idx = np.arange(d)
    bit = (idx >> (n - 1 - qubit)) & 1
    sign = 1 - 2 * bit
    a = rho + rho * np.outer(sign, sign)
    flip = idx ^ (1 << (n - 1 - qubit))
    return 0.25 * (a + a[..., flip, :][..., :, flip])


def apply_depolarizing(rho: np.ndarray, qubits: Sequence[int], p: float) -> np.ndarray:
    """``rho -> p rho + (1-p) Tr_S(rho) x I_S / 2**|S|`` on the qubit subset S."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"depolarizing parameter {p} outside [0, 1]")
    n = _num_qubits(rho)
    if p == 1.0:
        return rho
    mixed = rho
    for q in qubits:
        if not 0 <= q < n:
            raise ValueError(f"qubit index {q} out of range for {n} qubits")
        mixed = _twirl_qubit(mixed, q, n)
    return p * rho + (1.0 - p) * mixed


def apply_local_depolarizing(rho: np.ndarray, qubit_index: int, p_i: float) -> np.ndarray:
    """Single-qubit channel with Pauli-transfer matrix diag(1, p, p, p)."""
    return apply_depolarizing(rho, (qubit_index,), p_i)


def check_density_matrix(rho: np.ndarray, where: str = "") -> None:
    tr = np.trace(rho, axis1=-2, axis2=-1)
    if np.any(np.abs(tr - 1.0) > TRACE_TOL):
        raise SimulationIntegrityError(f"trace drifted from 1 {where}".strip())
    if np.any(np.abs(rho - np.conj(np.swapaxes(rho, -1, -2))) > HERMITIAN_TOL):
        raise SimulationIntegrityError(f"state is not Hermitian {where}".strip())
    herm = 0.5 * (rho + np.conj(np.swapaxes(rho, -1, -2)))
    if np.any(np.linalg.eigvalsh(herm) < -POSITIVITY_TOL):
        raise SimulationIntegrityError(f"negative eigenvalue {where}".strip())


def evolve(
    rho: np.ndarray,
    layer_unitaries: Sequence[np.ndarray],
    noise: LocalNoiseModel,
    interleaved: np.ndarray | None = None,
    interleaved_qubits: Sequence[int] = (),
    recovery: np.ndarray | None = None,
    check: bool = False,
) -> np.ndarray:
    """Core noisy evolution shared by single circuits and stacked batches.

    ``layer_unitaries`` yields one ``(..., d, d)`` array per layer; ``interleaved``
    must already be embedded in the full space.
    """
    n = _num_qubits(rho)
    if noise.n != n:
        raise ValueError(f"noise model has {noise.n} qubits, circuit has {n}")
    for step, u in enumerate(layer_unitaries):
        rho = apply_unitary(rho, u)
        for q, p in enumerate(noise.per_qubit_p):
            rho = apply_depolarizing(rho, (q,), p)
        if noise.layer_p is not None:
            rho = apply_depolarizing(rho, range(n), noise.layer_p)
        if interleaved is not None:
            rho = apply_unitary(rho, interleaved)
            if noise.interleaved_gate_p is not None:
                rho = apply_depolarizing(rho, interleaved_qubits, noise.interleaved_gate_p)
        if check:
            check_density_matrix(rho, f"after layer {step}")
    if recovery is not None:
        rho = apply_unitary(rho, recovery)
    if check:
        check_density_matrix(rho, "at circuit output")
    return rho


def run_noisy_circuit(
    circuit: Circuit,
    noise: LocalNoiseModel,
    initial: np.ndarray | None = None,
    check: bool = True,
) -> np.ndarray:
    rho = ground_state(circuit.n) if initial is None else np.asarray(initial, dtype=complex)
    if rho.shape != (2**circuit.n, 2**circuit.n):
        raise ValueError("initial state does not match circuit size")
    return evolve(
        rho,
        [layer.unitary() for layer in circuit.layers],
        noise,
        circuit.interleaved_unitary(),
        circuit.interleaved_qubits or (),
        circuit.recovery_gate,
        check=check,
    )


def ideal_state(circuit: Circuit, initial: np.ndarray | None = None) -> np.ndarray:
    """Noiseless pure-state evolution; independent of the density-matrix path."""
    psi = np.zeros(2**circuit.n, dtype=complex)
    psi[0] = 1.0
    if initial is not None:
        psi = np.asarray(initial, dtype=complex)
    return circuit.ideal_unitary() @ psi


def ideal_probabilities(circuit: Circuit, initial: np.ndarray | None = None) -> np.ndarray:
    """Output distribution of the noiseless circuit.

    ``initial`` may be a state vector or a density matrix; default ``|0...0>``.
    """
    if initial is not None and np.ndim(initial) == 2:
        rho = apply_unitary(np.asarray(initial, dtype=complex), circuit.ideal_unitary())
        return np.clip(np.real(np.diagonal(rho)), 0.0, None)
    return np.abs(ideal_state(circuit, initial)) ** 2


def probabilities(rho: np.ndarray) -> np.ndarray:
    """Computational-basis populations of (a stack of) density matrices."""
    return np.clip(np.real(np.diagonal(rho, axis1=-2, axis2=-1)), 0.0, None)


def sample_bitstrings(probs: np.ndarray, shots: int, rng: np.random.Generator) -> np.ndarray:
    """Multinomial counts over bitstrings; ``shots == 0`` returns ``probs`` unchanged.

    Accepts a stack of distributions along leading axes.
    """
    if shots < 0:
        raise ValueError("shots must be nonnegative")
    probs = np.asarray(probs, dtype=float)
    if shots == 0:
        return probs
    probs = probs / probs.sum(axis=-1, keepdims=True)
    return rng.multinomial(shots, probs)


def measured_frequencies(probs: np.ndarray, shots: int, rng: np.random.Generator) -> np.ndarray:
    counts = sample_bitstrings(probs, shots, rng)
    return counts if shots == 0 else counts / shots
