"""Per-circuit cross-entropy statistics and the least-squares depolarizing fidelity."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

NORM_TOL = 1e-9


class IndeterminateFidelityError(ValueError):
    """Every ideal output was uniform, so the fidelity cannot be resolved."""


@dataclass(frozen=True)
class CircuitRecord:
    depth: int
    m_u: float
    e_u: float
    u_u: float


@dataclass(frozen=True)
class FidelityPoint:
    depth: int
    fidelity: float
    stderr: float | None = 0.0
    num_circuits: int = 1


def _check_distribution(v: np.ndarray, name: str) -> None:
    if np.any(v < -NORM_TOL):
        raise ValueError(f"{name} has negative entries")
    if abs(v.sum() - 1.0) > NORM_TOL:
        raise ValueError(f"{name} is not normalized (sum = {v.sum():.12g})")


def circuit_record(ideal, measured, m: int) -> CircuitRecord:
    """XEB overlaps of one circuit.

    ``m_u = sum(ideal * measured)``, ``e_u = sum(ideal**2)``, ``u_u = 2**-n``.
    """
    ideal = np.asarray(ideal, dtype=float)
    measured = np.asarray(measured, dtype=float)
    if ideal.shape != measured.shape or ideal.ndim != 1:
        raise ValueError(f"length mismatch: {ideal.shape} vs {measured.shape}")
    d = ideal.size
    if d & (d - 1):
        raise ValueError(f"distribution length {d} is not a power of two")
    _check_distribution(ideal, "ideal distribution")
    _check_distribution(measured, "measured distribution")
    return CircuitRecord(int(m), float(ideal @ measured), float(ideal @ ideal), 1.0 / d)


def overlap_arrays(ideal: np.ndarray, measured: np.ndarray):
    """Vectorized ``(m_u, e_u, u_u)`` for stacks of distributions ``(K, d)``."""
    d = ideal.shape[-1]
    m_u = np.einsum("...i,...i->...", ideal, measured)
    e_u = np.einsum("...i,...i->...", ideal, ideal)
    return m_u, e_u, np.full_like(m_u, 1.0 / d)


def least_squares_fidelity(m_u, e_u, u_u) -> float:
    num = np.sum((m_u - u_u) * (e_u - u_u), axis=-1)
    den = np.sum((e_u - u_u) ** 2, axis=-1)
    if np.any(den <= 0.0):
        raise IndeterminateFidelityError(
            "all ideal outputs are uniform; fidelity is indeterminate at this depth"
        )
    return num / den


def estimate_fidelity(records: Sequence[CircuitRecord]) -> FidelityPoint:
    """``F = sum (m-u)(e-u) / sum (e-u)**2`` over circuits of one depth."""
    if not records:
        raise ValueError("need at least one record")
    depths = {r.depth for r in records}
    if len(depths) != 1:
        raise ValueError(f"records span several depths {sorted(depths)}; group by depth first")
    arr = np.array([(r.m_u, r.e_u, r.u_u) for r in records])
    f = least_squares_fidelity(arr[:, 0], arr[:, 1], arr[:, 2])
    return FidelityPoint(depths.pop(), float(f), 0.0, len(records))


def survival_probability(measured) -> float:
    measured = np.asarray(measured, dtype=float)
    return float(measured[..., 0]) if measured.ndim == 1 else measured[..., 0]


def survival_to_fidelity(survival, d: int):
    """Map a survival probability onto the depolarizing-fidelity scale."""
    return (np.asarray(survival) - 1.0 / d) / (1.0 - 1.0 / d)
