from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from xebref.clifford import (
    CNOT,
    CZ,
    H,
    ISWAP,
    S,
    X,
    Y,
    Z,
    UnsupportedEnumerationError,
    canonicalize,
    clifford_group,
    compose,
    enumerate_group,
    invert,
    sample_uniform,
)

PAULIS = [np.eye(2), X, Y, Z]


def pauli_strings(n):
    out = [np.eye(1)]
    for _ in range(n):
        out = [np.kron(a, p) for a in out for p in PAULIS]
    return out


@pytest.mark.parametrize("n,order", [(1, 24), (2, 11520)])
def test_group_order(n, order):
    assert len(enumerate_group(n)) == order


def test_three_qubit_enumeration_refused():
    with pytest.raises(UnsupportedEnumerationError):
        enumerate_group(3)


@pytest.mark.parametrize("n", [1, 2])
def test_elements_unitary_and_canonical(n):
    mats = clifford_group(n).matrices
    d = 2**n
    prod = mats @ np.conj(np.swapaxes(mats, -1, -2))
    assert np.allclose(prod, np.eye(d), atol=1e-12)
    assert np.allclose(canonicalize(mats), mats, atol=1e-12)


@pytest.mark.parametrize("n", [1, 2])
def test_elements_distinct_up_to_phase(n):
    group = clifford_group(n)
    assert len({group.index_of(m) for m in group.matrices}) == len(group)


@pytest.mark.parametrize("n", [1, 2])
def test_elements_map_paulis_to_paulis(n):
    paulis = pauli_strings(n)
    d = 2**n
    stack = np.array(paulis)
    for u in clifford_group(n).matrices[:: 7 if n == 2 else 1]:
        for p in paulis[1:]:
            q = u @ p @ u.conj().T
            overlaps = np.abs(np.einsum("kij,ji->k", stack, q)) / d
            assert np.isclose(overlaps.max(), 1.0, atol=1e-10)


def test_standard_gates_are_members():
    g1, g2 = clifford_group(1), clifford_group(2)
    for u in (H, S, X, Y, Z):
        assert g1.find(u * np.exp(0.3j)) is not None
    for u in (CZ, CNOT, ISWAP, np.kron(H, S)):
        assert g2.find(u) is not None
    t = np.diag([1, np.exp(1j * np.pi / 4)])
    assert g1.find(t) is None


def test_canonical_phase_rule():
    u = canonicalize(np.exp(1.1j) * H)
    assert abs(u[0, 0].imag) < 1e-15 and u[0, 0].real > 0
    with pytest.raises(ValueError):
        canonicalize(np.zeros((2, 2)))


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 11519), st.integers(0, 11519))
def test_compose_matches_matrix_product(i, j):
    g = clifford_group(2)
    a, b = g[i], g[j]
    c = compose(a, b)
    assert np.allclose(c.matrix, canonicalize(b.matrix @ a.matrix), atol=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 11519))
def test_inverse(i):
    g = clifford_group(2)
    a = g[i]
    assert compose(a, invert(a)).index == g.identity.index
    assert compose(invert(a), a).index == g.identity.index


def test_uniform_sampling_is_uniform():
    rng = np.random.default_rng(5)
    g = clifford_group(1)
    idx = g.sample(rng, size=240_000)
    counts = np.bincount(idx, minlength=24)
    chi2 = np.sum((counts - 10_000) ** 2 / 10_000)
    # 23 degrees of freedom; the 99.9% quantile is about 49.7
    assert chi2 < 49.7
    assert sample_uniform(1, rng).n == 1


def test_sampling_deterministic():
    a = clifford_group(2).sample(np.random.default_rng(9), size=10)
    b = clifford_group(2).sample(np.random.default_rng(9), size=10)
    assert np.array_equal(a, b)


def test_group_is_unitary_two_design():
    # frame potential of a unitary 2-design equals 2 for d >= 2
    mats = clifford_group(1).matrices
    tr = np.abs(np.einsum("aij,bij->ab", mats.conj(), mats)) ** 4
    assert np.isclose(tr.mean(), 2.0, atol=1e-12)


def test_lookup_of_non_member_raises():
    from xebref.clifford import CanonicalizationError

    with pytest.raises(CanonicalizationError):
        clifford_group(1).index_of(np.diag([1, np.exp(1j * np.pi / 4)]))
