"""Single- and two-qubit Clifford groups as phase-canonical matrix tables.

Groups are generated by breadth-first closure over a small generator set.
Element indices follow BFS discovery order, so they are stable across runs.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

ATOL = 1e-12
_NONZERO = 1e-6
_HASH_SCALE = 1e9

I2 = np.eye(2, dtype=complex)
H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
S = np.array([[1, 0], [0, 1j]], dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
CZ = np.diag([1, 1, 1, -1]).astype(complex)
CNOT = np.array(
    [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex
)
ISWAP = np.array(
    [[1, 0, 0, 0], [0, 0, 1j, 0], [0, 1j, 0, 0], [0, 0, 0, 1]], dtype=complex
)

NAMED_GATES = {
    "I": I2,
    "H": H,
    "S": S,
    "X": X,
    "Y": Y,
    "Z": Z,
    "CZ": CZ,
    "CNOT": CNOT,
    "CX": CNOT,
    "ISWAP": ISWAP,
}


class UnsupportedEnumerationError(ValueError):
    pass


class CanonicalizationError(RuntimeError):
    """A product or inverse could not be located in its group table."""


def canonicalize(u: np.ndarray) -> np.ndarray:
    """Fix the global phase so the first nonzero entry (row-major) is real positive.

    Works on a single matrix or a stack of matrices with shape ``(..., d, d)``.
    """
    u = np.asarray(u, dtype=complex)
    flat = u.reshape(u.shape[:-2] + (-1,))
    first = np.argmax(np.abs(flat) > _NONZERO, axis=-1)
    pivot = np.take_along_axis(flat, first[..., None], axis=-1)[..., 0]
    if np.any(np.abs(pivot) <= _NONZERO):
        raise ValueError("cannot fix the phase of a zero matrix")
    phase = pivot / np.abs(pivot)
    return u * np.conj(phase)[..., None, None]


def _keys(mats: np.ndarray) -> list[bytes]:
    # +0.0 folds negative zeros so equal matrices hash identically
    re = np.rint(mats.real * _HASH_SCALE).astype(np.int64) + 0
    im = np.rint(mats.imag * _HASH_SCALE).astype(np.int64) + 0
    both = np.stack([re, im], axis=-1).reshape(len(mats), -1)
    return [row.tobytes() for row in both]


@dataclass(frozen=True)
class CliffordElement:
    index: int
    matrix: np.ndarray = field(repr=False, compare=False)
    n: int = 1

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


class CliffordGroup:
    """Immutable table of an n-qubit Clifford group (n in {1, 2}).

    Lookup is by hashing the canonicalized matrix rounded to 1e-9 per entry.
    """

    def __init__(self, n: int, matrices: np.ndarray):
        self.n = n
        self.dim = 2**n
        self.matrices = matrices
        self.matrices.setflags(write=False)
        self._lookup = {key: i for i, key in enumerate(_keys(matrices))}
        self.identity_index = self.index_of(np.eye(self.dim))

    def __len__(self) -> int:
        return len(self.matrices)

    def __getitem__(self, index: int) -> CliffordElement:
        return CliffordElement(int(index), self.matrices[index], self.n)

    def elements(self) -> list[CliffordElement]:
        return [self[i] for i in range(len(self))]

    @property
    def identity(self) -> CliffordElement:
        return self[self.identity_index]

    def find(self, u: np.ndarray) -> int | None:
        key = _keys(canonicalize(u)[None])[0]
        return self._lookup.get(key)

    def index_of(self, u: np.ndarray) -> int:
        idx = self.find(u)
        if idx is None:
            raise CanonicalizationError(
                f"matrix not found in the {self.n}-qubit Clifford table"
            )
        return idx

    def element(self, u: np.ndarray) -> CliffordElement:
        return self[self.index_of(u)]

    def compose(self, a: CliffordElement, b: CliffordElement) -> CliffordElement:
        """Return the element for ``b @ a`` (apply ``a`` first, then ``b``)."""
        if a.dim != b.dim or a.dim != self.dim:
            raise ValueError("dimension mismatch in compose")
        return self.element(b.matrix @ a.matrix)

    def invert(self, g: CliffordElement) -> CliffordElement:
        return self.element(g.matrix.conj().T)

    def sample(self, rng: np.random.Generator, size=None):
        """Uniform random index (or array of indices)."""
        return rng.integers(0, len(self), size=size)

    def sample_uniform(self, rng: np.random.Generator) -> CliffordElement:
        return self[int(self.sample(rng))]


def _generators(n: int) -> list[np.ndarray]:
    if n == 1:
        return [H, S]
    if n == 2:
        return [np.kron(H, I2), np.kron(I2, H), np.kron(S, I2), np.kron(I2, S), CZ]
    raise UnsupportedEnumerationError(
        f"Clifford enumeration supports n in {{1, 2}}, got {n}; "
        "build larger circuits from factorized layers"
    )


def _closure(generators: list[np.ndarray], dim: int) -> np.ndarray:
    found = [canonicalize(np.eye(dim, dtype=complex))]
    seen = set(_keys(found[0][None]))
    frontier = np.array(found)
    while len(frontier):
        fresh = []
        for g in generators:
            prods = canonicalize(g @ frontier)
            for key, mat in zip(_keys(prods), prods):
                if key not in seen:
                    seen.add(key)
                    fresh.append(mat)
        found.extend(fresh)
        frontier = np.array(fresh) if fresh else np.empty((0, dim, dim), complex)
    return np.array(found)


@lru_cache(maxsize=None)
def clifford_group(n: int) -> CliffordGroup:
    """Cached group table for ``n`` qubits."""
    gens = _generators(n)
    return CliffordGroup(n, _closure(gens, 2**n))


def enumerate_group(n: int) -> list[CliffordElement]:
    return clifford_group(n).elements()


def sample_uniform(n: int, rng: np.random.Generator) -> CliffordElement:
    return clifford_group(n).sample_uniform(rng)


def compose(a: CliffordElement, b: CliffordElement) -> CliffordElement:
    return clifford_group(a.n).compose(a, b)


def invert(g: CliffordElement) -> CliffordElement:
    return clifford_group(g.n).invert(g)
