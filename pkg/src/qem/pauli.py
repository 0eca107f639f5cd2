"""Pauli strings, sparse weighted observables and their expectation values.

Basis-index convention used throughout the package: qubit 0 is the
leftmost letter of a label and the most significant bit of a
computational-basis index.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import cached_property, lru_cache
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import InvalidArgument
from .states import DenseState, MixtureState, PureState, QuantumState

LETTERS = "IXYZ"
_CODE = {ch: i for i, ch in enumerate(LETTERS)}

_PAULI_MATRICES = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


@dataclass(frozen=True, order=True)
class PauliString:
    """Tensor product of single-qubit Paulis, packed two bits per qubit.

    ``code`` is the base-4 number whose most significant digit is qubit 0,
    with I=0, X=1, Y=2, Z=3.
    """

    n: int
    code: int

    def __post_init__(self):
        if self.n < 1:
            raise InvalidArgument(f"qubit count must be >= 1, got {self.n}")
        if not 0 <= self.code < 4**self.n:
            raise InvalidArgument(f"code {self.code} out of range for n={self.n}")

    @classmethod
    def from_label(cls, label: str) -> PauliString:
        label = label.strip().upper()
        if not label or any(ch not in _CODE for ch in label):
            raise InvalidArgument(f"bad Pauli label {label!r}")
        code = 0
        for ch in label:
            code = 4 * code + _CODE[ch]
        return cls(len(label), code)

    @classmethod
    def from_letters(cls, n: int, letters: Mapping[int, str]) -> PauliString:
        """Build from a sparse ``{qubit: letter}`` map."""
        chars = ["I"] * n
        for q, ch in letters.items():
            if not 0 <= q < n:
                raise InvalidArgument(f"qubit {q} out of range for n={n}")
            chars[q] = ch
        return cls.from_label("".join(chars))

    def letter(self, q: int) -> str:
        return LETTERS[(self.code >> (2 * (self.n - 1 - q))) & 3]

    @cached_property
    def label(self) -> str:
        return "".join(self.letter(q) for q in range(self.n))

    @cached_property
    def support(self) -> frozenset[int]:
        return frozenset(q for q in range(self.n) if self.letter(q) != "I")

    @property
    def locality(self) -> int:
        return len(self.support)

    @cached_property
    def flip_mask(self) -> int:
        """Basis-index bits flipped by the string (X or Y letters)."""
        m = 0
        for q in range(self.n):
            if self.letter(q) in "XY":
                m |= 1 << (self.n - 1 - q)
        return m

    @cached_property
    def sign_mask(self) -> int:
        """Basis-index bits contributing a (-1)^bit factor (Y or Z letters)."""
        m = 0
        for q in range(self.n):
            if self.letter(q) in "YZ":
                m |= 1 << (self.n - 1 - q)
        return m

    @cached_property
    def n_y(self) -> int:
        return self.label.count("Y")

    def to_matrix(self) -> np.ndarray:
        out = np.ones((1, 1), dtype=complex)
        for ch in self.label:
            out = np.kron(out, _PAULI_MATRICES[ch])
        return out

    def apply(self, psi: np.ndarray) -> np.ndarray:
        """Return P|psi> without materialising the matrix."""
        perm, sign, phase = _action(self.n, self.code)
        out = np.empty_like(psi)
        out[perm] = (phase * sign) * psi
        return out

    def __str__(self) -> str:
        return self.label

    def __repr__(self) -> str:
        return f"PauliString({self.label!r})"


@lru_cache(maxsize=8192)
def _action(n: int, code: int) -> tuple[np.ndarray, np.ndarray, complex]:
    # P|x> = phase * (-1)^{popcount(x & sign_mask)} |x ^ flip_mask>
    p = PauliString(n, code)
    idx = np.arange(2**n, dtype=np.int64)
    perm = idx ^ p.flip_mask
    sign = 1.0 - 2.0 * (np.bitwise_count(idx & p.sign_mask) & 1)
    return perm, sign, 1j**p.n_y


def enumerate_local(n: int, k: int) -> list[PauliString]:
    """All non-identity strings acting on at most ``k`` of ``n`` qubits.

    Ordered by locality, then by support (lexicographic qubit tuples),
    then by letters, so the list for ``k1`` is a prefix of the list for
    ``k2 >= k1``.
    """
    if not 1 <= k <= n:
        raise InvalidArgument(f"need 1 <= k <= n, got n={n}, k={k}")
    out = []
    for m in range(1, k + 1):
        for support in itertools.combinations(range(n), m):
            for letters in itertools.product("XYZ", repeat=m):
                out.append(PauliString.from_letters(n, dict(zip(support, letters))))
    return out


def count_local(n: int, k: int) -> int:
    return sum(math.comb(n, m) * 3**m for m in range(1, k + 1))


def _check_dim(state: QuantumState, n: int) -> None:
    if state.n != n:
        raise InvalidArgument(f"state has {state.n} qubits, operator acts on {n}")


def expectation(state: QuantumState, p: PauliString) -> float:
    """Exact Tr[rho P]."""
    _check_dim(state, p.n)
    perm, sign, phase = _action(p.n, p.code)
    if isinstance(state, PureState):
        psi = state.amplitudes
        val = phase * np.vdot(psi[perm], sign * psi)
    elif isinstance(state, MixtureState):
        return float(sum(w * expectation(b, p) for w, b in state.branches))
    elif isinstance(state, DenseState):
        rho = state.matrix
        idx = np.arange(rho.shape[0])
        val = phase * np.sum(sign * rho[idx, perm])
    else:
        raise InvalidArgument(f"unknown state type {type(state).__name__}")
    if abs(val.imag) > 1e-9:
        raise InvalidArgument(f"expectation has imaginary part {val.imag:.3g}; state not Hermitian?")
    return float(val.real)


class PauliTable:
    """Precomputed actions of a fixed list of strings for batched expectations."""

    def __init__(self, paulis: Sequence[PauliString]):
        if not paulis:
            raise InvalidArgument("empty Pauli list")
        n = paulis[0].n
        if any(p.n != n for p in paulis):
            raise InvalidArgument("mixed qubit counts in Pauli list")
        self.n = n
        self.paulis = tuple(paulis)
        idx = np.arange(2**n, dtype=np.int64)
        flips = np.array([p.flip_mask for p in paulis], dtype=np.int64)
        signs = np.array([p.sign_mask for p in paulis], dtype=np.int64)
        self.perm = idx[None, :] ^ flips[:, None]
        self.sign = 1.0 - 2.0 * (np.bitwise_count(idx[None, :] & signs[:, None]) & 1)
        self.phase = np.array([1j**p.n_y for p in paulis])

    def expectations(self, state: QuantumState) -> np.ndarray:
        if state.n != self.n:
            raise InvalidArgument(f"state has {state.n} qubits, table built for {self.n}")
        if isinstance(state, PureState):
            psi = state.amplitudes
            vals = self.phase * np.einsum("jx,jx->j", psi.conj()[self.perm], self.sign * psi[None, :])
        elif isinstance(state, MixtureState):
            return sum(w * self.expectations(b) for w, b in state.branches)
        elif isinstance(state, DenseState):
            rho = state.matrix
            rows = np.arange(rho.shape[0])[None, :]
            vals = self.phase * np.sum(self.sign * rho[rows, self.perm], axis=1)
        else:
            raise InvalidArgument(f"unknown state type {type(state).__name__}")
        if np.max(np.abs(vals.imag), initial=0.0) > 1e-9:
            raise InvalidArgument("expectation has a non-negligible imaginary part")
        return vals.real.copy()


class WeightedObservable:
    """Sparse real combination of Pauli strings on ``n`` qubits.

    Zero weights are dropped on construction, so ``terms`` never stores one.
    """

    __slots__ = ("n", "terms")

    def __init__(self, n: int, terms: Mapping[PauliString, float] | Iterable[tuple[PauliString, float]] = ()):
        items = terms.items() if isinstance(terms, Mapping) else terms
        acc: dict[PauliString, float] = {}
        for p, w in items:
            if p.n != n:
                raise InvalidArgument(f"term {p} has {p.n} qubits, observable has {n}")
            acc[p] = acc.get(p, 0.0) + float(w)
        self.n = n
        self.terms = {p: w for p, w in sorted(acc.items()) if w != 0.0}

    @classmethod
    def from_labels(cls, terms: Mapping[str, float]) -> WeightedObservable:
        parsed = [(PauliString.from_label(k), v) for k, v in terms.items()]
        if not parsed:
            raise InvalidArgument("cannot infer n from an empty label map")
        return cls(parsed[0][0].n, parsed)

    def __add__(self, other: WeightedObservable) -> WeightedObservable:
        if other.n != self.n:
            raise InvalidArgument("qubit count mismatch")
        return WeightedObservable(self.n, list(self.terms.items()) + list(other.terms.items()))

    def __mul__(self, c: float) -> WeightedObservable:
        return WeightedObservable(self.n, {p: c * w for p, w in self.terms.items()})

    __rmul__ = __mul__

    def __neg__(self) -> WeightedObservable:
        return self * -1.0

    def __len__(self) -> int:
        return len(self.terms)

    def __eq__(self, other) -> bool:
        return isinstance(other, WeightedObservable) and self.n == other.n and self.terms == other.terms

    def __repr__(self) -> str:
        body = " + ".join(f"{w:.6g}*{p.label}" for p, w in self.terms.items()) or "0"
        return f"WeightedObservable({body})"

    def apply(self, psi: np.ndarray) -> np.ndarray:
        out = np.zeros_like(psi)
        for p, w in self.terms.items():
            out += w * p.apply(psi)
        return out

    def expectation(self, state: QuantumState) -> float:
        return float(sum(w * expectation(state, p) for p, w in self.terms.items()))

    def to_matrix(self) -> np.ndarray:
        out = np.zeros((2**self.n, 2**self.n), dtype=complex)
        for p, w in self.terms.items():
            out += w * p.to_matrix()
        return out


def lipschitz_ub(h: WeightedObservable) -> float:
    """Upper bound 2 max_i sum_{terms touching i} |w| on the quantum Lipschitz constant."""
    per_qubit = np.zeros(h.n)
    for p, w in h.terms.items():
        for q in p.support:
            per_qubit[q] += abs(w)
    return 2.0 * float(per_qubit.max(initial=0.0))
