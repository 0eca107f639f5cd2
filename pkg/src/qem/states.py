"""Quantum state containers and the dense-matrix comparison metrics."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import InvalidArgument
from .jacobi import hermitian_eig

NORM_TOL = 1e-10
DENSE_MAX_QUBITS = 10
SUPPORT_TOL = 1e-12


def _qubits_for_dim(dim: int) -> int:
    n = dim.bit_length() - 1
    if dim < 2 or 2**n != dim:
        raise InvalidArgument(f"dimension {dim} is not a power of two >= 2")
    return n


class QuantumState:
    """Base class; concrete variants are PureState, MixtureState, DenseState."""

    n: int

    def density_matrix(self) -> np.ndarray:
        raise NotImplementedError


@dataclass(frozen=True, eq=False)
class PureState(QuantumState):
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        object.__setattr__(self, "amplitudes", amps)
        object.__setattr__(self, "n", _qubits_for_dim(amps.size))
        norm = np.linalg.norm(amps)
        if abs(norm - 1.0) > NORM_TOL:
            raise InvalidArgument(f"statevector norm {norm:.12g} differs from 1")
        amps.setflags(write=False)

    @classmethod
    def basis(cls, n: int, index: int) -> PureState:
        amps = np.zeros(2**n, dtype=complex)
        amps[index] = 1.0
        return cls(amps)

    @classmethod
    def from_bits(cls, bits: str) -> PureState:
        return cls.basis(len(bits), int(bits, 2))

    def density_matrix(self) -> np.ndarray:
        return np.outer(self.amplitudes, self.amplitudes.conj())


@dataclass(frozen=True, eq=False)
class MixtureState(QuantumState):
    """Probability-weighted ensemble of pure states."""

    branches: tuple[tuple[float, PureState], ...]

    def __post_init__(self):
        branches = tuple((float(p), s) for p, s in self.branches)
        if not branches:
            raise InvalidArgument("mixture needs at least one branch")
        n = branches[0][1].n
        if any(s.n != n for _, s in branches):
            raise InvalidArgument("mixture branches differ in qubit count")
        probs = np.array([p for p, _ in branches])
        if np.any(probs < 0) or abs(probs.sum() - 1.0) > NORM_TOL:
            raise InvalidArgument(f"mixture probabilities {probs} are not a distribution")
        object.__setattr__(self, "branches", branches)
        object.__setattr__(self, "n", n)

    @classmethod
    def from_lists(cls, probs: Sequence[float], states: Sequence[PureState]) -> MixtureState:
        return cls(tuple(zip(probs, states)))

    def density_matrix(self) -> np.ndarray:
        return sum(p * s.density_matrix() for p, s in self.branches)


@dataclass(frozen=True, eq=False)
class DenseState(QuantumState):
    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise InvalidArgument(f"density matrix must be square, got {m.shape}")
        n = _qubits_for_dim(m.shape[0])
        if np.max(np.abs(m - m.conj().T)) > NORM_TOL:
            raise InvalidArgument("density matrix is not Hermitian")
        if abs(np.trace(m).real - 1.0) > NORM_TOL:
            raise InvalidArgument(f"density matrix trace {np.trace(m).real:.12g} differs from 1")
        if n <= DENSE_MAX_QUBITS and np.linalg.eigvalsh(m).min() < -1e-9:
            raise InvalidArgument("density matrix has a negative eigenvalue")
        m = 0.5 * (m + m.conj().T)
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "n", n)

    def density_matrix(self) -> np.ndarray:
        return np.array(self.matrix)


def ghz_state(n: int) -> PureState:
    amps = np.zeros(2**n, dtype=complex)
    amps[0] = amps[-1] = 1 / math.sqrt(2)
    return PureState(amps)


def as_pure(state: QuantumState) -> PureState | None:
    """Return the pure representative of ``state`` when it has one branch."""
    if isinstance(state, PureState):
        return state
    if isinstance(state, MixtureState):
        live = [(p, s) for p, s in state.branches if p > 0]
        if len(live) == 1:
            return live[0][1]
    return None


def _check_pair(a: QuantumState, b: QuantumState) -> None:
    if a.n != b.n:
        raise InvalidArgument(f"qubit counts differ: {a.n} vs {b.n}")


def _dense_guard(a: QuantumState) -> None:
    if a.n > DENSE_MAX_QUBITS:
        raise InvalidArgument(f"dense metrics are limited to {DENSE_MAX_QUBITS} qubits, got {a.n}")


def overlap(a: PureState, b: PureState) -> complex:
    return complex(np.vdot(a.amplitudes, b.amplitudes))


def fidelity(a: QuantumState, b: QuantumState) -> float:
    """Uhlmann fidelity ``||sqrt(rho) sqrt(sigma)||_1^2``."""
    _check_pair(a, b)
    pa, pb = as_pure(a), as_pure(b)
    if pa is not None and pb is not None:
        return min(1.0, abs(overlap(pa, pb)) ** 2)
    if pa is not None or pb is not None:
        # with one pure argument the fidelity is a plain expectation
        psi = (pa or pb).amplitudes
        other = b if pa is not None else a
        if isinstance(other, MixtureState):
            val = sum(p * abs(np.vdot(psi, s.amplitudes)) ** 2 for p, s in other.branches)
        else:
            _dense_guard(other)
            val = np.vdot(psi, other.density_matrix() @ psi).real
        return float(min(1.0, max(0.0, val)))
    _dense_guard(a)
    # work inside the support of rho: square roots of round-off level
    # eigenvalues would otherwise leak ~1e-8 into the result
    lam, v = hermitian_eig(a.density_matrix())
    keep = lam > SUPPORT_TOL
    half = v[:, keep] * np.sqrt(lam[keep])
    inner = half.conj().T @ b.density_matrix() @ half
    mu, _ = hermitian_eig(0.5 * (inner + inner.conj().T))
    mu = np.where(mu > SUPPORT_TOL, mu, 0.0)
    return float(min(1.0, np.sum(np.sqrt(mu)) ** 2))


def trace_distance(a: QuantumState, b: QuantumState) -> float:
    """Half the trace norm of ``rho - sigma``."""
    _check_pair(a, b)
    pa, pb = as_pure(a), as_pure(b)
    if pa is not None and pb is not None:
        return math.sqrt(max(0.0, 1.0 - abs(overlap(pa, pb)) ** 2))
    _dense_guard(a)
    lam, _ = hermitian_eig(a.density_matrix() - b.density_matrix())
    return float(min(1.0, 0.5 * np.sum(np.abs(lam))))
