"""Gate lists, the dense statevector kernel and the ansatz families.

Rotations follow the half-angle convention ``R_P(phi) = exp(-i phi P / 2)``.
A parameterised gate reads ``phi = scale * params[slot]``; ``scale`` lets
QAOA layers write ``exp(-i beta ZZ) = RZZ(2 beta)`` with ``beta`` trainable.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import InvalidArgument
from .states import PureState

GATE_ARITY = {"H": 1, "CNOT": 2, "RX": 1, "RY": 1, "RZ": 1, "CRX": 2, "RZZ": 2, "CPHASE": 2}
PARAMETRIC = frozenset({"RX", "RY", "RZ", "CRX", "RZZ", "CPHASE"})
#: kinds whose generator is a single Pauli string (eligible for the shift rule)
PAULI_GENERATED = frozenset({"RX", "RY", "RZ", "RZZ"})

_H = np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2)
_X = np.array([[0, 1], [1, 0]], dtype=complex)
_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
_Z = np.array([[1, 0], [0, -1]], dtype=complex)


@dataclass(frozen=True)
class Gate:
    kind: str
    qubits: tuple[int, ...]
    slot: int | None = None
    scale: float = 1.0

    def __post_init__(self):
        kind = self.kind.upper()
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "qubits", tuple(int(q) for q in self.qubits))
        if kind not in GATE_ARITY:
            raise InvalidArgument(f"unknown gate kind {self.kind!r}")
        if len(self.qubits) != GATE_ARITY[kind]:
            raise InvalidArgument(f"{kind} acts on {GATE_ARITY[kind]} qubit(s), got {self.qubits}")
        if len(set(self.qubits)) != len(self.qubits):
            raise InvalidArgument(f"{kind} needs distinct qubits, got {self.qubits}")
        if (kind in PARAMETRIC) != (self.slot is not None):
            raise InvalidArgument(f"{kind} parameter slot mismatch: {self.slot}")

    @property
    def parametric(self) -> bool:
        return self.slot is not None


@dataclass(frozen=True)
class Circuit:
    n: int
    gates: tuple[Gate, ...]
    param_count: int
    name: str = field(default="", compare=False)

    def __post_init__(self):
        object.__setattr__(self, "gates", tuple(self.gates))
        if self.n < 1:
            raise InvalidArgument(f"qubit count must be >= 1, got {self.n}")
        for g in self.gates:
            if any(not 0 <= q < self.n for q in g.qubits):
                raise InvalidArgument(f"gate {g} touches a qubit outside 0..{self.n - 1}")
            if g.slot is not None and not 0 <= g.slot < self.param_count:
                raise InvalidArgument(f"gate {g} uses slot outside 0..{self.param_count - 1}")

    def slot_gates(self, slot: int) -> list[int]:
        return [i for i, g in enumerate(self.gates) if g.slot == slot]

    def to_text(self) -> str:
        lines = [f"n={self.n} params={self.param_count}"]
        for g in self.gates:
            parts = [g.kind] + [f"q{q}" for q in g.qubits]
            if g.slot is not None:
                parts.append(f"p{g.slot}" if g.scale == 1.0 else f"p{g.slot}*{g.scale:g}")
            lines.append(" ".join(parts))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> Circuit:
        lines = [ln.strip() for ln in text.splitlines() if ln.strip() and not ln.strip().startswith("#")]
        if not lines:
            raise InvalidArgument("empty circuit text")
        try:
            header = dict(tok.split("=", 1) for tok in lines[0].split())
            n, count = int(header["n"]), int(header["params"])
        except (KeyError, ValueError) as exc:
            raise InvalidArgument(f"bad circuit header {lines[0]!r}") from exc
        gates = []
        for ln in lines[1:]:
            kind, *args = ln.split()
            qubits = [int(a[1:]) for a in args if a.startswith("q")]
            slot, scale = None, 1.0
            for a in args:
                if a.startswith("p"):
                    ref, _, mult = a[1:].partition("*")
                    slot, scale = int(ref), float(mult) if mult else 1.0
            gates.append(Gate(kind, tuple(qubits), slot, scale))
        return cls(n, tuple(gates), count)


# -- kernel -----------------------------------------------------------------

@lru_cache(maxsize=64)
def _bits(n: int) -> np.ndarray:
    """``_bits(n)[q]`` is the value of qubit ``q`` in each basis index."""
    idx = np.arange(2**n)
    return np.array([(idx >> (n - 1 - q)) & 1 for q in range(n)], dtype=np.int8)


def _apply_1q(psi: np.ndarray, n: int, q: int, u: np.ndarray) -> np.ndarray:
    v = psi.reshape(2**q, 2, 2 ** (n - q - 1))
    out = np.empty_like(v)
    out[:, 0, :] = u[0, 0] * v[:, 0, :] + u[0, 1] * v[:, 1, :]
    out[:, 1, :] = u[1, 0] * v[:, 0, :] + u[1, 1] * v[:, 1, :]
    return out.reshape(-1)


def _apply_controlled(psi: np.ndarray, n: int, c: int, t: int, u: np.ndarray) -> np.ndarray:
    out = psi.copy().reshape([2] * n)
    sl = [slice(None)] * n
    sl[c] = 1
    sub = np.moveaxis(out[tuple(sl)], t if t < c else t - 1, 0)
    a0, a1 = sub[0].copy(), sub[1].copy()
    sub[0] = u[0, 0] * a0 + u[0, 1] * a1
    sub[1] = u[1, 0] * a0 + u[1, 1] * a1
    return out.reshape(-1)


def _rot(p: np.ndarray, phi: float) -> np.ndarray:
    return math.cos(phi / 2) * np.eye(2) - 1j * math.sin(phi / 2) * p


def apply_gate(psi: np.ndarray, n: int, gate: Gate, phi: float = 0.0) -> np.ndarray:
    """Apply ``gate`` at physical angle ``phi``; returns a new array."""
    k, qs = gate.kind, gate.qubits
    if k == "H":
        return _apply_1q(psi, n, qs[0], _H)
    if k == "CNOT":
        return _apply_controlled(psi, n, qs[0], qs[1], _X)
    if k == "RX":
        return _apply_1q(psi, n, qs[0], _rot(_X, phi))
    if k == "RY":
        return _apply_1q(psi, n, qs[0], _rot(_Y, phi))
    if k == "RZ":
        z = _bits(n)[qs[0]]
        return psi * np.where(z, np.exp(0.5j * phi), np.exp(-0.5j * phi))
    if k == "CRX":
        return _apply_controlled(psi, n, qs[0], qs[1], _rot(_X, phi))
    if k == "RZZ":
        b = _bits(n)
        odd = b[qs[0]] ^ b[qs[1]]
        return psi * np.where(odd, np.exp(0.5j * phi), np.exp(-0.5j * phi))
    if k == "CPHASE":
        b = _bits(n)
        both = b[qs[0]] & b[qs[1]]
        return psi * np.where(both, np.exp(1j * phi), 1.0)
    raise InvalidArgument(f"unknown gate kind {k}")


def apply_gate_inverse(psi: np.ndarray, n: int, gate: Gate, phi: float = 0.0) -> np.ndarray:
    if gate.kind in ("H", "CNOT"):
        return apply_gate(psi, n, gate)
    return apply_gate(psi, n, gate, -phi)


def apply_generator(psi: np.ndarray, n: int, gate: Gate) -> np.ndarray:
    """Apply K with dG/dphi = K G (K anti-Hermitian, commutes with G)."""
    k, qs = gate.kind, gate.qubits
    if k == "RX":
        return -0.5j * _apply_1q(psi, n, qs[0], _X)
    if k == "RY":
        return -0.5j * _apply_1q(psi, n, qs[0], _Y)
    if k == "RZ":
        return -0.5j * psi * (1 - 2 * _bits(n)[qs[0]])
    if k == "RZZ":
        b = _bits(n)
        return -0.5j * psi * (1 - 2 * (b[qs[0]] ^ b[qs[1]]))
    if k == "CRX":
        ctrl = _bits(n)[qs[0]]
        return -0.5j * ctrl * _apply_controlled(psi, n, qs[0], qs[1], _X)
    if k == "CPHASE":
        b = _bits(n)
        return 1j * psi * (b[qs[0]] & b[qs[1]])
    raise InvalidArgument(f"gate {k} has no parameter")


def gate_angles(circuit: Circuit, params: np.ndarray) -> np.ndarray:
    angles = np.zeros(len(circuit.gates))
    for i, g in enumerate(circuit.gates):
        if g.slot is not None:
            angles[i] = g.scale * params[g.slot]
    return angles


def _check_params(circuit: Circuit, params) -> np.ndarray:
    params = np.asarray(params, dtype=float).reshape(-1)
    if params.size != circuit.param_count:
        raise InvalidArgument(f"circuit takes {circuit.param_count} parameters, got {params.size}")
    return params


def run_amplitudes(circuit: Circuit, params, offsets: Mapping[int, float] | None = None) -> np.ndarray:
    """Statevector after applying ``circuit`` to ``|0...0>``.

    ``offsets`` adds an extra angle to individual gates (by gate index),
    which is how the shift rule perturbs one occurrence of a shared slot.
    """
    params = _check_params(circuit, params)
    angles = gate_angles(circuit, params)
    if offsets:
        for i, d in offsets.items():
            angles[i] += d
    n = circuit.n
    psi = np.zeros(2**n, dtype=complex)
    psi[0] = 1.0
    for g, phi in zip(circuit.gates, angles):
        psi = apply_gate(psi, n, g, phi)
    return psi


def run(circuit: Circuit, params) -> PureState:
    psi = run_amplitudes(circuit, params)
    return PureState(psi / np.linalg.norm(psi))


# -- ansatz families --------------------------------------------------------

ANSATZ_KINDS = ("ghz", "mixing", "butterfly", "qaoa", "toy")


def ghz_circuit(n: int) -> Circuit:
    """RX, RY, RZ on qubit 0 followed by a CRX ladder; n + 2 parameters."""
    gates = [Gate("RX", (0,), 0), Gate("RY", (0,), 1), Gate("RZ", (0,), 2)]
    gates += [Gate("CRX", (i, i + 1), 3 + i) for i in range(n - 1)]
    return Circuit(n, tuple(gates), n + 2, "ghz")


def toy_circuit(n: int) -> Circuit:
    """RX on qubit 0 followed by the CRX ladder; n parameters."""
    gates = [Gate("RX", (0,), 0)] + [Gate("CRX", (i, i + 1), 1 + i) for i in range(n - 1)]
    return Circuit(n, tuple(gates), n, "toy")


def mixing_pairs(n: int) -> tuple[list[tuple[int, int]], list[tuple[int, int]]]:
    """Entangler pairs of the two two-qubit sublayers of one mixing layer.

    First sublayer couples (0,1), (2,3), ...; second couples (1,2), (3,4),
    ... and closes the ring with (n-1, 0) when n is even.
    """
    first = [(i, i + 1) for i in range(0, n - 1, 2)]
    second = [(i, i + 1) for i in range(1, n - 1, 2)]
    if n % 2 == 0 and n > 2:
        second.append((n - 1, 0))
    return first, second


def mixing_circuit(n: int, depth: int, entangler: str = "RZZ") -> Circuit:
    """Layers of RY / ZZ / RY / ZZ; 3n parameters per layer for even n."""
    entangler = entangler.upper()
    if entangler not in ("RZZ", "CPHASE"):
        raise InvalidArgument(f"mixing entangler must be RZZ or CPHASE, got {entangler}")
    first, second = mixing_pairs(n)
    gates: list[Gate] = []
    slot = 0
    for _ in range(depth):
        for pairs in (first, second):
            for q in range(n):
                gates.append(Gate("RY", (q,), slot))
                slot += 1
            for a, b in pairs:
                gates.append(Gate(entangler, (a, b), slot))
                slot += 1
    return Circuit(n, tuple(gates), slot, "mixing")


def butterfly_pairs(n: int) -> list[list[tuple[int, int]]]:
    """CRX (control, target) pairs per stage; stage s links qubits 2^s apart."""
    stages = []
    stride = 1
    while stride < n:
        stages.append([(i, i + stride) for i in range(n) if not i & stride])
        stride *= 2
    return stages


def butterfly_circuit(n: int, depth: int = 1, control_low: bool = True) -> Circuit:
    """Per stage: RX on every qubit, then n/2 CRX in the butterfly pattern."""
    gates: list[Gate] = []
    slot = 0
    for _ in range(depth):
        for pairs in butterfly_pairs(n):
            for q in range(n):
                gates.append(Gate("RX", (q,), slot))
                slot += 1
            for a, b in pairs:
                c, t = (a, b) if control_low else (b, a)
                gates.append(Gate("CRX", (c, t), slot))
                slot += 1
    return Circuit(n, tuple(gates), slot, "butterfly")


def qaoa_circuit(n: int, layers: int) -> Circuit:
    """Hadamards, then per layer exp(-i beta H_C) and exp(-i alpha H_mix).

    H_C = sum_i Z_i Z_{i+1} on a ring, H_mix = sum_i X_i. Slot 2l holds
    beta_l and slot 2l+1 holds alpha_l.
    """
    gates = [Gate("H", (q,)) for q in range(n)]
    ring = [(i, (i + 1) % n) for i in range(n)] if n > 2 else [(0, 1)]
    for l in range(layers):
        gates += [Gate("RZZ", pair, 2 * l, 2.0) for pair in ring]
        gates += [Gate("RX", (q,), 2 * l + 1, 2.0) for q in range(n)]
    return Circuit(n, tuple(gates), 2 * layers, "qaoa")


def build_ansatz(kind: str, n: int, depth: int = 1, **options) -> Circuit:
    kind = kind.lower()
    if n < 2:
        raise InvalidArgument(f"ansatz needs n >= 2, got {n}")
    if depth < 1:
        raise InvalidArgument(f"depth/layers must be >= 1, got {depth}")
    if kind == "ghz":
        return ghz_circuit(n)
    if kind == "toy":
        return toy_circuit(n)
    if kind == "mixing":
        return mixing_circuit(n, depth, **options)
    if kind == "butterfly":
        if n & (n - 1):
            raise InvalidArgument(f"butterfly needs n a power of two, got {n}")
        return butterfly_circuit(n, depth, **options)
    if kind == "qaoa":
        if n % 2:
            raise InvalidArgument(f"qaoa needs even n, got {n}")
        return qaoa_circuit(n, depth)
    raise InvalidArgument(f"unknown ansatz kind {kind!r}; choose from {ANSATZ_KINDS}")
