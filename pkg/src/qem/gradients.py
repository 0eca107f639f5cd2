"""Derivatives of <psi(theta)|H|psi(theta)> with respect to circuit slots."""
from __future__ import annotations

import math

import numpy as np

from .circuit import (
    PAULI_GENERATED,
    Circuit,
    _check_params,
    apply_gate_inverse,
    apply_generator,
    gate_angles,
    run_amplitudes,
)
from .errors import InvalidArgument, UnsupportedGate
from .pauli import WeightedObservable


class ProjectorLoss:
    """Observable ``-|t><t|``: its expectation is the fidelity loss minus one."""

    def __init__(self, target: np.ndarray):
        self.target = np.asarray(target, dtype=complex)
        self.n = self.target.size.bit_length() - 1

    def apply(self, psi: np.ndarray) -> np.ndarray:
        return -np.vdot(self.target, psi) * self.target


def _check_obs(circuit: Circuit, h) -> None:
    if h.n != circuit.n:
        raise InvalidArgument(f"observable acts on {h.n} qubits, circuit on {circuit.n}")


def energy(circuit: Circuit, params, h: WeightedObservable, offsets=None) -> float:
    _check_obs(circuit, h)
    psi = run_amplitudes(circuit, params, offsets)
    return float(np.vdot(psi, h.apply(psi)).real)


def adjoint_gradient(circuit: Circuit, params, h: WeightedObservable) -> np.ndarray:
    """Exact gradient from one forward pass and one reverse sweep."""
    _check_obs(circuit, h)
    params = _check_params(circuit, params)
    angles = gate_angles(circuit, params)
    n = circuit.n
    psi = run_amplitudes(circuit, params)
    lam = h.apply(psi)
    grad = np.zeros(circuit.param_count)
    for g, phi in zip(reversed(circuit.gates), angles[::-1]):
        if g.slot is not None:
            grad[g.slot] += g.scale * 2.0 * np.vdot(lam, apply_generator(psi, n, g)).real
        psi = apply_gate_inverse(psi, n, g, phi)
        lam = apply_gate_inverse(lam, n, g, phi)
    return grad


def parameter_shift_gradient(circuit: Circuit, params, h: WeightedObservable, slot: int) -> float:
    """Shift-rule derivative for one slot: sum over its gates of
    scale * [E(phi + pi/2) - E(phi - pi/2)] / 2."""
    _check_obs(circuit, h)
    params = _check_params(circuit, params)
    if not 0 <= slot < circuit.param_count:
        raise InvalidArgument(f"slot {slot} out of range")
    idx = circuit.slot_gates(slot)
    for i in idx:
        if circuit.gates[i].kind not in PAULI_GENERATED:
            raise UnsupportedGate(f"slot {slot} drives {circuit.gates[i].kind}, which has no Pauli generator")
    total = 0.0
    for i in idx:
        plus = energy(circuit, params, h, {i: math.pi / 2})
        minus = energy(circuit, params, h, {i: -math.pi / 2})
        total += circuit.gates[i].scale * 0.5 * (plus - minus)
    return total


def shift_gradient(circuit: Circuit, params, h: WeightedObservable) -> np.ndarray:
    return np.array([parameter_shift_gradient(circuit, params, h, s) for s in range(circuit.param_count)])


def finite_difference_gradient(circuit: Circuit, params, h: WeightedObservable, step: float = 1e-5) -> np.ndarray:
    params = _check_params(circuit, params)
    grad = np.zeros(circuit.param_count)
    for s in range(circuit.param_count):
        up, dn = params.copy(), params.copy()
        up[s] += step
        dn[s] -= step
        grad[s] = (energy(circuit, up, h) - energy(circuit, dn, h)) / (2 * step)
    return grad


GRADIENT_BACKENDS = {
    "adjoint": adjoint_gradient,
    "shift": shift_gradient,
    "finite-diff": finite_difference_gradient,
}
