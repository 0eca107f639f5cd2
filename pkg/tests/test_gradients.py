from __future__ import annotations

import math

import numpy as np
import pytest

from qem.circuit import PAULI_GENERATED, Circuit, Gate, butterfly_circuit, ghz_circuit, mixing_circuit, qaoa_circuit
from qem.errors import UnsupportedGate
from qem.gradients import (
    ProjectorLoss,
    adjoint_gradient,
    energy,
    finite_difference_gradient,
    parameter_shift_gradient,
    shift_gradient,
)
from qem.pauli import WeightedObservable, enumerate_local

Z1 = WeightedObservable.from_labels({"Z": 1.0})


def _single(kind):
    return Circuit(1, (Gate(kind, (0,), 0),), 1)


def test_rx_examples():
    c = _single("RX")
    assert adjoint_gradient(c, [0.0], Z1)[0] == pytest.approx(0.0, abs=1e-12)
    assert adjoint_gradient(c, [math.pi / 2], Z1)[0] == pytest.approx(-1.0, abs=1e-12)
    assert parameter_shift_gradient(c, [math.pi / 2], Z1, 0) == pytest.approx(-1.0, abs=1e-12)


def test_rz_commutes_with_z():
    c = _single("RZ")
    for th in (0.0, 0.4, 2.9):
        assert parameter_shift_gradient(c, [th], Z1, 0) == pytest.approx(0.0, abs=1e-12)


def test_shift_rejects_crx():
    c = ghz_circuit(3)
    h = WeightedObservable.from_labels({"ZZZ": 1.0})
    with pytest.raises(UnsupportedGate):
        parameter_shift_gradient(c, np.zeros(c.param_count), h, 3)
    # RX/RY/RZ slots on the first qubit are fine
    parameter_shift_gradient(c, np.zeros(c.param_count), h, 0)


def _random_obs(n, rng, terms=6):
    ops = enumerate_local(n, 2)
    pick = rng.choice(len(ops), size=terms, replace=False)
    return WeightedObservable(n, {ops[j]: float(rng.normal()) for j in pick})


def _pairs(count=50):
    # mixing, QAOA (shared slots, scale 2), butterfly and GHZ ansatze with random 2-local observables
    builders = [lambda: mixing_circuit(4, 2), lambda: qaoa_circuit(4, 2), lambda: butterfly_circuit(4), lambda: ghz_circuit(4), lambda: mixing_circuit(3, 1, "CPHASE")]
    for i in range(count):
        rng = np.random.default_rng([42, i])
        c = builders[i % len(builders)]()
        yield c, rng.uniform(-math.pi, math.pi, c.param_count), _random_obs(c.n, rng)


@pytest.mark.parametrize("case", range(50))
def test_conformance(case):
    c, th, h = list(_pairs())[case]
    adj = adjoint_gradient(c, th, h)
    fd = finite_difference_gradient(c, th, h, step=1e-5)
    assert np.max(np.abs(adj - fd)) < 1e-6
    for slot in shift_slots(c):
        assert abs(adj[slot] - parameter_shift_gradient(c, th, h, slot)) < 1e-9
    if len(shift_slots(c)) == c.param_count:
        assert np.max(np.abs(adj - shift_gradient(c, th, h))) < 1e-9


def shift_slots(c):
    return [s for s in range(c.param_count) if all(c.gates[i].kind in PAULI_GENERATED for i in c.slot_gates(s))]


def test_projector_loss_gradient():
    rng = np.random.default_rng(9)
    c = mixing_circuit(4, 1)
    tgt = rng.standard_normal(16) + 1j * rng.standard_normal(16)
    tgt /= np.linalg.norm(tgt)
    th = rng.standard_normal(c.param_count)
    loss = ProjectorLoss(tgt)
    adj = adjoint_gradient(c, th, loss)
    fd = np.zeros_like(th)
    for j in range(th.size):
        e = np.zeros_like(th)
        e[j] = 1e-5
        fd[j] = (energy(c, th + e, loss) - energy(c, th - e, loss)) / 2e-5
    assert np.max(np.abs(adj - fd)) < 1e-8
