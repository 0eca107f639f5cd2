from __future__ import annotations

import csv
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import circuit_state, pauli_matrix
from qem.circuit import toy_circuit
from qem.errors import InvalidArgument
from qem.states import ghz_state
from qem.toy import (
    CompactState,
    ToyParams,
    ladder_operator,
    optimise_toy,
    psi_k_theta,
    toy_amplitudes,
    toy_em_estimate,
    toy_em_grad,
    toy_fidelity,
    toy_fidelity_grad,
    toy_operators,
    toy_state,
    toy_success_experiment,
    write_toy_csv,
)

seeds = st.integers(0, 2**32 - 1)


def _dense_em(theta, family):
    """Candidate maximum from explicit 2^n matrices."""
    n = len(theta)
    psi = toy_state(theta).to_full()
    g = ghz_state(n).amplitudes
    delta = lambda label: np.vdot(psi, pauli_matrix(label) @ psi).real - np.vdot(g, pauli_matrix(label) @ g).real
    dz = [delta(p.label) for p in toy_operators(n)[:n]]
    dl = [delta(p.label) for p in toy_operators(n)[n:]]
    cands = [sum(abs(x) for x in dz)]
    for m in range(1, n + 1):
        extra = sum(abs(x) for x in dz[m:]) if family == "full" else 0.0
        cands.append(abs(dl[m - 1]) + extra)
    return 0.5 * max(cands)


def test_compact_matches_circuit_n8():
    rng = np.random.default_rng(0)
    theta = rng.uniform(-math.pi, math.pi, 8)
    full = circuit_state(toy_circuit(8), ToyParams(theta).gate_angles())
    assert np.allclose(toy_state(theta).to_full(), full, atol=1e-9)


@given(seeds, st.integers(1, 10))
def test_compact_matches_circuit(seed, n):
    theta = np.random.default_rng(seed).uniform(-4, 4, n)
    full = circuit_state(toy_circuit(n), -2 * theta)
    assert np.allclose(toy_state(theta).to_full(), full, atol=1e-9)


def test_state_validation():
    with pytest.raises(InvalidArgument):
        CompactState(np.array([1.0, 1.0]))
    with pytest.raises(InvalidArgument):
        ToyParams(np.array([np.nan]))
    with pytest.raises(InvalidArgument):
        psi_k_theta(3, 4)


def test_fidelity_examples():
    n = 8
    assert toy_fidelity(np.zeros(n)) == pytest.approx(0.5)
    assert toy_fidelity(psi_k_theta(n, n)) == pytest.approx(1.0)
    assert toy_fidelity(psi_k_theta(n, 3)) == pytest.approx(0.25)


@given(seeds, st.sampled_from([4, 8, 12]))
def test_fidelity_matches_overlap_when_phase_is_one(seed, n):
    theta = np.random.default_rng(seed).standard_normal(n)
    direct = abs(np.vdot(ghz_state(n).amplitudes, toy_state(theta).to_full())) ** 2
    assert toy_fidelity(theta) == pytest.approx(direct, abs=1e-12)


@given(seeds, st.integers(1, 9))
def test_fidelity_grad_matches_finite_difference(seed, n):
    theta = np.random.default_rng(seed).uniform(-3, 3, n)
    h = 1e-6
    fd = np.array([(toy_fidelity(theta + h * e) - toy_fidelity(theta - h * e)) / (2 * h) for e in np.eye(n)])
    assert np.allclose(toy_fidelity_grad(theta), fd, atol=1e-8)


def test_fidelity_gradients_vanish_at_large_n():
    rng = np.random.default_rng(5)
    g = toy_fidelity_grad(rng.standard_normal((200, 20)))
    assert np.median(np.abs(g[:, 1:])) < 1e-3


def test_batched_matches_single():
    theta = np.random.default_rng(2).standard_normal((4, 5))
    assert np.allclose(toy_fidelity(theta), [toy_fidelity(t) for t in theta])
    assert np.allclose(toy_em_estimate(theta), [toy_em_estimate(t) for t in theta])
    assert np.allclose(toy_amplitudes(theta)[2], toy_amplitudes(theta[2]))


def test_ladder_letters():
    assert ladder_operator(4, 1).label == "YIII"
    assert ladder_operator(4, 2).label == "XXII"
    assert ladder_operator(4, 3).label == "XXYI"
    assert ladder_operator(4, 4).label == "XXXX"
    assert len(toy_operators(5)) == 10


@pytest.mark.parametrize("family", ["full", "simple"])
@given(seed=seeds, n=st.integers(1, 7))
def test_em_estimate_matches_dense(family, seed, n):
    theta = np.random.default_rng(seed).uniform(-3, 3, n)
    assert toy_em_estimate(theta, family=family) == pytest.approx(_dense_em(theta, family), abs=1e-10)


def test_em_examples():
    assert toy_em_estimate(np.zeros(8)) == pytest.approx(4.0)
    assert toy_em_estimate(np.zeros(8), family="simple") == pytest.approx(4.0)
    assert toy_em_estimate(psi_k_theta(8, 8)) == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("family", ["full", "simple"])
@given(seed=seeds, n=st.integers(1, 8))
def test_em_grad_matches_finite_difference(family, seed, n):
    theta = np.random.default_rng(seed).uniform(-3, 3, n)
    value, g = toy_em_grad(theta, family)
    assert value == pytest.approx(toy_em_estimate(theta, family=family))
    h = 1e-7
    fd = np.array([(toy_em_estimate(theta + h * e, family=family) - toy_em_estimate(theta - h * e, family=family)) / (2 * h) for e in np.eye(n)])
    # away from kinks of the max and abs the subgradient is the gradient
    if np.allclose(fd, g, atol=1e-5):
        return
    one_sided = np.array([(toy_em_estimate(theta + h * e, family=family) - value) / h for e in np.eye(n)])
    other = np.array([(value - toy_em_estimate(theta - h * e, family=family)) / h for e in np.eye(n)])
    lo, hi = np.minimum(one_sided, other), np.maximum(one_sided, other)
    assert np.all((g >= lo - 1e-5) & (g <= hi + 1e-5))


@pytest.mark.parametrize("family", ["full", "simple"])
@pytest.mark.parametrize("n", [4, 8, 12])
def test_psi_k_sequence(n, family):
    d = [toy_em_estimate(psi_k_theta(n, k), family=family) for k in range(n + 1)]
    assert d[n] == pytest.approx(0.0, abs=1e-12)
    assert n / 2 - 1e-12 <= d[0] <= (n + 1) / 2 + 1e-12
    for k in range(1, n):
        assert (n - k) / 2 - 1e-12 <= d[k] <= (n - k + math.sqrt(2)) / 2 + 1e-12
    for k in range(n - 1):
        assert d[k + 2] < d[k]


def test_full_candidate_values_n8():
    d = [toy_em_estimate(psi_k_theta(8, k), family="full") for k in range(9)]
    # Psi_k for k >= 2 differs from GHZ only on Z of qubits k+1..n (each by 1) and on L_n
    assert d[2:8] == pytest.approx([(8 - k + 1) / 2 for k in range(2, 8)], abs=1e-12)


def test_em_zero_only_at_ghz():
    rng = np.random.default_rng(9)
    base = psi_k_theta(8, 8)
    for scale in (1e-1, 1e-2, 1e-3):
        theta = base + scale * rng.standard_normal(8)
        assert toy_em_estimate(theta) > 0
        assert toy_fidelity(theta) < 1
    assert toy_em_estimate(base) < 1e-12


def test_optimiser_reaches_ghz_small_n():
    res = toy_success_experiment([4], trials=20, loss="em", seed=3)
    assert res[0].rate >= 0.95
    res = toy_success_experiment([4], trials=20, loss="fidelity", seed=3)
    assert res[0].rate >= 0.95


def test_frozen_second_angle_never_succeeds():
    res = toy_success_experiment([4], trials=10, loss="em", seed=0, frozen=(1,), max_steps=500)
    assert res[0].successes == 0


def test_optimiser_rejects_bad_loss():
    with pytest.raises(InvalidArgument):
        optimise_toy(np.zeros((1, 3)), "nope")


def test_optimiser_deterministic():
    a = toy_success_experiment([5], trials=4, loss="em", seed=1, max_steps=300)
    b = toy_success_experiment([5], trials=4, loss="em", seed=1, max_steps=300)
    assert a == b


def test_csv_output(tmp_path):
    res = toy_success_experiment([3, 4], trials=3, loss="em", seed=0, max_steps=200)
    path = write_toy_csv(res, tmp_path / "toy.csv")
    rows = list(csv.DictReader(open(path, newline="")))
    assert [r["n"] for r in rows] == ["3", "4"]
    assert set(rows[0]) == {"n", "loss", "trials", "successes", "rate", "mean_steps"}
    assert float(rows[0]["rate"]) == pytest.approx(res[0].rate)
