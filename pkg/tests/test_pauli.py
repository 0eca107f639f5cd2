from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import pauli_matrix, random_state
from qem.errors import InvalidArgument
from qem.pauli import (
    PauliString,
    PauliTable,
    WeightedObservable,
    count_local,
    enumerate_local,
    expectation,
    lipschitz_ub,
)
from qem.states import DenseState, MixtureState, PureState, ghz_state

labels = st.integers(1, 4).flatmap(lambda n: st.text("IXYZ", min_size=n, max_size=n))


def test_label_roundtrip_and_support():
    p = PauliString.from_label("XIZY")
    assert p.label == "XIZY"
    assert p.support == {0, 2, 3}
    assert p.locality == 3
    assert p.letter(1) == "I"
    assert PauliString.from_letters(4, {0: "X", 2: "Z", 3: "Y"}) == p


def test_bad_label():
    with pytest.raises(InvalidArgument):
        PauliString.from_label("XQ")


@pytest.mark.parametrize("n,k,count", [(2, 1, 6), (4, 2, 66), (1, 1, 3)])
def test_enumerate_counts(n, k, count):
    ops = enumerate_local(n, k)
    assert len(ops) == count == count_local(n, k)
    assert len(set(ops)) == count
    assert all(p.code != 0 and p.locality <= k for p in ops)


def test_enumerate_n2_k1_members():
    assert {p.label for p in enumerate_local(2, 1)} == {"XI", "YI", "ZI", "IX", "IY", "IZ"}


@pytest.mark.parametrize("n,k", [(3, 0), (3, 4)])
def test_enumerate_rejects(n, k):
    with pytest.raises(InvalidArgument):
        enumerate_local(n, k)


def test_enumerate_formula_and_prefix():
    for n in range(1, 6):
        for k in range(1, n + 1):
            ops = enumerate_local(n, k)
            assert len(ops) == sum(math.comb(n, m) * 3**m for m in range(1, k + 1))
            if k > 1:
                smaller = enumerate_local(n, k - 1)
                assert ops[: len(smaller)] == smaller
    assert enumerate_local(3, 2) == enumerate_local(3, 2)  # deterministic


@given(labels)
def test_matrix_matches_kron(label):
    p = PauliString.from_label(label)
    assert np.allclose(p.to_matrix(), pauli_matrix(label), atol=1e-14)


@given(labels, st.integers(0, 2**32 - 1))
def test_apply_matches_matrix(label, seed):
    p = PauliString.from_label(label)
    psi = random_state(p.n, np.random.default_rng(seed))
    assert np.allclose(p.apply(psi), pauli_matrix(label) @ psi, atol=1e-12)


def test_expectation_examples():
    assert expectation(PureState.from_bits("0"), PauliString.from_label("Z")) == pytest.approx(1.0)
    plus = np.array([1, 1]) / math.sqrt(2)
    pp = PureState(np.kron(plus, plus))
    assert expectation(pp, PauliString.from_label("XX")) == pytest.approx(1.0)
    # GHZ_2 against the explicit 4x4 product
    g = ghz_state(2).amplitudes
    direct = np.vdot(g, pauli_matrix("XX") @ g).real
    assert expectation(ghz_state(2), PauliString.from_label("XX")) == pytest.approx(direct) == pytest.approx(1.0)


def test_expectation_dimension_mismatch():
    with pytest.raises(InvalidArgument):
        expectation(PureState.from_bits("00"), PauliString.from_label("Z"))


@given(st.integers(0, 2**32 - 1))
def test_expectation_linear_over_mixtures(seed):
    rng = np.random.default_rng(seed)
    n = 3
    states = [PureState(random_state(n, rng)) for _ in range(3)]
    w = rng.dirichlet(np.ones(3))
    mix = MixtureState.from_lists(w, states)
    dense = DenseState(mix.density_matrix())
    for p in enumerate_local(n, 2)[::7]:
        expect = sum(wi * expectation(s, p) for wi, s in zip(w, states))
        assert expectation(mix, p) == pytest.approx(expect, abs=1e-12)
        assert expectation(dense, p) == pytest.approx(np.trace(dense.matrix @ p.to_matrix()).real, abs=1e-12)


def test_table_matches_single_expectations():
    rng = np.random.default_rng(3)
    ops = enumerate_local(3, 3)
    table = PauliTable(ops)
    for state in (PureState(random_state(3, rng)), DenseState(np.eye(8) / 8)):
        vals = table.expectations(state)
        assert np.allclose(vals, [expectation(state, p) for p in ops], atol=1e-12)


def test_weighted_observable_drops_zero_and_combines():
    h = WeightedObservable.from_labels({"ZI": 0.5, "IZ": 0.0, "XX": 1.0})
    assert len(h) == 2
    s = h + WeightedObservable.from_labels({"ZI": -0.5})
    assert len(s) == 1
    assert all(w != 0 for w in s.terms.values())
    assert (2 * h).terms[PauliString.from_label("XX")] == 2.0
    with pytest.raises(InvalidArgument):
        h + WeightedObservable.from_labels({"Z": 1.0})


def test_weighted_observable_matrix_and_apply():
    rng = np.random.default_rng(5)
    h = WeightedObservable.from_labels({"ZIX": 0.3, "YYI": -1.2, "IIZ": 0.7})
    mat = 0.3 * pauli_matrix("ZIX") - 1.2 * pauli_matrix("YYI") + 0.7 * pauli_matrix("IIZ")
    psi = random_state(3, rng)
    assert np.allclose(h.to_matrix(), mat)
    assert np.allclose(h.apply(psi), mat @ psi)
    assert h.expectation(PureState(psi)) == pytest.approx(np.vdot(psi, mat @ psi).real)


def test_lipschitz_examples():
    assert lipschitz_ub(WeightedObservable.from_labels({"ZI": 0.5, "IZ": 0.5})) == pytest.approx(1.0)
    assert lipschitz_ub(WeightedObservable(2)) == 0.0
    assert lipschitz_ub(WeightedObservable.from_labels({"XX": 1.0})) == pytest.approx(2.0)


def _random_obs(rng, n=3, terms=5):
    ops = enumerate_local(n, n)
    pick = rng.choice(len(ops), size=terms, replace=False)
    return WeightedObservable(n, {ops[j]: float(rng.normal()) for j in pick})


@given(st.integers(0, 2**32 - 1), st.floats(-5, 5))
def test_lipschitz_triangle_and_scaling(seed, c):
    rng = np.random.default_rng(seed)
    h1, h2 = _random_obs(rng), _random_obs(rng)
    assert lipschitz_ub(h1 + h2) <= lipschitz_ub(h1) + lipschitz_ub(h2) + 1e-12
    assert lipschitz_ub(c * h1) == pytest.approx(abs(c) * lipschitz_ub(h1), abs=1e-12)
