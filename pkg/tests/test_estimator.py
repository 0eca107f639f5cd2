from __future__ import annotations

import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import lp_vertex_max, random_state, transport_bruteforce
from qem.estimator import (
    OperatorPool,
    classical_em_hamming,
    cycle_operators,
    em_estimate,
    hamming,
    local_pool_with,
    locality_bias_bound,
    measure_coefficients,
    solution_csv_row,
    solve_lp,
)
from qem.errors import InvalidArgument
from qem.estimator import LpSolution
from qem.pauli import PauliString, lipschitz_ub
from qem.states import MixtureState, PureState, ghz_state
from qem.toy import compact_to_full, psi_k_theta, toy_amplitudes, toy_operators

seeds = st.integers(0, 2**32 - 1)


def test_pool_validation():
    with pytest.raises(InvalidArgument):
        OperatorPool([])
    with pytest.raises(InvalidArgument):
        OperatorPool([PauliString.from_label("XI")] * 2)
    with pytest.raises(InvalidArgument):
        OperatorPool([PauliString.from_label("II")])
    pool = OperatorPool.local(3, 2)
    assert pool.k_max == 2 and len(pool) == 36
    assert PauliString.from_label("XZI") in pool


def test_coefficient_examples():
    pool1 = OperatorPool.local(2, 1)
    c = measure_coefficients(PureState.from_bits("00"), PureState.from_bits("11"), pool1)
    got = dict(zip((p.label for p in pool1), c))
    assert got["ZI"] == pytest.approx(2) and got["IZ"] == pytest.approx(2)
    assert all(abs(v) < 1e-12 for k, v in got.items() if "Z" not in k)
    single = OperatorPool([PauliString.from_label(x) for x in "XYZ"])
    plus = PureState(np.array([1, 1]) / math.sqrt(2))
    assert np.allclose(measure_coefficients(PureState.from_bits("0"), plus, single), [-1, 0, 1])
    rng = np.random.default_rng(0)
    s = PureState(random_state(2, rng))
    assert np.allclose(measure_coefficients(s, s, pool1), 0)


def test_lp_examples():
    pool1 = OperatorPool.local(2, 1)
    c = measure_coefficients(PureState.from_bits("00"), PureState.from_bits("11"), pool1)
    sol = solve_lp(c, pool1)
    assert sol.value == pytest.approx(2.0)
    assert {p.label: w for p, w in sol.w_star.items()} == pytest.approx({"ZI": 0.5, "IZ": 0.5})
    zero = solve_lp(np.zeros(len(pool1)), pool1)
    assert zero.value == 0.0 and zero.n_active == 0
    one = solve_lp([2.0], OperatorPool([PauliString.from_label("Z")]))
    assert one.value == pytest.approx(1.0)
    with pytest.raises(InvalidArgument):
        solve_lp([1.0], pool1)


def test_budget_one_doubles_hamming():
    pool = OperatorPool.local(3, 2)
    c = measure_coefficients(PureState.from_bits("000"), PureState.from_bits("101"), pool)
    assert solve_lp(c, pool, budget=1.0).value == pytest.approx(4.0)
    assert solve_lp(c, pool).value == pytest.approx(2.0)


def test_hamming_recovery_small():
    for n in (1, 2, 3):
        pool = OperatorPool.local(n, min(2, n))
        for x, y in itertools.product(range(2**n), repeat=2):
            val, h, _ = em_estimate(PureState.basis(n, x), PureState.basis(n, y), pool)
            assert abs(val - hamming(x, y)) < 1e-9


def test_lp_against_vertex_oracle():
    rng = np.random.default_rng(4)
    pool = OperatorPool.local(2, 2)
    for _ in range(5):
        a, b = PureState(random_state(2, rng)), PureState(random_state(2, rng))
        c = measure_coefficients(a, b, pool)
        sol = solve_lp(c, pool)
        assert sol.value == pytest.approx(lp_vertex_max(np.abs(c), pool.incidence, np.full(2, 0.5)), abs=1e-9)


@given(seeds)
def test_h_max_consistency(seed):
    rng = np.random.default_rng(seed)
    n = 3
    pool = OperatorPool.local(n, 2)
    a, b = PureState(random_state(n, rng)), PureState(random_state(n, rng))
    val, h, sol = em_estimate(a, b, pool)
    assert lipschitz_ub(h) <= 1 + 1e-9
    assert h.expectation(a) - h.expectation(b) == pytest.approx(val, abs=1e-9)
    assert sol.n_active <= n


def test_ghz_sequence_example():
    n, k = 8, 3
    pool = local_pool_with(n, 2, toy_operators(n))
    psi = PureState(compact_to_full(toy_amplitudes(psi_k_theta(n, k))))
    val = em_estimate(psi, ghz_state(n), pool)[0]
    assert (n - k) / 2 - 1e-9 <= val <= (n - k + math.sqrt(2)) / 2 + 1e-9


def test_cycling_examples():
    pool = OperatorPool.local(4, 2)
    c0 = np.zeros(len(pool))
    c0[:4] = [2.0, 1.0, 1.5, 1.0]
    sol0 = solve_lp(c0, pool)
    # zero-coefficient operators are weak; inactive ones above threshold stay
    new = cycle_operators(pool, sol0, c0, 0.8, np.random.default_rng(3))
    assert len(new) == len(pool) and len(set(new.ops)) == len(new)
    assert all(new.ops[j] == pool.ops[j] for j in sol0.active)
    old = set(pool.ops)
    thresh = 0.8 * min(abs(c0[j]) for j in sol0.active)
    for j in range(len(pool)):
        if j in sol0.active or abs(c0[j]) >= thresh:
            assert new.ops[j] == pool.ops[j]
        else:
            assert new.ops[j] not in old
    # no inactive operator below threshold: the pool is returned unchanged
    flat = np.ones(len(pool))
    assert cycle_operators(pool, solve_lp(flat, pool), flat, 0.8, np.random.default_rng(3)) is pool
    with pytest.raises(InvalidArgument):
        cycle_operators(pool, sol0, c0, 0.0, np.random.default_rng(3))


def test_cycling_near_full_pool():
    pool = OperatorPool.local(2, 2)  # 15 strings: every non-identity string
    c = np.zeros(len(pool))
    c[0] = 1.0
    sol = solve_lp(c, pool)
    assert cycle_operators(pool, sol, c, 0.8, np.random.default_rng(0)) is pool
    small = OperatorPool(pool.ops[:12], 2)
    c = np.linspace(1.0, 0.0, 12)
    new = cycle_operators(small, solve_lp(c, small), c, 0.8, np.random.default_rng(0))
    changed = [j for j in range(12) if new.ops[j] != small.ops[j]]
    assert changed == [9, 10, 11]  # the three smallest coefficients
    assert len(set(new.ops)) == 12


def test_cycling_fixture_counts():
    pool = OperatorPool.local(4, 2)
    assert len(pool) == 66
    c = np.full(len(pool), 0.9)
    active = list(range(0, 64, 8))  # 8 active operators with |c| = 1
    c[active] = 1.0
    weak = [j for j in range(len(pool)) if j not in active][:20]
    c[weak] = 0.1
    sol = LpSolution({pool.ops[j]: 0.1 for j in active}, np.zeros(4), 1.0, 0.5, tuple(active))
    new = cycle_operators(pool, sol, c, 0.8, np.random.default_rng(0))
    changed = [j for j in range(len(pool)) if new.ops[j] != pool.ops[j]]
    assert len(new) == 66
    assert sorted(changed) == weak


def test_classical_em_examples():
    assert classical_em_hamming(np.eye(4)[1], np.eye(4)[2]) == pytest.approx(2.0)
    p = np.array([0.2, 0.3, 0.1, 0.4])
    assert classical_em_hamming(p, p) == pytest.approx(0.0, abs=1e-12)
    assert classical_em_hamming([0.5, 0, 0, 0.5], [1, 0, 0, 0]) == pytest.approx(1.0)
    with pytest.raises(InvalidArgument):
        classical_em_hamming([0.5, 0.1, 0, 0], [1, 0, 0, 0])


def test_classical_em_against_bruteforce():
    rng = np.random.default_rng(8)
    cost = np.array([[hamming(x, y) for y in range(4)] for x in range(4)], float)
    for _ in range(5):
        p, q = rng.dirichlet(np.ones(4)), rng.dirichlet(np.ones(4))
        assert classical_em_hamming(p, q) == pytest.approx(transport_bruteforce(p, q, cost), abs=1e-9)


def test_locality_bias_bound_and_csv():
    rng = np.random.default_rng(2)
    pool = OperatorPool.local(3, 3)
    a, b = PureState(random_state(3, rng)), PureState(random_state(3, rng))
    c = measure_coefficients(a, b, pool)
    a_bound = locality_bias_bound(c, pool)
    expect = min(max(abs(c[j]) for j, p in enumerate(pool.ops) if p.support == {q}) for q in range(3))
    assert a_bound == pytest.approx(expect)
    sol = solve_lp(c, pool)
    row = solution_csv_row(7, sol)
    assert row.startswith(f"7,{sol.value:.12g},{sol.n_active},")
    assert row.endswith("\r\n")
    with pytest.raises(InvalidArgument):
        locality_bias_bound([1.0, 1.0], OperatorPool([PauliString.from_label("XII"), PauliString.from_label("IIX")]))


def test_mixture_estimate_symmetric():
    rng = np.random.default_rng(6)
    pool = OperatorPool.local(3, 2)
    m = MixtureState.from_lists([0.4, 0.6], [PureState(random_state(3, rng)), PureState(random_state(3, rng))])
    s = PureState(random_state(3, rng))
    assert em_estimate(m, s, pool)[0] == pytest.approx(em_estimate(s, m, pool)[0], abs=1e-9)
