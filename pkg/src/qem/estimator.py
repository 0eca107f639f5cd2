"""Discriminator side of the qWGAN: the per-qubit-budget packing LP over a
pool of Pauli strings, the resulting H_max, operator cycling, and the
classical transport oracle for diagonal states."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from .errors import InvalidArgument
from .pauli import PauliString, PauliTable, WeightedObservable, enumerate_local
from .simplex import linprog_max
from .states import QuantumState

DEFAULT_BUDGET = 0.5
COEFF_CLAMP = 1e-12
ACTIVE_TOL = 1e-12


class OperatorPool:
    """Ordered, duplicate-free list of Pauli strings the discriminator may use."""

    def __init__(self, ops: Iterable[PauliString], n: int | None = None):
        ops = tuple(ops)
        if not ops:
            raise InvalidArgument("operator pool is empty")
        n = ops[0].n if n is None else n
        if any(p.n != n for p in ops):
            raise InvalidArgument("pool operators differ in qubit count")
        if len(set(ops)) != len(ops):
            raise InvalidArgument("pool contains duplicate operators")
        if any(p.code == 0 for p in ops):
            raise InvalidArgument("identity string is not allowed in the pool")
        self.ops = ops
        self.n = n
        self.k_max = max(p.locality for p in ops)

    @classmethod
    def local(cls, n: int, k: int) -> OperatorPool:
        return cls(enumerate_local(n, k), n)

    def __len__(self) -> int:
        return len(self.ops)

    def __iter__(self):
        return iter(self.ops)

    def __contains__(self, p: PauliString) -> bool:
        return p in self._index

    def index(self, p: PauliString) -> int:
        return self._index[p]

    @cached_property
    def _index(self) -> dict[PauliString, int]:
        return {p: i for i, p in enumerate(self.ops)}

    @cached_property
    def table(self) -> PauliTable:
        return PauliTable(self.ops)

    @cached_property
    def incidence(self) -> np.ndarray:
        """``incidence[i, j] = 1`` when operator j acts on qubit i."""
        inc = np.zeros((self.n, len(self.ops)))
        for j, p in enumerate(self.ops):
            inc[list(p.support), j] = 1.0
        return inc

    @cached_property
    def localities(self) -> np.ndarray:
        return np.array([p.locality for p in self.ops])


@dataclass
class LpSolution:
    w_star: dict[PauliString, float]
    z_star: np.ndarray
    value: float
    budget: float
    active: tuple[int, ...] = field(default=())  # pool indices of nonzero weights

    @property
    def n_active(self) -> int:
        return len(self.w_star)

    def csv_fields(self) -> list[str]:
        return [f"{p.label}:{w:.12g}" for p, w in self.w_star.items()]


def measure_coefficients(gen: QuantumState, target: QuantumState, pool: OperatorPool) -> np.ndarray:
    """``c_j = Tr[(gen - target) P_j]`` for each pool operator, in pool order."""
    if gen.n != pool.n or target.n != pool.n:
        raise InvalidArgument(f"states have {gen.n}/{target.n} qubits, pool has {pool.n}")
    return pool.table.expectations(gen) - pool.table.expectations(target)


def solve_lp(c, pool: OperatorPool, budget: float = DEFAULT_BUDGET) -> LpSolution:
    """max sum_j c_j w_j  s.t.  sum_{j: i in supp(P_j)} |w_j| <= budget for every qubit i.

    Folded to ``max |c|.u, incidence @ u <= budget, u >= 0`` with
    ``w = sign(c) u`` and solved by the revised simplex.
    """
    if budget <= 0:
        raise InvalidArgument(f"budget must be positive, got {budget}")
    c = np.asarray(c, dtype=float)
    if c.shape != (len(pool),):
        raise InvalidArgument(f"coefficient vector has shape {c.shape}, pool has {len(pool)} operators")
    c = np.where(np.abs(c) < COEFF_CLAMP, 0.0, c)
    live = np.flatnonzero(c)
    if live.size == 0:
        return LpSolution({}, np.zeros(pool.n), 0.0, budget)
    res = linprog_max(np.abs(c[live]), pool.incidence[:, live], np.full(pool.n, budget))
    u = np.zeros(len(pool))
    u[live] = res.x
    active = tuple(int(j) for j in np.flatnonzero(u > ACTIVE_TOL))
    w_star = {pool.ops[j]: float(np.sign(c[j]) * u[j]) for j in active}
    return LpSolution(w_star, np.maximum(res.duals_ub, 0.0), float(res.value), budget, active)


def h_max_of(solution: LpSolution, n: int) -> WeightedObservable:
    return WeightedObservable(n, solution.w_star)


def em_estimate(
    gen: QuantumState, target: QuantumState, pool: OperatorPool, budget: float = DEFAULT_BUDGET
) -> tuple[float, WeightedObservable, LpSolution]:
    """Lower estimate of the quantum EM distance restricted to ``pool``."""
    c = measure_coefficients(gen, target, pool)
    sol = solve_lp(c, pool, budget)
    return sol.value, h_max_of(sol, pool.n), sol


def random_pauli(n: int, rng: np.random.Generator) -> PauliString:
    """Uniform over the 4^n - 1 non-identity strings."""
    return PauliString(n, int(rng.integers(1, 4**n)))


def cycle_operators(
    pool: OperatorPool,
    solution: LpSolution,
    c,
    p_thresh: float,
    rng: np.random.Generator,
) -> OperatorPool:
    """Swap weak operators for fresh random strings, keeping pool size.

    An operator is weak when ``|c_j| < p_thresh * min_active |c_j|``;
    active operators are never removed. When fewer unused strings exist
    than weak operators, only the weakest are replaced.
    """
    if not 0 < p_thresh <= 1:
        raise InvalidArgument(f"p_thresh must lie in (0, 1], got {p_thresh}")
    if not solution.active:
        return pool
    c = np.abs(np.asarray(c, dtype=float))
    thresh = p_thresh * c[list(solution.active)].min()
    active = set(solution.active)
    weak = [int(j) for j in np.flatnonzero(c < thresh) if j not in active]
    if not weak:
        return pool
    spare = 4**pool.n - 1 - len(pool)
    if spare == 0:
        return pool
    if len(weak) > spare:
        # few unused strings left (small n): replace only the weakest
        weak = sorted(sorted(weak, key=lambda j: c[j])[:spare])
    ops = list(pool.ops)
    taken = set(ops)
    for j in weak:
        while True:
            p = random_pauli(pool.n, rng)
            if p not in taken:
                break
        taken.add(p)
        ops[j] = p
    return OperatorPool(ops, pool.n)


def locality_bias_bound(c, pool: OperatorPool) -> float:
    """``a = min_i max_P |c_{P on qubit i}|`` over single-qubit pool entries."""
    c = np.abs(np.asarray(c, dtype=float))
    best = np.zeros(pool.n)
    seen = np.zeros(pool.n, dtype=bool)
    for j, p in enumerate(pool.ops):
        if p.locality == 1:
            (q,) = p.support
            best[q] = max(best[q], c[j])
            seen[q] = True
    if not seen.all():
        raise InvalidArgument("pool lacks single-qubit operators on some qubit")
    return float(best.min())


# -- classical oracle --------------------------------------------------------

def hamming(x: int, y: int) -> int:
    return int(bin(x ^ y).count("1"))


def classical_em_hamming(p, q) -> float:
    """Optimal transport cost between distributions on n-bit strings with
    Hamming ground cost, solved as a transportation LP."""
    p = np.asarray(p, dtype=float).reshape(-1)
    q = np.asarray(q, dtype=float).reshape(-1)
    if p.shape != q.shape:
        raise InvalidArgument("distributions have different sizes")
    size = p.size
    n = size.bit_length() - 1
    if 2**n != size or n < 1:
        raise InvalidArgument(f"distribution length {size} is not 2^n")
    if n > 4:
        raise InvalidArgument(f"transport LP limited to n <= 4, got {n}")
    for name, d in (("p", p), ("q", q)):
        if np.any(d < -1e-12) or abs(d.sum() - 1.0) > 1e-9:
            raise InvalidArgument(f"{name} is not a normalised distribution")
    cost = np.array([[hamming(x, y) for y in range(size)] for x in range(size)], dtype=float)
    rows = np.kron(np.eye(size), np.ones(size))
    cols = np.kron(np.ones(size), np.eye(size))
    res = linprog_max(-cost.reshape(-1), a_eq=np.vstack([rows, cols]), b_eq=np.concatenate([p, q]))
    return -res.value


def diagonal_distribution(state: QuantumState) -> np.ndarray:
    return np.real(np.diag(state.density_matrix())).copy()


# -- logging -----------------------------------------------------------------

def solution_csv_row(step: int, solution: LpSolution) -> str:
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\r\n").writerow(
        [step, f"{solution.value:.12g}", solution.n_active, *solution.csv_fields()]
    )
    return buf.getvalue()


def local_pool_with(n: int, k: int, extra: Sequence[PauliString]) -> OperatorPool:
    """The k-local pool plus extra strings not already in it."""
    base = enumerate_local(n, k)
    seen = set(base)
    return OperatorPool(base + [p for p in extra if p not in seen and not seen.add(p)], n)


__all__ = [
    "OperatorPool",
    "LpSolution",
    "measure_coefficients",
    "solve_lp",
    "em_estimate",
    "cycle_operators",
    "random_pauli",
    "classical_em_hamming",
    "locality_bias_bound",
    "hamming",
    "h_max_of",
    "local_pool_with",
    "diagonal_distribution",
    "solution_csv_row",
]
