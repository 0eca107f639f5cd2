"""Dense two-phase revised simplex with Bland's anti-cycling rule.

Solves ``max c.x  s.t.  A_ub x <= b_ub,  A_eq x = b_eq,  x >= 0`` and
returns the optimal vertex together with the simplex multipliers, which
are the optimal dual variables of the constraints.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgument, NumericFailure

PIVOT_TOL = 1e-11
COST_TOL = 1e-11
FEAS_TOL = 1e-9
REFACTOR_EVERY = 32


class Infeasible(NumericFailure):
    pass


class Unbounded(NumericFailure):
    pass


@dataclass
class SimplexResult:
    x: np.ndarray
    duals_ub: np.ndarray
    duals_eq: np.ndarray
    value: float
    basis: np.ndarray  # column indices into [x | slacks | artificials]
    iterations: int


class _Tableau:
    """Basis inverse bookkeeping over a fixed constraint matrix."""

    def __init__(self, a: np.ndarray, b: np.ndarray, basis: list[int]):
        self.a = a
        self.b = b
        self.basis = list(basis)
        self.refactor()
        self.since_refactor = 0

    def refactor(self) -> None:
        bmat = self.a[:, self.basis]
        try:
            self.binv = np.linalg.inv(bmat)
        except np.linalg.LinAlgError as exc:
            raise NumericFailure("singular basis") from exc
        self.xb = self.binv @ self.b
        self.since_refactor = 0

    def pivot(self, row: int, col: int, u: np.ndarray) -> None:
        piv = u[row]
        self.binv[row] /= piv
        self.xb[row] /= piv
        others = np.arange(len(u)) != row
        self.binv[others] -= np.outer(u[others], self.binv[row])
        self.xb[others] -= u[others] * self.xb[row]
        self.basis[row] = col
        self.since_refactor += 1
        if self.since_refactor >= REFACTOR_EVERY:
            self.refactor()

    def optimise(self, cost: np.ndarray, allowed: np.ndarray, max_iter: int) -> int:
        """Run Bland-rule pivots maximising ``cost``; returns iterations used."""
        for it in range(max_iter):
            y = cost[self.basis] @ self.binv
            reduced = cost - y @ self.a
            reduced[self.basis] = 0.0
            cand = np.flatnonzero(allowed & (reduced > COST_TOL))
            if cand.size == 0:
                return it
            col = int(cand[0])
            u = self.binv @ self.a[:, col]
            rows = np.flatnonzero(u > PIVOT_TOL)
            if rows.size == 0:
                raise Unbounded(f"column {col} is an unbounded direction")
            ratios = np.maximum(self.xb[rows], 0.0) / u[rows]
            best = ratios.min()
            ties = rows[ratios <= best + 1e-12 * max(1.0, best)]
            # Bland: leave with the smallest basic variable index among ties
            row = int(min(ties, key=lambda r: self.basis[r]))
            self.pivot(row, col, u)
        raise NumericFailure(f"simplex exceeded {max_iter} iterations")


def linprog_max(
    c,
    a_ub=None,
    b_ub=None,
    a_eq=None,
    b_eq=None,
    max_iter: int | None = None,
) -> SimplexResult:
    c = np.asarray(c, dtype=float)
    nvar = c.size
    a_ub = np.zeros((0, nvar)) if a_ub is None else np.asarray(a_ub, dtype=float).reshape(-1, nvar)
    b_ub = np.zeros(0) if b_ub is None else np.asarray(b_ub, dtype=float).reshape(-1)
    a_eq = np.zeros((0, nvar)) if a_eq is None else np.asarray(a_eq, dtype=float).reshape(-1, nvar)
    b_eq = np.zeros(0) if b_eq is None else np.asarray(b_eq, dtype=float).reshape(-1)
    if a_ub.shape[0] != b_ub.size or a_eq.shape[0] != b_eq.size:
        raise InvalidArgument("constraint matrix and right-hand side sizes differ")
    if np.any(b_ub < 0):
        raise InvalidArgument("inequality right-hand sides must be nonnegative")
    if not (np.all(np.isfinite(c)) and np.all(np.isfinite(a_ub)) and np.all(np.isfinite(a_eq))):
        raise InvalidArgument("non-finite LP data")

    flip = np.where(b_eq < 0, -1.0, 1.0)
    a_eq, b_eq = a_eq * flip[:, None], b_eq * flip
    m_ub, m_eq = a_ub.shape[0], a_eq.shape[0]
    m = m_ub + m_eq
    ncol = nvar + m_ub + m_eq
    a = np.zeros((m, ncol))
    a[:m_ub, :nvar] = a_ub
    a[m_ub:, :nvar] = a_eq
    a[:m_ub, nvar : nvar + m_ub] = np.eye(m_ub)
    a[m_ub:, nvar + m_ub :] = np.eye(m_eq)
    b = np.concatenate([b_ub, b_eq])
    artificial = np.zeros(ncol, dtype=bool)
    artificial[nvar + m_ub :] = True
    if max_iter is None:
        max_iter = 50 * (m + ncol) + 1000

    if m == 0:
        if np.any(c > COST_TOL):
            raise Unbounded("no constraints and a positive objective")
        return SimplexResult(np.zeros(nvar), np.zeros(0), np.zeros(0), 0.0, np.zeros(0, dtype=int), 0)

    tab = _Tableau(a, b, list(range(nvar, ncol)))
    iters = 0
    rows_kept = np.arange(m)
    if m_eq:
        phase1 = np.where(artificial, -1.0, 0.0)
        iters += tab.optimise(phase1, np.ones(ncol, dtype=bool), max_iter)
        infeas = float(np.sum(tab.xb[[i for i, col in enumerate(tab.basis) if artificial[col]]]))
        if infeas > FEAS_TOL:
            raise Infeasible(f"phase one left artificial mass {infeas:.3g}")
        # drive zero-valued artificials out of the basis, dropping redundant rows
        drop = []
        for row in range(len(tab.basis)):
            if not artificial[tab.basis[row]]:
                continue
            line = tab.binv[row] @ tab.a
            nonbasic = np.ones(ncol, dtype=bool)
            nonbasic[tab.basis] = False
            cand = np.flatnonzero(nonbasic & ~artificial & (np.abs(line) > 1e-9))
            if cand.size:
                col = int(cand[0])
                tab.pivot(row, col, tab.binv @ tab.a[:, col])
            else:
                drop.append(row)
        if drop:
            keep_rows = [r for r in range(len(tab.basis)) if r not in drop]
            # identify original constraint rows via the retained basis structure
            basis = [tab.basis[r] for r in keep_rows]
            row_ids = _independent_rows(tab.a, basis)
            rows_kept = row_ids
            tab = _Tableau(tab.a[row_ids], tab.b[row_ids], basis)

    cost = np.concatenate([c, np.zeros(m_ub + m_eq)])
    iters += tab.optimise(cost, ~artificial, max_iter)

    x_full = np.zeros(ncol)
    x_full[tab.basis] = np.maximum(tab.xb, 0.0)
    y_kept = cost[tab.basis] @ tab.binv
    y = np.zeros(m)
    y[rows_kept] = y_kept
    duals_eq = y[m_ub:] * flip
    return SimplexResult(
        x=x_full[:nvar],
        duals_ub=y[:m_ub],
        duals_eq=duals_eq,
        value=float(c @ x_full[:nvar]),
        basis=np.array(tab.basis),
        iterations=iters,
    )


def _independent_rows(a: np.ndarray, basis: list[int]) -> np.ndarray:
    """Pick len(basis) rows of ``a`` making the basis submatrix nonsingular."""
    sub = a[:, basis]
    chosen: list[int] = []
    for r in range(a.shape[0]):
        trial = chosen + [r]
        if np.linalg.matrix_rank(sub[trial]) == len(trial):
            chosen = trial
        if len(chosen) == len(basis):
            break
    if len(chosen) != len(basis):
        raise NumericFailure("could not recover an independent row set")
    return np.array(chosen)
