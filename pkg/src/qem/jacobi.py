"""Cyclic Jacobi eigensolver for complex Hermitian matrices.

Rotations are applied in round-robin order: each round annihilates N/2
disjoint off-diagonal pairs at once, so a sweep is N-1 vectorised rounds.
"""
from __future__ import annotations

import numpy as np

from .errors import InvalidArgument, NumericFailure

OFF_TOL = 1e-11
MAX_SWEEPS = 100
MAX_DIM = 1024


def _round_robin(m: int) -> list[tuple[np.ndarray, np.ndarray]]:
    # circle method; m is even
    players = list(range(m))
    rounds = []
    for _ in range(m - 1):
        p = np.array(players[: m // 2])
        q = np.array(players[m // 2 :][::-1])
        lo, hi = np.minimum(p, q), np.maximum(p, q)
        rounds.append((lo, hi))
        players = [players[0]] + [players[-1]] + players[1:-1]
    return rounds


def off_norm(a: np.ndarray) -> float:
    off = a.copy()
    np.fill_diagonal(off, 0.0)
    return float(np.linalg.norm(off))


def hermitian_eig(m: np.ndarray, tol: float = OFF_TOL, max_sweeps: int = MAX_SWEEPS) -> tuple[np.ndarray, np.ndarray]:
    """Eigen-decompose a Hermitian matrix.

    Returns ``(eigenvalues, eigenvectors)`` with eigenvalues ascending and
    ``m == v @ diag(lam) @ v.conj().T``. Iterates until the off-diagonal
    Frobenius norm falls below ``tol`` (scaled by ``max(1, ||m||_F)``).
    """
    a = np.array(m, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise InvalidArgument(f"expected a square matrix, got shape {a.shape}")
    dim = a.shape[0]
    if dim > MAX_DIM:
        raise InvalidArgument(f"dimension {dim} exceeds {MAX_DIM}")
    if np.max(np.abs(a - a.conj().T), initial=0.0) > 1e-9:
        raise InvalidArgument("matrix is not Hermitian")
    a = 0.5 * (a + a.conj().T)
    if dim == 1:
        return a.real.diagonal().copy(), np.eye(1, dtype=complex)

    pad = dim % 2
    if pad:
        a = np.pad(a, ((0, 1), (0, 1)))
    size = a.shape[0]
    v = np.eye(size, dtype=complex)
    rounds = _round_robin(size)
    thresh = tol * max(1.0, float(np.linalg.norm(a)))

    for _ in range(max_sweeps):
        if off_norm(a) < thresh:
            break
        for p, q in rounds:
            apq = a[p, q]
            mag = np.abs(apq)
            live = mag > 1e-300
            if not live.any():
                continue
            app = a[p, p].real
            aqq = a[q, q].real
            safe = np.where(live, mag, 1.0)
            e = np.where(live, apq / safe, 1.0)
            tau = (aqq - app) / (2.0 * safe)
            # hypot avoids overflow of tau**2 when |a_pq| is negligible
            t = np.where(tau >= 0, 1.0, -1.0) / (np.abs(tau) + np.hypot(1.0, tau))
            t = np.where(live, t, 0.0)
            c = 1.0 / np.sqrt(1.0 + t * t)
            s = t * c
            # J restricted to (p, q): [[c, s e], [-s conj(e), c]]
            jpp, jpq, jqp, jqq = c, s * e, -s * np.conj(e), c
            ap, aq = a[:, p].copy(), a[:, q].copy()
            a[:, p] = ap * jpp + aq * jqp
            a[:, q] = ap * jpq + aq * jqq
            ap, aq = a[p, :].copy(), a[q, :].copy()
            a[p, :] = np.conj(jpp)[:, None] * ap + np.conj(jqp)[:, None] * aq
            a[q, :] = np.conj(jpq)[:, None] * ap + np.conj(jqq)[:, None] * aq
            a[p, q] = 0.0
            a[q, p] = 0.0
            vp, vq = v[:, p].copy(), v[:, q].copy()
            v[:, p] = vp * jpp + vq * jqp
            v[:, q] = vp * jpq + vq * jqq
    else:
        if off_norm(a) >= thresh:
            raise NumericFailure(f"Jacobi did not converge in {max_sweeps} sweeps")

    lam = a.diagonal().real.copy()
    if pad:
        # the padded zero row stays decoupled; drop its eigenpair
        keep = np.argmax(np.abs(v[-1, :]))
        cols = [i for i in range(size) if i != keep]
        lam, v = lam[cols], v[:dim, cols]
    order = np.argsort(lam, kind="stable")
    return lam[order], v[:, order]
