"""Closed-form GHZ toy model: an RX + CRX-ladder circuit whose state lives
on the n+1 basis states |1_k 0_{n-k}>.

Angles here use the formula convention (``cos(theta_1)`` rather than
``cos(theta_1 / 2)``) with amplitude phases ``i^k``. The same state comes
out of :func:`qem.circuit.toy_circuit` at gate angles ``-2 * theta``.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import InvalidArgument
from .pauli import PauliString

SUCCESS_FIDELITY = 0.98
TOY_LR = 0.2
FIDELITY_MAX_STEPS = 100_000
EM_MAX_STEPS = 10_000


def _as_theta(theta) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    if theta.ndim not in (1, 2) or theta.shape[-1] < 1:
        raise InvalidArgument(f"theta must be (n,) or (batch, n), got {theta.shape}")
    if not np.all(np.isfinite(theta)):
        raise InvalidArgument("theta has non-finite entries")
    return theta


def _magnitudes(theta: np.ndarray) -> np.ndarray:
    """Real factors r_k with amps[k] = i^k r_k; shape (..., n+1)."""
    s, c = np.sin(theta), np.cos(theta)
    prefix = np.cumprod(s, axis=-1)
    ones = np.ones(theta.shape[:-1] + (1,))
    lead = np.concatenate([ones, prefix], axis=-1)  # prod_{j<=k} sin, k = 0..n
    tail = np.concatenate([c, ones], axis=-1)  # cos theta_{k+1}, or 1 for k = n
    return lead * tail


def _magnitude_jacobian(theta: np.ndarray) -> np.ndarray:
    """d r_k / d theta_j with shape (..., n+1, n), computed without division."""
    n = theta.shape[-1]
    s, c = np.sin(theta), np.cos(theta)
    # factors[..., k, j] is the j-th factor of r_k: sin for j < k, cos for j == k, 1 beyond
    k_idx = np.arange(n + 1)[:, None]
    j_idx = np.arange(n)[None, :]
    below = j_idx < k_idx
    at = j_idx == k_idx
    factors = np.where(below, s[..., None, :], np.where(at, c[..., None, :], 1.0))
    dfactors = np.where(below, c[..., None, :], np.where(at, -s[..., None, :], 0.0))
    # product of all factors except j, via prefix/suffix products
    ones = np.ones(factors.shape[:-1] + (1,))
    pre = np.concatenate([ones, np.cumprod(factors, axis=-1)[..., :-1]], axis=-1)
    suf = np.concatenate([np.cumprod(factors[..., ::-1], axis=-1)[..., ::-1][..., 1:], ones], axis=-1)
    return pre * suf * dfactors


@dataclass(frozen=True)
class ToyParams:
    """Formula-convention angles theta_1..theta_n."""

    theta: np.ndarray

    def __post_init__(self):
        theta = np.asarray(self.theta, dtype=float)
        if theta.ndim != 1 or theta.size < 1 or not np.all(np.isfinite(theta)):
            raise InvalidArgument("ToyParams needs a finite 1-D angle vector")
        object.__setattr__(self, "theta", theta)

    @property
    def n(self) -> int:
        return self.theta.size

    def gate_angles(self) -> np.ndarray:
        """Angles for :func:`qem.circuit.toy_circuit` producing the same state."""
        return -2.0 * self.theta


@dataclass(frozen=True)
class CompactState:
    """Amplitudes on |1_k 0_{n-k}>, k = 0..n."""

    amps: np.ndarray

    def __post_init__(self):
        amps = np.asarray(self.amps, dtype=complex)
        if amps.ndim != 1 or amps.size < 2:
            raise InvalidArgument("compact state needs n+1 >= 2 amplitudes")
        if abs(np.vdot(amps, amps).real - 1.0) > 1e-10:
            raise InvalidArgument("compact state is not normalised")
        object.__setattr__(self, "amps", amps)

    @property
    def n(self) -> int:
        return self.amps.size - 1

    def to_full(self) -> np.ndarray:
        return compact_to_full(self.amps)


def toy_amplitudes(theta) -> np.ndarray:
    """Compact amplitudes, batched over leading axes of ``theta``."""
    theta = _as_theta(theta)
    n = theta.shape[-1]
    return (1j ** np.arange(n + 1)) * _magnitudes(theta)


def toy_state(theta) -> CompactState:
    if isinstance(theta, ToyParams):
        theta = theta.theta
    theta = _as_theta(theta)
    if theta.ndim != 1:
        raise InvalidArgument("toy_state takes a single angle vector")
    return CompactState(toy_amplitudes(theta))


def compact_to_full(amps: np.ndarray) -> np.ndarray:
    """Embed a compact toy state in the 2^n statevector."""
    n = amps.size - 1
    full = np.zeros(2**n, dtype=complex)
    for k, a in enumerate(amps):
        full[((1 << k) - 1) << (n - k)] = a
    return full


def toy_fidelity(theta, n: int | None = None) -> np.ndarray | float:
    """(cos(theta_1)/sqrt2 + prod_i sin(theta_i)/sqrt2)^2, batched over leading axes.

    This is the overlap with GHZ when n is a multiple of 4 (phase i^n = 1).
    """
    theta = _as_theta(theta)
    if n is not None and theta.shape[-1] != n:
        raise InvalidArgument(f"theta has {theta.shape[-1]} entries, expected {n}")
    f = 0.5 * (np.cos(theta[..., 0]) + np.prod(np.sin(theta), axis=-1)) ** 2
    return float(f) if f.ndim == 0 else f


def toy_fidelity_grad(theta, n: int | None = None) -> np.ndarray:
    theta = _as_theta(theta)
    if n is not None and theta.shape[-1] != n:
        raise InvalidArgument(f"theta has {theta.shape[-1]} entries, expected {n}")
    s, c = np.sin(theta), np.cos(theta)
    t1 = theta[..., 0]
    np_ = theta.shape[-1]
    # products of sines with one index left out, via prefix/suffix
    ones = np.ones(theta.shape[:-1] + (1,))
    pre = np.concatenate([ones, np.cumprod(s, axis=-1)[..., :-1]], axis=-1)
    suf = np.concatenate([np.cumprod(s[..., ::-1], axis=-1)[..., ::-1][..., 1:], ones], axis=-1)
    without = pre * suf
    full = np.prod(s, axis=-1)
    tail = without[..., 0]  # prod_{k>=2} sin
    g = np.empty_like(theta)
    g[..., 0] = -np.cos(t1) * np.sin(t1) + np.cos(2 * t1) * tail + np.sin(t1) * np.cos(t1) * tail**2
    if np_ > 1:
        g[..., 1:] = c[..., 1:] * without[..., 1:] * (np.cos(t1) + full)[..., None]
    return g


# -- EM estimate over the O(n) operator family ---------------------------------

def ladder_operator(n: int, m: int) -> PauliString:
    """X on qubits 1..m-1 and, on qubit m, X for even m or Y for odd m (1-based)."""
    letters = {q: "X" for q in range(m - 1)}
    letters[m - 1] = "X" if m % 2 == 0 else "Y"
    return PauliString.from_letters(n, letters)


def toy_operators(n: int) -> list[PauliString]:
    """Z on every qubit, followed by the n ladder operators."""
    zs = [PauliString.from_letters(n, {q: "Z"}) for q in range(n)]
    return zs + [ladder_operator(n, m) for m in range(1, n + 1)]


def _expectations(r: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """<Z_i> (i = 1..n) and <L_m> (m = 1..n) from magnitudes r (..., n+1)."""
    n = r.shape[-1] - 1
    prob = r**2
    # <Z_i> = 1 - 2 * P(qubit i set) = 1 - 2 * sum_{k >= i} p_k
    tail = np.cumsum(prob[..., ::-1], axis=-1)[..., ::-1]
    ez = 1.0 - 2.0 * tail[..., 1:]
    eps = _ladder_signs(n)
    el = 2.0 * eps * r[..., :1] * r[..., 1:]
    return ez, el


def _ladder_signs(n: int) -> np.ndarray:
    # <L_m> = 2 Re/Im(conj(a_0) a_m) picks out Re(i^m) or Im(i^m), both +-1
    m = np.arange(1, n + 1)
    return np.where(m % 2 == 0, np.where(m % 4 == 0, 1.0, -1.0), np.where(m % 4 == 1, 1.0, -1.0))


def _ghz_expectations(n: int) -> tuple[np.ndarray, np.ndarray]:
    ez = np.zeros(n)
    el = np.zeros(n)
    if n % 2 == 0:
        el[-1] = 1.0  # <GHZ| X...X |GHZ>
    return ez, el


def _candidates(dz: np.ndarray, dl: np.ndarray, family: str) -> np.ndarray:
    """Candidate sums (..., n+1): column 0 is the Z-sum, column m uses ladder m."""
    az, al = np.abs(dz), np.abs(dl)
    if family == "full":
        tailz = np.concatenate([np.cumsum(az[..., ::-1], axis=-1)[..., ::-1][..., 1:], np.zeros(az.shape[:-1] + (1,))], axis=-1)
        rest = al + tailz
    elif family == "simple":
        rest = al
    else:
        raise InvalidArgument(f"unknown candidate family {family!r}")
    return np.concatenate([az.sum(axis=-1, keepdims=True), rest], axis=-1)


def toy_em_estimate(theta, n: int | None = None, family: str = "full") -> np.ndarray | float:
    """Max over the candidate Hamiltonians, each scaled to Lipschitz bound 1.

    Every candidate puts weight 1/2 on each operator it uses, so the value
    is half the largest candidate sum.
    """
    theta = _as_theta(theta)
    if n is not None and theta.shape[-1] != n:
        raise InvalidArgument(f"theta has {theta.shape[-1]} entries, expected {n}")
    n = theta.shape[-1]
    ez, el = _expectations(_magnitudes(theta))
    gz, gl = _ghz_expectations(n)
    val = 0.5 * _candidates(ez - gz, el - gl, family).max(axis=-1)
    return float(val) if val.ndim == 0 else val


def toy_em_grad(theta, family: str = "full") -> tuple[np.ndarray, np.ndarray]:
    """Value and a subgradient of :func:`toy_em_estimate` (argmax candidate)."""
    theta = _as_theta(theta)
    n = theta.shape[-1]
    r = _magnitudes(theta)
    dr = _magnitude_jacobian(theta)  # (..., n+1, n)
    ez, el = _expectations(r)
    gz, gl = _ghz_expectations(n)
    dz, dl = ez - gz, el - gl
    cands = _candidates(dz, dl, family)
    best = np.argmax(cands, axis=-1)
    value = 0.5 * np.take_along_axis(cands, best[..., None], axis=-1)[..., 0]

    # derivatives of the expectations
    dprob = 2.0 * r[..., :, None] * dr  # (..., n+1, n)
    dtail = np.cumsum(dprob[..., ::-1, :], axis=-2)[..., ::-1, :]
    dez = -2.0 * dtail[..., 1:, :]  # (..., n, n)
    eps = _ladder_signs(n)
    del_ = 2.0 * eps[:, None] * (dr[..., :1, :] * r[..., 1:, None] + r[..., :1, None] * dr[..., 1:, :])

    # weights of each |E| term in the chosen candidate
    qubit = np.arange(1, n + 1)
    bsel = best[..., None]
    wz = np.where(bsel == 0, 1.0, 0.0)
    if family == "full":
        wz = np.where((bsel > 0) & (qubit > bsel), 1.0, wz)
    wl = np.where(bsel == qubit, 1.0, 0.0)
    grad = np.einsum("...i,...ij->...j", wz * np.sign(dz), dez) + np.einsum("...i,...ij->...j", wl * np.sign(dl), del_)
    return value, 0.5 * grad


def psi_k_theta(n: int, k: int) -> np.ndarray:
    """Formula-convention angles producing |Psi_k> (GHZ on the first k qubits)."""
    if not 0 <= k <= n:
        raise InvalidArgument(f"need 0 <= k <= n, got k={k}")
    theta = np.zeros(n)
    if k >= 1:
        theta[0] = math.pi / 4
        theta[1:k] = math.pi / 2
    return theta


# -- success-rate experiment ---------------------------------------------------

@dataclass
class ToyRunResult:
    n: int
    loss: str
    trials: int
    successes: int
    mean_steps: float

    @property
    def rate(self) -> float:
        return self.successes / self.trials


class _BatchAdam:
    def __init__(self, shape, lr, b1=0.9, b2=0.999, eps=1e-8):
        self.m = np.zeros(shape)
        self.v = np.zeros(shape)
        self.t = 0
        self.lr, self.b1, self.b2, self.eps = lr, b1, b2, eps

    def step(self, params, grad):
        self.t += 1
        self.m = self.b1 * self.m + (1 - self.b1) * grad
        self.v = self.b2 * self.v + (1 - self.b2) * grad**2
        mhat = self.m / (1 - self.b1**self.t)
        vhat = self.v / (1 - self.b2**self.t)
        return params - self.lr * mhat / (np.sqrt(vhat) + self.eps)


def optimise_toy(
    theta0: np.ndarray,
    loss: str,
    lr: float = TOY_LR,
    max_steps: int | None = None,
    family: str = "simple",
    frozen: Sequence[int] = (),
    tol: float = 1e-9,
) -> tuple[np.ndarray, np.ndarray]:
    """Adam on a batch of toy circuits; returns angles and steps used.

    ``loss='fidelity'`` minimises 1 - F, ``loss='em'`` minimises the
    estimate. Each trial returns its lowest-loss iterate: with a fixed
    step size the max-of-abs EM surface is never settled on exactly, and
    the running best is the usual checkpoint. Trials stop individually
    once their update falls below ``tol`` or the loss reaches zero.
    """
    theta = np.array(theta0, dtype=float, ndmin=2)
    if loss not in ("fidelity", "em"):
        raise InvalidArgument(f"loss must be 'fidelity' or 'em', got {loss!r}")
    if max_steps is None:
        max_steps = FIDELITY_MAX_STEPS if loss == "fidelity" else EM_MAX_STEPS
    mask = np.ones(theta.shape[-1])
    mask[list(frozen)] = 0.0
    opt = _BatchAdam(theta.shape, lr)
    running = np.ones(theta.shape[0], dtype=bool)
    steps = np.zeros(theta.shape[0], dtype=int)
    best = np.full(theta.shape[0], np.inf)
    best_theta = theta.copy()
    for _ in range(max_steps):
        if not running.any():
            break
        if loss == "fidelity":
            value = 1.0 - toy_fidelity(theta)
            grad = -toy_fidelity_grad(theta)
        else:
            value, grad = toy_em_grad(theta, family)
        better = value < best
        best = np.where(better, value, best)
        best_theta[better] = theta[better]
        grad = grad * mask * running[:, None]
        new = opt.step(theta, grad)
        new = np.where(running[:, None], new, theta)
        moved = np.max(np.abs(new - theta), axis=-1)
        theta = new
        steps += running
        running &= (value > 1e-12) & (moved > tol)
    # the final iterate never got scored inside the loop
    value = 1.0 - toy_fidelity(theta) if loss == "fidelity" else toy_em_estimate(theta, family=family)
    better = np.atleast_1d(value) < best
    best_theta[better] = theta[better]
    return best_theta, steps


def toy_success_experiment(
    n_list: Sequence[int],
    trials: int,
    loss: str,
    seed: int = 0,
    lr: float = TOY_LR,
    max_steps: int | None = None,
    family: str = "simple",
    frozen: Sequence[int] = (),
) -> list[ToyRunResult]:
    if trials < 1:
        raise InvalidArgument("trials must be >= 1")
    out = []
    for n in n_list:
        theta0 = np.stack([np.random.default_rng([seed, n, t]).standard_normal(n) for t in range(trials)])
        theta0[:, list(frozen)] = 0.0
        theta, steps = optimise_toy(theta0, loss, lr, max_steps, family, frozen)
        fid = toy_fidelity(theta)
        ok = int(np.sum(fid > SUCCESS_FIDELITY))
        out.append(ToyRunResult(n, loss, trials, ok, float(steps.mean())))
    return out


def write_toy_csv(results: Sequence[ToyRunResult], path: Path) -> Path:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["n", "loss", "trials", "successes", "rate", "mean_steps"])
        for r in results:
            w.writerow([r.n, r.loss, r.trials, r.successes, f"{r.rate:.6g}", f"{r.mean_steps:.6g}"])
    return path
