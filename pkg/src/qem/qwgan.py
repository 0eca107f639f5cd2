"""Generator mixture, Adam, and the alternating LP / gradient training loop."""
from __future__ import annotations

import csv
import json
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .circuit import Circuit, run
from .errors import InvalidArgument, NumericFailure
from .estimator import DEFAULT_BUDGET, OperatorPool, cycle_operators, solve_lp
from .gradients import GRADIENT_BACKENDS
from .pauli import WeightedObservable, enumerate_local
from .states import DENSE_MAX_QUBITS, MixtureState, PureState, QuantumState, fidelity, trace_distance


def softmax(logits: np.ndarray) -> np.ndarray:
    z = np.exp(logits - np.max(logits))
    return z / z.sum()


@dataclass
class GeneratorModel:
    circuits: list[Circuit]
    thetas: list[np.ndarray]
    logits: np.ndarray

    def __post_init__(self):
        if not self.circuits:
            raise InvalidArgument("generator needs at least one circuit")
        if len(self.thetas) != len(self.circuits):
            raise InvalidArgument("one parameter vector per circuit is required")
        self.logits = np.asarray(self.logits, dtype=float).reshape(-1)
        if self.logits.size != len(self.circuits):
            raise InvalidArgument("one logit per circuit is required")
        n = self.circuits[0].n
        self.thetas = [np.asarray(t, dtype=float).copy() for t in self.thetas]
        for c, t in zip(self.circuits, self.thetas):
            if c.n != n:
                raise InvalidArgument("generator circuits differ in qubit count")
            if t.shape != (c.param_count,):
                raise InvalidArgument(f"circuit {c.name!r} takes {c.param_count} params, got {t.shape}")

    @classmethod
    def random(cls, circuit: Circuit, r: int, rng: np.random.Generator) -> GeneratorModel:
        """r copies of ``circuit`` with i.i.d. standard normal parameters, uniform mixture."""
        if r < 1:
            raise InvalidArgument("r must be >= 1")
        return cls([circuit] * r, [rng.standard_normal(circuit.param_count) for _ in range(r)], np.zeros(r))

    @property
    def n(self) -> int:
        return self.circuits[0].n

    @property
    def r(self) -> int:
        return len(self.circuits)

    @property
    def probs(self) -> np.ndarray:
        return softmax(self.logits)

    def flat(self) -> np.ndarray:
        return np.concatenate(self.thetas + [self.logits])

    def set_flat(self, vec: np.ndarray) -> None:
        off = 0
        for i, c in enumerate(self.circuits):
            self.thetas[i] = vec[off : off + c.param_count].copy()
            off += c.param_count
        self.logits = vec[off:].copy()


def generator_state(model: GeneratorModel) -> MixtureState:
    branches = tuple((float(p), run(c, t)) for p, c, t in zip(model.probs, model.circuits, model.thetas))
    return MixtureState(branches)


def loss_and_grads(
    model: GeneratorModel, h_max: WeightedObservable, backend: str = "adjoint"
) -> tuple[float, list[np.ndarray], np.ndarray]:
    """Tr[G(theta) h_max] with gradients for every branch and the logits."""
    grad_fn = GRADIENT_BACKENDS[backend]
    p = model.probs
    e = np.empty(model.r)
    g_theta = []
    for i, (c, t) in enumerate(zip(model.circuits, model.thetas)):
        e[i] = h_max.expectation(run(c, t)) if len(h_max) else 0.0
        g = grad_fn(c, t, h_max) if len(h_max) else np.zeros(c.param_count)
        g_theta.append(p[i] * np.asarray(g))
    loss = float(p @ e)
    g_logits = p * (e - loss)
    return loss, g_theta, g_logits


# -- Adam ----------------------------------------------------------------------

@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def zeros(cls, size: int, **kw) -> AdamState:
        return cls(np.zeros(size), np.zeros(size), **kw)


def adam_step(params: np.ndarray, grads: np.ndarray, state: AdamState, lr: float) -> tuple[np.ndarray, AdamState]:
    params = np.asarray(params, dtype=float)
    grads = np.asarray(grads, dtype=float)
    if params.shape != grads.shape or params.shape != state.m.shape:
        raise InvalidArgument(f"shape mismatch: params {params.shape}, grads {grads.shape}, state {state.m.shape}")
    t = state.t + 1
    m = state.beta1 * state.m + (1 - state.beta1) * grads
    v = state.beta2 * state.v + (1 - state.beta2) * grads**2
    mhat = m / (1 - state.beta1**t)
    vhat = v / (1 - state.beta2**t)
    new = params - lr * mhat / (np.sqrt(vhat) + state.eps)
    return new, AdamState(m, v, t, state.beta1, state.beta2, state.eps)


# -- training ------------------------------------------------------------------

@dataclass
class TrainConfig:
    pool_k: int = 2
    pool_size: int | None = None  # random subset of the k-local pool when set
    budget: float = DEFAULT_BUDGET
    lr: float = 0.01
    lr_phase2: float | None = None  # e.g. 0.02 then 0.007
    phase2_step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    steps: int = 1000
    tol: float = 1e-6
    window: int = 10
    cycle: bool = True
    cycle_period: int = 10
    cycle_thresh: float = 0.8
    seed: int = 0
    grad_backend: str = "adjoint"
    stop_fidelity: float | None = None  # optional early exit once fidelity passes this

    def validate(self) -> None:
        if self.steps < 1:
            raise InvalidArgument("steps must be >= 1")
        for name in ("tol", "lr", "budget", "eps"):
            if getattr(self, name) <= 0:
                raise InvalidArgument(f"{name} must be positive")
        if self.lr_phase2 is not None and self.lr_phase2 <= 0:
            raise InvalidArgument("lr_phase2 must be positive")
        if self.window < 1:
            raise InvalidArgument("window must be >= 1")
        if self.pool_k < 1:
            raise InvalidArgument("pool_k must be >= 1")
        if self.pool_size is not None and self.pool_size < 1:
            raise InvalidArgument("pool_size must be >= 1")
        if self.cycle and self.cycle_period < 1:
            raise InvalidArgument("cycle_period must be >= 1")
        if not 0 < self.cycle_thresh <= 1:
            raise InvalidArgument("cycle_thresh must lie in (0, 1]")
        if self.grad_backend not in GRADIENT_BACKENDS:
            raise InvalidArgument(f"grad_backend must be one of {sorted(GRADIENT_BACKENDS)}")

    def lr_at(self, step: int) -> float:
        if self.lr_phase2 is not None and step >= self.phase2_step:
            return self.lr_phase2
        return self.lr


@dataclass
class StepRecord:
    step: int
    em_value: float
    fidelity: float
    trace_distance: float
    n_active: int
    grad_l1: float
    elapsed_ms: float


HISTORY_COLUMNS = ["step", "em_value", "em_value_norm", "fidelity", "trace_distance", "n_active", "grad_l1", "elapsed_ms"]


@dataclass
class TrainHistory:
    n: int
    records: list[StepRecord] = field(default_factory=list)
    stop_reason: str = ""
    final_params: np.ndarray | None = None

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records])

    def first_crossing(self, name: str, threshold: float, above: bool = True) -> int | None:
        """First step whose ``name`` value is beyond ``threshold``."""
        for r in self.records:
            v = getattr(r, name)
            if (v > threshold) if above else (v < threshold):
                return r.step
        return None

    def write_csv(self, path: Path, include_timing: bool = True) -> Path:
        cols = HISTORY_COLUMNS if include_timing else HISTORY_COLUMNS[:-1]
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(cols)
            for r in self.records:
                row = [r.step, _fmt(r.em_value), _fmt(r.em_value / self.n), _fmt(r.fidelity), _fmt(r.trace_distance), r.n_active, _fmt(r.grad_l1)]
                if include_timing:
                    row.append(f"{r.elapsed_ms:.3f}")
                w.writerow(row)
        return path


def _fmt(x: float) -> str:
    return "nan" if not np.isfinite(x) else f"{x:.12g}"


class TrainingAborted(NumericFailure):
    def __init__(self, message: str, history: TrainHistory):
        super().__init__(message)
        self.history = history


def initial_pool(n: int, config: TrainConfig, rng: np.random.Generator) -> OperatorPool:
    ops = enumerate_local(n, min(config.pool_k, n))
    if config.pool_size is not None and config.pool_size < len(ops):
        keep = np.sort(rng.choice(len(ops), size=config.pool_size, replace=False))
        ops = [ops[j] for j in keep]
    return OperatorPool(ops, n)


def _monitors(gen: MixtureState, target: QuantumState) -> tuple[float, float]:
    gen_q: QuantumState = gen.branches[0][1] if len(gen.branches) == 1 else gen
    if isinstance(gen_q, PureState) or gen.n <= DENSE_MAX_QUBITS:
        return fidelity(gen_q, target), trace_distance(gen_q, target)
    return float("nan"), float("nan")


def train(model: GeneratorModel, target: QuantumState, config: TrainConfig) -> TrainHistory:
    """Alternate an exact LP discriminator with one Adam step on the generator.

    Mutates ``model`` in place; the returned history holds one record per step.
    """
    config.validate()
    if target.n != model.n:
        raise InvalidArgument(f"target has {target.n} qubits, generator {model.n}")
    rng = np.random.default_rng([config.seed, 7919])
    pool = initial_pool(model.n, config, rng)
    tgt_exp = pool.table.expectations(target)
    hist = TrainHistory(model.n)
    params = model.flat()
    adam = AdamState.zeros(params.size, beta1=config.beta1, beta2=config.beta2, eps=config.eps)
    recent: list[float] = []
    t0 = time.perf_counter()
    for step in range(config.steps):
        gen = generator_state(model)
        c = pool.table.expectations(gen) - tgt_exp
        sol = solve_lp(c, pool, config.budget)
        h_max = WeightedObservable(model.n, sol.w_star)
        if config.cycle and step > 0 and step % config.cycle_period == 0:
            new_pool = cycle_operators(pool, sol, c, config.cycle_thresh, rng)
            if new_pool is not pool:
                pool = new_pool
                tgt_exp = pool.table.expectations(target)
        fid, td = _monitors(gen, target)

        loss, g_theta, g_logits = loss_and_grads(model, h_max, config.grad_backend)
        grad = np.concatenate(g_theta + [g_logits])
        rec = StepRecord(step, sol.value, fid, td, sol.n_active, float(np.abs(grad).sum()), 0.0)
        if not (np.isfinite(sol.value) and np.isfinite(loss) and np.all(np.isfinite(grad))):
            hist.records.append(rec)
            hist.stop_reason = "non-finite"
            hist.final_params = params.copy()
            raise TrainingAborted(f"non-finite loss or gradient at step {step}", hist)

        if sol.value <= 1e-12:
            rec.elapsed_ms = (time.perf_counter() - t0) * 1e3
            hist.records.append(rec)
            hist.stop_reason = "zero-distance"
            break
        new, adam = adam_step(params, grad, adam, config.lr_at(step))
        recent.append(float(np.max(np.abs(new - params))))
        params = new
        model.set_flat(params)
        rec.elapsed_ms = (time.perf_counter() - t0) * 1e3
        hist.records.append(rec)

        if config.stop_fidelity is not None and fid > config.stop_fidelity:
            hist.stop_reason = "fidelity-reached"
            break
        if len(recent) >= config.window and max(recent[-config.window :]) < config.tol:
            hist.stop_reason = "converged"
            break
    else:
        hist.stop_reason = "max-steps"
    hist.final_params = params.copy()
    return hist


def run_metadata(config: TrainConfig, extra: dict | None = None) -> dict:
    meta = {
        "version": f"qem-{__version__}",
        "created": time.strftime("%Y-%m-%dT%H:%M:%S"),
        "config": asdict(config),
    }
    if extra:
        meta.update(extra)
    return meta


def write_metadata(path: Path, meta: dict) -> Path:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True, default=_json_default)
    return path


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.integer, np.floating)):
        return obj.item()
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def percentile_summary(histories: Sequence[TrainHistory], name: str, qs=(10, 25, 50, 75, 90)) -> np.ndarray:
    """Per-step percentiles over runs; finished runs are held at their last value."""
    length = max(len(h.records) for h in histories)
    mat = np.empty((len(histories), length))
    for i, h in enumerate(histories):
        col = h.column(name)
        mat[i, : col.size] = col
        mat[i, col.size :] = col[-1]
    return np.percentile(mat, qs, axis=0).T
