"""Experiment drivers: each turns an ExperimentConfig into a set of CSV and
JSON files in the output directory."""
from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Callable

import numpy as np

from .circuit import butterfly_circuit, ghz_circuit, mixing_circuit, qaoa_circuit, run, run_amplitudes
from .errors import InvalidArgument
from .estimator import OperatorPool, classical_em_hamming, diagonal_distribution, em_estimate, local_pool_with, solve_lp
from .gradients import ProjectorLoss, adjoint_gradient
from .pauli import WeightedObservable
from .qwgan import GeneratorModel, TrainConfig, TrainHistory, percentile_summary, run_metadata, train, write_metadata
from .states import MixtureState, PureState, QuantumState, ghz_state, trace_distance
from .toy import psi_k_theta, toy_amplitudes, compact_to_full, toy_em_estimate, toy_operators, toy_success_experiment, write_toy_csv

EXPERIMENTS = ("ghz", "teacher-student", "gradient-scan", "butterfly", "qaoa", "toy", "distance-probe")
PERCENTILES = (10, 25, 50, 75, 90)

# per-experiment defaults that differ from ExperimentConfig's
DEFAULTS: dict[str, dict] = {
    "ghz": {"n": 8, "trials": 10, "steps": 1500, "cycle_period": 5},
    "teacher-student": {"n": 8, "depth": 4, "teacher_depth": 2, "trials": 10, "steps": 2000, "cycle_period": 0},
    "gradient-scan": {"n_list": (4, 6, 8, 10, 12), "depth": 2, "trials": 25},
    "butterfly": {"n": 4, "depth": 1, "trials": 10, "steps": 4000},
    "qaoa": {"n": 6, "layers": 4, "trials": 10, "steps": 1000},
    "toy": {"n_list": (4, 8, 12, 16, 20, 24), "trials": 50},
    "distance-probe": {"n": 4, "trials": 20},
}


@dataclass
class ExperimentConfig:
    experiment: str
    n: int = 4
    n_list: tuple[int, ...] = ()
    depth: int = 1
    teacher_depth: int = 2
    layers: int = 4
    r_gen: int = 1
    r_tar: int = 1
    trials: int = 10
    seed: int = 0
    out: str = ""
    jobs: int = 1
    loss: str = "both"  # toy only
    family: str = "simple"  # toy only
    # training
    steps: int = 1000
    lr: float = 0.01
    lr_phase2: float | None = None
    phase2_step: int = 0
    pool_k: int = 2
    pool_size: int | None = None
    budget: float = 0.5
    tol: float = 1e-6
    cycle_period: int = 10  # 0 disables cycling
    cycle_thresh: float = 0.8
    grad_backend: str = "adjoint"
    stop_fidelity: float | None = None

    @classmethod
    def for_experiment(cls, experiment: str, **overrides) -> ExperimentConfig:
        if experiment not in EXPERIMENTS:
            raise InvalidArgument(f"experiment: unknown experiment {experiment!r}")
        values = dict(DEFAULTS[experiment])
        values.update({k: v for k, v in overrides.items() if v is not None})
        known = {f.name for f in fields(cls)}
        for k in values:
            if k not in known:
                raise InvalidArgument(f"{k}: unknown field")
        return cls(experiment=experiment, **values)

    def train_config(self, seed: int) -> TrainConfig:
        return TrainConfig(
            pool_k=self.pool_k,
            pool_size=self.pool_size,
            budget=self.budget,
            lr=self.lr,
            lr_phase2=self.lr_phase2,
            phase2_step=self.phase2_step,
            steps=self.steps,
            tol=self.tol,
            cycle=self.cycle_period > 0,
            cycle_period=max(self.cycle_period, 1),
            cycle_thresh=self.cycle_thresh,
            seed=seed,
            grad_backend=self.grad_backend,
            stop_fidelity=self.stop_fidelity,
        )

    def out_dir(self) -> Path:
        path = Path(self.out or os.environ.get("QEM_OUT_DIR") or ".")
        path.mkdir(parents=True, exist_ok=True)
        return path

    def validate(self) -> None:
        e = self.experiment
        if e not in EXPERIMENTS:
            raise InvalidArgument(f"experiment: unknown experiment {e!r}")

        def need(cond: bool, name: str, msg: str) -> None:
            if not cond:
                raise InvalidArgument(f"{name}: {msg}")

        need(self.trials >= 1, "trials", "must be >= 1")
        need(self.jobs >= 1, "jobs", "must be >= 1")
        need(self.cycle_period >= 0, "cycle_period", "must be >= 0")
        if e in ("ghz", "teacher-student", "butterfly", "qaoa", "distance-probe"):
            need(self.n >= 2, "n", "must be >= 2")
        if e in ("ghz", "teacher-student", "butterfly", "qaoa"):
            need(self.n <= 12, "n", "training runs support at most 12 qubits")
            need(self.r_gen >= 1, "r_gen", "must be >= 1")
            need(self.depth >= 1, "depth", "must be >= 1")
            self.train_config(self.seed).validate()
        if e == "teacher-student":
            need(self.teacher_depth >= 1, "teacher_depth", "must be >= 1")
        if e == "butterfly":
            need(self.n & (self.n - 1) == 0, "n", "butterfly needs a power of two")
            need(self.r_tar >= 1, "r_tar", "must be >= 1")
        if e == "qaoa":
            need(self.n % 2 == 0, "n", "qaoa target needs even n")
            need(self.layers >= 1, "layers", "must be >= 1")
        if e == "distance-probe":
            need(self.n <= 6, "n", "distance-probe dense checks support at most 6 qubits")
        if e in ("gradient-scan", "toy"):
            need(len(self.n_list) > 0, "n_list", "must be non-empty")
            need(all(k >= 2 for k in self.n_list), "n_list", "entries must be >= 2")
        if e == "gradient-scan":
            need(max(self.n_list) <= 14, "n_list", "gradient-scan supports at most 14 qubits")
            need(self.depth >= 1, "depth", "must be >= 1")
        if e == "toy":
            need(self.loss in ("both", "em", "fidelity"), "loss", "must be em, fidelity or both")
            need(self.family in ("simple", "full"), "family", "must be simple or full")


def _rng(cfg: ExperimentConfig, trial: int, tag: int) -> np.random.Generator:
    return np.random.default_rng([cfg.seed, tag, trial])


# -- training experiments -----------------------------------------------------

def _ghz_job(cfg: ExperimentConfig, trial: int) -> TrainHistory:
    rng = _rng(cfg, trial, 1)
    model = GeneratorModel.random(ghz_circuit(cfg.n), cfg.r_gen, rng)
    return train(model, ghz_state(cfg.n), cfg.train_config(cfg.seed * 100003 + trial))


def _teacher_job(cfg: ExperimentConfig, trial: int) -> TrainHistory:
    rng = _rng(cfg, trial, 2)
    teacher = mixing_circuit(cfg.n, cfg.teacher_depth)
    target = run(teacher, rng.standard_normal(teacher.param_count))
    model = GeneratorModel.random(mixing_circuit(cfg.n, cfg.depth), cfg.r_gen, rng)
    return train(model, target, cfg.train_config(cfg.seed * 100003 + trial))


def butterfly_target(n: int, depth: int, r_tar: int, rng: np.random.Generator) -> QuantumState:
    """Uniform mixture of r_tar butterfly states with angles uniform on [0, 2pi)."""
    circ = butterfly_circuit(n, depth)
    states = [run(circ, rng.uniform(0.0, 2 * math.pi, circ.param_count)) for _ in range(r_tar)]
    if r_tar == 1:
        return states[0]
    return MixtureState.from_lists([1.0 / r_tar] * r_tar, states)


def _butterfly_job(cfg: ExperimentConfig, trial: int) -> TrainHistory:
    rng = _rng(cfg, trial, 3)
    target = butterfly_target(cfg.n, cfg.depth, cfg.r_tar, rng)
    model = GeneratorModel.random(butterfly_circuit(cfg.n, cfg.depth), cfg.r_gen, rng)
    return train(model, target, cfg.train_config(cfg.seed * 100003 + trial))


def qaoa_target(n: int) -> PureState:
    """(|01...01> + |10...10>) / sqrt 2."""
    amps = np.zeros(2**n, dtype=complex)
    amps[int("01" * (n // 2), 2)] = amps[int("10" * (n // 2), 2)] = 1 / math.sqrt(2)
    return PureState(amps)


def _qaoa_job(cfg: ExperimentConfig, trial: int) -> TrainHistory:
    rng = _rng(cfg, trial, 4)
    model = GeneratorModel.random(qaoa_circuit(cfg.n, cfg.layers), cfg.r_gen, rng)
    return train(model, qaoa_target(cfg.n), cfg.train_config(cfg.seed * 100003 + trial))


TRAIN_JOBS: dict[str, Callable] = {
    "ghz": _ghz_job,
    "teacher-student": _teacher_job,
    "butterfly": _butterfly_job,
    "qaoa": _qaoa_job,
}


def _call(args):
    job, cfg, trial = args
    return job(cfg, trial)


def run_trials(cfg: ExperimentConfig) -> list[TrainHistory]:
    job = TRAIN_JOBS[cfg.experiment]
    work = [(job, cfg, t) for t in range(cfg.trials)]
    if cfg.jobs == 1:
        return [_call(w) for w in work]
    with ProcessPoolExecutor(max_workers=cfg.jobs) as ex:
        return list(ex.map(_call, work))


def _slug(name: str) -> str:
    return name.replace("-", "_")


def write_training_outputs(cfg: ExperimentConfig, histories: list[TrainHistory]) -> list[Path]:
    out = cfg.out_dir()
    stem = _slug(cfg.experiment)
    paths = []
    for t, h in enumerate(histories):
        paths.append(h.write_csv(out / f"{stem}_history_{t:03d}.csv"))

    summary = out / f"{stem}_summary.csv"
    cols = {"em_value_norm": None, "fidelity": None, "trace_distance": None}
    for name in ("fidelity", "trace_distance"):
        cols[name] = percentile_summary(histories, name, PERCENTILES)
    norm_hist = [_normed(h) for h in histories]
    cols["em_value_norm"] = percentile_summary(norm_hist, "em_value", PERCENTILES)
    with open(summary, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["step"] + [f"{name}_p{q}" for name in cols for q in PERCENTILES])
        for step in range(cols["fidelity"].shape[0]):
            w.writerow([step] + [f"{v:.12g}" for name in cols for v in cols[name][step]])
    paths.append(summary)

    runs = out / f"{stem}_runs.csv"
    with open(runs, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["trial", "steps", "stop_reason", "final_fidelity", "final_trace_distance", "final_em_value", "fidelity_098_step", "fidelity_09_step"])
        for t, h in enumerate(histories):
            last = h.records[-1]
            cross98 = h.first_crossing("fidelity", 0.98)
            cross9 = h.first_crossing("fidelity", 0.9)
            w.writerow([t, len(h.records), h.stop_reason, f"{last.fidelity:.12g}", f"{last.trace_distance:.12g}", f"{last.em_value:.12g}",
                        "" if cross98 is None else cross98, "" if cross9 is None else cross9])
    paths.append(runs)
    paths.append(write_metadata(out / f"{stem}_meta.json", run_metadata(cfg.train_config(cfg.seed), {"experiment": asdict(cfg)})))
    return paths


def _normed(h: TrainHistory) -> TrainHistory:
    recs = [replace(r, em_value=r.em_value / h.n) for r in h.records]
    return TrainHistory(h.n, recs, h.stop_reason)


# -- gradient scan --------------------------------------------------------------

@dataclass
class GradientStats:
    n: int
    loss: str
    l1: list[float] = field(default_factory=list)
    l2: list[float] = field(default_factory=list)
    first: list[float] = field(default_factory=list)

    def add(self, g: np.ndarray) -> None:
        self.l1.append(float(np.abs(g).sum()) / self.n)
        self.l2.append(float(np.linalg.norm(g)) / math.sqrt(self.n))
        self.first.append(float(abs(g[0])))


def gradient_scan(n_list, depth: int, trials: int, seed: int, pool_k: int = 2, budget: float = 0.5) -> list[GradientStats]:
    """Step-0 gradients of the fidelity loss and of the frozen-H_max EM loss
    for a mixing-circuit student learning a same-shape random teacher."""
    out = []
    for n in n_list:
        circ = mixing_circuit(n, depth)
        pool = OperatorPool.local(n, min(pool_k, n))
        fid, em = GradientStats(n, "fidelity"), GradientStats(n, "em")
        for t in range(trials):
            rng = np.random.default_rng([seed, 5, n, t])
            tgt = run_amplitudes(circ, rng.standard_normal(circ.param_count))
            theta = rng.standard_normal(circ.param_count)
            psi = run_amplitudes(circ, theta)
            fid.add(adjoint_gradient(circ, theta, ProjectorLoss(tgt)))
            c = pool.table.expectations(PureState(psi)) - pool.table.expectations(PureState(tgt))
            sol = solve_lp(c, pool, budget)
            em.add(adjoint_gradient(circ, theta, WeightedObservable(n, sol.w_star)))
        out.extend([fid, em])
    return out


def write_gradient_scan(stats: list[GradientStats], path: Path) -> Path:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["n", "loss", "trials", "l1_over_n", "l2_over_sqrt_n", "abs_grad_theta1"])
        for s in stats:
            w.writerow([s.n, s.loss, len(s.l1), f"{np.mean(s.l1):.12g}", f"{np.mean(s.l2):.12g}", f"{np.mean(s.first):.12g}"])
    return path


# -- distance probe ---------------------------------------------------------------

def _random_pure(n: int, rng: np.random.Generator) -> PureState:
    v = rng.standard_normal(2**n) + 1j * rng.standard_normal(2**n)
    return PureState(v / np.linalg.norm(v))


def distance_probe(n: int, trials: int, seed: int, budget: float = 0.5) -> list[dict]:
    """Estimator values at k = 1..min(3, n) next to the trace distance on
    random pure pairs, and against the transport oracle on basis-state mixtures."""
    rows = []
    pools = {k: OperatorPool.local(n, k) for k in range(1, min(3, n) + 1)}
    for t in range(trials):
        rng = np.random.default_rng([seed, 6, n, t])
        a, b = _random_pure(n, rng), _random_pure(n, rng)
        row = {"kind": "random-pure", "trial": t, "trace_distance": trace_distance(a, b), "classical_em": ""}
        for k, pool in pools.items():
            row[f"d{k}"] = em_estimate(a, b, pool, budget)[0]
        rows.append(row)
    if n <= 4:
        for t in range(trials):
            rng = np.random.default_rng([seed, 7, n, t])
            p, q = rng.dirichlet(np.ones(2**n)), rng.dirichlet(np.ones(2**n))
            a, b = _diag_state(p), _diag_state(q)
            row = {"kind": "diagonal", "trial": t, "trace_distance": trace_distance(a, b),
                   "classical_em": classical_em_hamming(diagonal_distribution(a), diagonal_distribution(b))}
            for k, pool in pools.items():
                row[f"d{k}"] = em_estimate(a, b, pool, budget)[0]
            rows.append(row)
    return rows


def _diag_state(p: np.ndarray) -> MixtureState:
    n = p.size.bit_length() - 1
    idx = [i for i in range(p.size) if p[i] > 0]
    return MixtureState.from_lists([p[i] for i in idx], [PureState.basis(n, i) for i in idx])


def ghz_sequence(n: int, budget: float = 0.5) -> list[dict]:
    """D-tilde along |Psi_k> (GHZ on the first k qubits) for both candidate
    families, plus the LP estimate over the 2-local pool extended by the toy operators."""
    pool = local_pool_with(n, 2, toy_operators(n)) if n <= 10 else None
    ghz = ghz_state(n)
    rows = []
    for k in range(n + 1):
        theta = psi_k_theta(n, k)
        row = {"k": k, "toy_full": toy_em_estimate(theta, family="full"), "toy_simple": toy_em_estimate(theta, family="simple"), "lp_2local": ""}
        if pool is not None:
            psi = PureState(compact_to_full(toy_amplitudes(theta)))
            row["lp_2local"] = em_estimate(psi, ghz, pool, budget)[0]
        rows.append(row)
    return rows


def _write_rows(rows: list[dict], path: Path) -> Path:
    keys: list[str] = []
    for r in rows:
        keys += [k for k in r if k not in keys]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(keys)
        for r in rows:
            w.writerow([_cell(r.get(k, "")) for k in keys])
    return path


def _cell(v) -> str:
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.12g}"
    return str(v)


# -- dispatch -------------------------------------------------------------------

def run_experiment(cfg: ExperimentConfig) -> list[Path]:
    cfg.validate()
    out = cfg.out_dir()
    e = cfg.experiment
    if e in TRAIN_JOBS:
        return write_training_outputs(cfg, run_trials(cfg))
    meta = run_metadata(cfg.train_config(cfg.seed), {"experiment": asdict(cfg)})
    stem = _slug(e)
    if e == "gradient-scan":
        paths = [write_gradient_scan(gradient_scan(cfg.n_list, cfg.depth, cfg.trials, cfg.seed, cfg.pool_k, cfg.budget), out / "gradient_scan.csv")]
    elif e == "toy":
        losses = ("em", "fidelity") if cfg.loss == "both" else (cfg.loss,)
        results = []
        for loss in losses:
            results += toy_success_experiment(cfg.n_list, cfg.trials, loss, seed=cfg.seed, family=cfg.family)
        paths = [write_toy_csv(results, out / "toy_success.csv")]
    elif e == "distance-probe":
        paths = [
            _write_rows(distance_probe(cfg.n, cfg.trials, cfg.seed, cfg.budget), out / "distance_probe.csv"),
            _write_rows(ghz_sequence(cfg.n, cfg.budget), out / "ghz_sequence.csv"),
        ]
    else:  # pragma: no cover - validate() guards this
        raise InvalidArgument(f"experiment: {e!r}")
    paths.append(write_metadata(out / f"{stem}_meta.json", meta))
    return paths
