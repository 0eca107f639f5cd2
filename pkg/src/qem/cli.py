"""``qem`` command line: one subcommand per experiment.

Exit codes: 0 success, 2 configuration error, 3 numeric failure.
"""
from __future__ import annotations

import argparse
import configparser
import sys
from dataclasses import fields

from .errors import InvalidArgument, NumericFailure
from .experiments import EXPERIMENTS, ExperimentConfig, run_experiment

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3

_FIELD_TYPES = {f.name: f.type for f in fields(ExperimentConfig)}
# config-file sections accepted besides the experiment's own name
_COMMON_SECTIONS = ("common", "train")


class _ConfigError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # one-line diagnostic, exit 2
        raise _ConfigError(message)


def _int_list(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(x) for x in text.split(",") if x.strip())
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from exc


def _optional_float(text: str):
    return None if text.lower() in ("", "none") else float(text)


def _optional_int(text: str):
    return None if text.lower() in ("", "none") else int(text)


_CONVERTERS = {
    "int": int,
    "float": float,
    "str": str,
    "tuple[int, ...]": _int_list,
    "float | None": _optional_float,
    "int | None": _optional_int,
}


def _add_flags(p: argparse.ArgumentParser) -> None:
    a = p.add_argument
    a("--n", type=int, help="qubit count")
    a("--n-list", dest="n_list", type=_int_list, help="comma-separated qubit counts (toy, gradient-scan)")
    a("--depth", type=int, help="circuit depth (student depth for teacher-student)")
    a("--teacher-depth", dest="teacher_depth", type=int, help="teacher circuit depth")
    a("--layers", type=int, help="QAOA layers")
    a("--r-gen", dest="r_gen", type=int, help="generator mixture size")
    a("--r-tar", dest="r_tar", type=int, help="target mixture size (butterfly)")
    a("--trials", type=int, help="independent seeded runs")
    a("--steps", type=int, help="maximum training steps")
    a("--seed", type=int, help="base seed")
    a("--lr", type=float, help="Adam learning rate")
    a("--lr-phase2", dest="lr_phase2", type=_optional_float, help="second-phase learning rate")
    a("--phase2-step", dest="phase2_step", type=int, help="step at which the second phase starts")
    a("--pool-k", dest="pool_k", type=int, help="locality of the initial operator pool")
    a("--pool-size", dest="pool_size", type=_optional_int, help="random subset size of the initial pool")
    a("--cycle-period", dest="cycle_period", type=int, help="steps between operator cycling (0 = off)")
    a("--cycle-thresh", dest="cycle_thresh", type=float, help="cycling threshold P in (0, 1]")
    a("--budget", type=float, help="per-qubit weight budget")
    a("--tol", type=float, help="convergence tolerance on parameter change")
    a("--grad-backend", dest="grad_backend", choices=("adjoint", "shift", "finite-diff"))
    a("--stop-fidelity", dest="stop_fidelity", type=_optional_float, help="stop a run once fidelity exceeds this")
    a("--loss", choices=("both", "em", "fidelity"), help="toy: which loss to run")
    a("--family", choices=("simple", "full"), help="toy: candidate set for the EM estimate")
    a("--out", help="output directory (default $QEM_OUT_DIR or .)")
    a("--jobs", type=int, help="parallel worker processes")
    a("--config", help="key = value file with [common] / [<experiment>] sections")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="qem", description="Quantum earth mover's distance estimator and qWGAN experiments.")
    sub = parser.add_subparsers(dest="experiment", metavar="experiment", parser_class=_Parser)
    sub.required = True
    for name in EXPERIMENTS:
        _add_flags(sub.add_parser(name, help=f"run the {name} experiment"))
    return parser


def read_config_file(path: str, experiment: str) -> dict:
    cp = configparser.ConfigParser()
    try:
        with open(path, encoding="utf-8") as fh:
            cp.read_file(fh)
    except (OSError, configparser.Error) as exc:
        raise _ConfigError(f"config: cannot read {path}: {exc}") from exc
    values = {}
    for section in cp.sections():
        if section not in _COMMON_SECTIONS and section != experiment:
            if section in EXPERIMENTS:
                continue  # settings for a different experiment
            raise _ConfigError(f"config: unknown section [{section}]")
    for section in [s for s in cp.sections() if s in _COMMON_SECTIONS] + [s for s in cp.sections() if s == experiment]:
        for key, raw in cp.items(section):
            name = key.replace("-", "_")
            if name not in _FIELD_TYPES or name == "experiment":
                raise _ConfigError(f"{name}: unknown field in [{section}]")
            try:
                values[name] = _CONVERTERS[_FIELD_TYPES[name]](raw.strip())
            except (ValueError, argparse.ArgumentTypeError) as exc:
                raise _ConfigError(f"{name}: bad value {raw!r}") from exc
    return values


def config_from_args(argv) -> ExperimentConfig:
    ns = build_parser().parse_args(argv)
    opts = vars(ns)
    experiment = opts.pop("experiment")
    config_path = opts.pop("config")
    values = read_config_file(config_path, experiment) if config_path else {}
    values.update({k: v for k, v in opts.items() if v is not None})
    return ExperimentConfig.for_experiment(experiment, **values)


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        cfg = config_from_args(argv)
        cfg.validate()
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    except (_ConfigError, InvalidArgument) as exc:
        print(f"qem: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        paths = run_experiment(cfg)
    except NumericFailure as exc:
        print(f"qem: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except InvalidArgument as exc:
        print(f"qem: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    for p in paths:
        print(p)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
