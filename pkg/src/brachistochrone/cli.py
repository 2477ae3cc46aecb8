"""Command-line front end.

    brachistochrone --config problem.json [--output PREFIX] [--seed N]
                    [--steps N] [--max-l L]

The config is a JSON object with ``"schema": 1``. Exit status is 0 on
success (including a failing verification verdict), 1 for config errors
and 2 for solver errors.
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import io
from .errors import BrachistochroneError
from .general import ShootingOptions, ShootingParameters, shoot, verify_optimality
from .hilbert import ConstraintSet, hermitian, pure_state
from .isotropic import TrivialSolution, evolved_trajectory, solve_isotropic
from .propagator import Trajectory
from .qubit import (
    ANTIPODE_STATE,
    bloch_trajectory,
    count_nodes,
    enumerate_families,
    frame_rotation,
    global_optimum,
    qubit_trajectory,
)

SCHEMA_VERSION = 1
SOLVERS = ("isotropic", "qubit", "shoot", "verify")


class ConfigError(ValueError):
    def __init__(self, field_name: str, message: str):
        super().__init__(f"config field '{field_name}': {message}")
        self.field = field_name


@dataclass(frozen=True)
class ProblemConfig:
    solver: str
    dimension: int
    omega: float
    psi_i: np.ndarray | None = None
    psi_f: np.ndarray | None = None
    forbidden: tuple[np.ndarray, ...] = ()
    steps: int = 2000
    seed: int = 0
    output: str = "brachistochrone"
    max_l: int = 3
    trajectory: str | None = None
    restarts: int = 32
    seed_params: ShootingParameters | None = None

    @property
    def constraints(self) -> ConstraintSet:
        return ConstraintSet(self.omega, self.forbidden)


def _complex(value, name):
    if isinstance(value, (int, float)):
        return complex(value)
    if isinstance(value, (list, tuple)) and len(value) == 2 and all(
        isinstance(v, (int, float)) for v in value
    ):
        return complex(value[0], value[1])
    raise ConfigError(name, "complex entries must be numbers or [re, im] pairs")


def _vector(value, name, dim):
    if not isinstance(value, list) or len(value) != dim:
        raise ConfigError(name, f"expected a list of {dim} amplitudes")
    vec = np.array([_complex(v, name) for v in value])
    if np.linalg.norm(vec) < 1e-12:
        raise ConfigError(name, "state cannot be normalized")
    return np.asarray(pure_state(vec))


def _matrix(value, name, dim):
    if not isinstance(value, list) or len(value) != dim or any(
        not isinstance(row, list) or len(row) != dim for row in value
    ):
        raise ConfigError(name, f"expected a {dim}x{dim} matrix")
    m = np.array([[_complex(v, name) for v in row] for row in value])
    try:
        return np.asarray(hermitian(m))
    except ValueError as exc:
        raise ConfigError(name, str(exc)) from None


def _int(raw, name, default, minimum):
    value = raw.get(name, default)
    if isinstance(value, bool) or not isinstance(value, int) or value < minimum:
        raise ConfigError(name, f"expected an integer >= {minimum}")
    return value


def parse_config(raw: dict) -> ProblemConfig:
    """Validate a decoded JSON config; raises :class:`ConfigError` naming the bad field."""
    if not isinstance(raw, dict):
        raise ConfigError("<root>", "config must be a JSON object")
    if raw.get("schema") != SCHEMA_VERSION:
        raise ConfigError("schema", f"expected {SCHEMA_VERSION}")
    solver = raw.get("solver")
    if solver not in SOLVERS:
        raise ConfigError("solver", f"expected one of {', '.join(SOLVERS)}")
    dim = _int(raw, "dimension", 2, 2)
    omega = raw.get("omega", 1.0)
    if isinstance(omega, bool) or not isinstance(omega, (int, float)) or not omega > 0:
        raise ConfigError("omega", "expected a positive number")
    psi_i = _vector(raw["psi_i"], "psi_i", dim) if "psi_i" in raw else None
    psi_f = _vector(raw["psi_f"], "psi_f", dim) if "psi_f" in raw else None
    forbidden_raw = raw.get("forbidden", [])
    if not isinstance(forbidden_raw, list):
        raise ConfigError("forbidden", "expected a list of matrices")
    forbidden = tuple(
        _matrix(m, f"forbidden[{a}]", dim) for a, m in enumerate(forbidden_raw)
    )
    for a, m in enumerate(forbidden):
        if abs(np.trace(m)) > 1e-12:
            raise ConfigError(f"forbidden[{a}]", "constraint directions must be traceless")
    if solver in ("isotropic", "shoot") and (psi_i is None or psi_f is None):
        missing = "psi_i" if psi_i is None else "psi_f"
        raise ConfigError(missing, f"required by solver '{solver}'")
    if solver == "qubit" and dim != 2:
        raise ConfigError("dimension", "the qubit solver requires dimension 2")
    trajectory = raw.get("trajectory")
    if solver == "verify" and not isinstance(trajectory, str):
        raise ConfigError("trajectory", "verify needs a trajectory file path")
    output = raw.get("output", "brachistochrone")
    if not isinstance(output, str) or not output:
        raise ConfigError("output", "expected a non-empty path prefix")
    seed_params = None
    if "seed_params" in raw:
        sp = raw["seed_params"]
        try:
            seed_params = ShootingParameters(
                np.array(sp["lambda_ratios"], dtype=np.float64),
                _matrix(sp["h0"], "seed_params.h0", dim),
                float(sp["T"]),
            )
        except (KeyError, TypeError) as exc:
            raise ConfigError("seed_params", f"malformed ({exc})") from None
    try:
        ConstraintSet(float(omega), forbidden)
    except ValueError as exc:
        raise ConfigError("forbidden", str(exc)) from None
    return ProblemConfig(
        solver=solver,
        dimension=dim,
        omega=float(omega),
        psi_i=psi_i,
        psi_f=psi_f,
        forbidden=forbidden,
        steps=_int(raw, "steps", 2000, 2),
        seed=_int(raw, "seed", 0, 0),
        output=output,
        max_l=_int(raw, "max_l", 3, 1),
        trajectory=trajectory,
        restarts=_int(raw, "restarts", 32, 1),
        seed_params=seed_params,
    )


def load_config(path) -> ProblemConfig:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError("--config", f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError("--config", f"invalid JSON ({exc.msg} at line {exc.lineno})") from None
    return parse_config(raw)


def _prefix(config: ProblemConfig) -> Path:
    prefix = Path(config.output)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    return prefix


def _write_trajectory(traj, prefix: Path) -> None:
    io.trajectory_to_csv(traj, f"{prefix}_trajectory.csv")
    io.trajectory_to_json(traj, f"{prefix}_trajectory.json")
    if traj.n == 2:
        io.bloch_to_csv(io.bloch_from_trajectory(traj), f"{prefix}_bloch.csv")


def _infidelity(psi, target) -> float:
    resid = psi - target * np.vdot(target, psi)
    return float(np.vdot(resid, resid).real)


def emit_figure_data(config: ProblemConfig) -> list[Path]:
    """Write Bloch CSV/JSON and trajectory JSON for every family up to ``max_l``."""
    if config.dimension != 2:
        raise ConfigError("dimension", "figure data is only defined for a qubit")
    prefix = _prefix(config)
    written = []
    for fam in enumerate_families(config.omega, config.max_l):
        stem = f"{prefix}_k{fam.k}_l{fam.l}"
        bt = bloch_trajectory(fam, config.steps + 1)
        io.bloch_to_csv(bt, f"{stem}_bloch.csv")
        io.bloch_to_json(bt, f"{stem}_bloch.json")
        io.trajectory_to_json(qubit_trajectory(fam, config.steps), f"{stem}_trajectory.json")
        written += [Path(f"{stem}_bloch.csv"), Path(f"{stem}_bloch.json"), Path(f"{stem}_trajectory.json")]
    return written


def _run_isotropic(config: ProblemConfig, out) -> None:
    sol = solve_isotropic(config.psi_i, config.psi_f, config.omega)
    if isinstance(sol, TrivialSolution):
        print(f"solver=isotropic T={sol.T!r} infidelity=0.0 verdict=trivial", file=out)
        return
    traj = evolved_trajectory(sol, config.steps)
    _write_trajectory(traj, _prefix(config))
    infid = _infidelity(traj.states[-1], config.psi_f)
    print(f"solver=isotropic T={sol.T!r} infidelity={infid:.3e} verdict=n/a", file=out)


def _run_qubit(config: ProblemConfig, out) -> None:
    families = enumerate_families(config.omega, config.max_l)
    print("k l |omega|T |Omega/omega| nodes", file=out)
    for fam in families:
        nodes = count_nodes(bloch_trajectory(fam, 256 * (fam.l + 1)))
        print(
            f"{fam.k} {fam.l} {fam.omega * fam.T!r} {abs(fam.Omega) / fam.omega!r} {nodes}",
            file=out,
        )
    emit_figure_data(config)
    target = config.psi_f if config.psi_f is not None else ANTIPODE_STATE
    best = global_optimum(families, target, config.psi_i)
    traj = qubit_trajectory(best, config.steps)
    if config.psi_i is not None:
        r = frame_rotation(config.psi_i)
        traj = Trajectory(traj.dt, traj.times, traj.states @ r.T,
                          r @ traj.hamiltonians @ r.conj().T)
    _write_trajectory(traj, _prefix(config))
    infid = _infidelity(traj.states[-1], target)
    print(
        f"solver=qubit k={best.k} l={best.l} T={best.duration!r} infidelity={infid:.3e} verdict=n/a",
        file=out,
    )


def _run_shoot(config: ProblemConfig, out) -> None:
    opts = ShootingOptions(seed=config.seed, restarts=config.restarts, output_steps=config.steps)
    result = shoot(config.psi_i, config.psi_f, config.constraints, config.seed_params, opts)
    prefix = _prefix(config)
    _write_trajectory(result.trajectory, prefix)
    record = {
        "format": "shooting",
        "seed": config.seed,
        "params": result.params.to_dict(),
        "infidelity": result.infidelity,
        "restarts": [
            {"T": o.T, "infidelity": o.infidelity, "constraint_violation": o.constraint_violation,
             "converged": o.converged}
            for o in result.restarts
        ],
    }
    io.write_json(record, f"{prefix}_shoot.json")
    print(
        f"solver=shoot T={result.params.T!r} infidelity={result.infidelity:.3e} verdict=n/a",
        file=out,
    )


def _run_verify(config: ProblemConfig, out) -> None:
    try:
        traj = io.load_trajectory(config.trajectory)
    except (OSError, ValueError, KeyError) as exc:
        raise ConfigError("trajectory", f"cannot load {config.trajectory}: {exc}") from None
    report = verify_optimality(traj, config.constraints)
    io.write_json(report.to_dict(), f"{_prefix(config)}_report.json")
    infid = _infidelity(traj.states[-1], config.psi_f) if config.psi_f is not None else float("nan")
    print(
        f"solver=verify T={traj.T!r} infidelity={infid:.3e} "
        f"verdict={'pass' if report.verdict else 'fail'}",
        file=out,
    )


_RUNNERS = {
    "isotropic": _run_isotropic,
    "qubit": _run_qubit,
    "shoot": _run_shoot,
    "verify": _run_verify,
}


def run(config: ProblemConfig, out=None) -> int:
    """Dispatch to the configured solver; returns the process exit status."""
    out = out or sys.stdout
    try:
        _RUNNERS[config.solver](config, out)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except BrachistochroneError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="brachistochrone", description="Time-optimal quantum state transfer solvers."
    )
    parser.add_argument("--config", required=True, help="problem config (JSON, schema 1)")
    parser.add_argument("--output", help="output path prefix (overrides config)")
    parser.add_argument("--seed", type=int, help="random seed for shooting restarts")
    parser.add_argument("--steps", type=int, help="time steps (overrides config)")
    parser.add_argument("--max-l", type=int, dest="max_l", help="largest l for qubit families")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = load_config(args.config)
        overrides = {
            k: getattr(args, k)
            for k in ("output", "seed", "steps", "max_l")
            if getattr(args, k) is not None
        }
        if overrides:
            with open(args.config) as fh:
                raw = json.load(fh)
            raw.update(overrides)
            config = parse_config(raw)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return run(config)


if __name__ == "__main__":
    sys.exit(main())
