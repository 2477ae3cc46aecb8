"""CSV/JSON readers and writers for trajectories, Bloch data and reports.

Every float is written with 17 significant digits so files round-trip
bit-exactly.
"""
from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .hilbert import SIGMA_X, SIGMA_Y, SIGMA_Z
from .propagator import Trajectory
from .qubit import BlochTrajectory, QubitFamily

__all__ = [
    "fmt",
    "trajectory_to_csv",
    "trajectory_from_csv",
    "trajectory_to_json",
    "trajectory_from_json",
    "load_trajectory",
    "bloch_from_trajectory",
    "bloch_to_csv",
    "bloch_from_csv",
    "bloch_to_json",
    "bloch_from_json",
    "write_json",
]

BLOCH_COLUMNS = ["t", "sx", "sy", "sz", "bx", "by", "bz", "dE"]


def fmt(x: float) -> str:
    return format(float(x), ".17g")


def _pair(z: complex) -> list[float]:
    return [float(z.real), float(z.imag)]


def _unpair(a) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    return a[..., 0] + 1j * a[..., 1]


def _trajectory_header(n: int) -> list[str]:
    cols = ["t"]
    for i in range(n):
        cols += [f"re(psi_{i})", f"im(psi_{i})"]
    for i in range(n):
        for j in range(n):
            cols += [f"h_{i}{j}_re", f"h_{i}{j}_im"]
    return cols


def trajectory_to_csv(traj: Trajectory, path) -> None:
    """One row per sample; a leading ``# dt=... n=...`` line carries the step exactly."""
    n = traj.n
    with open(path, "w", newline="") as fh:
        fh.write(f"# dt={fmt(traj.dt)} n={n}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(_trajectory_header(n))
        for t, psi, h in traj:
            row = [fmt(t)]
            for z in psi:
                row += [fmt(z.real), fmt(z.imag)]
            for z in h.ravel():
                row += [fmt(z.real), fmt(z.imag)]
            writer.writerow(row)


def trajectory_from_csv(path) -> Trajectory:
    with open(path, newline="") as fh:
        first = fh.readline()
        if not first.startswith("# "):
            raise ValueError(f"{path}: missing '# dt=... n=...' line")
        meta = dict(item.split("=", 1) for item in first[2:].split())
        dt, n = float(meta["dt"]), int(meta["n"])
        reader = csv.reader(fh)
        header = next(reader)
        if header != _trajectory_header(n):
            raise ValueError(f"{path}: unexpected trajectory header")
        rows = np.array([[float(x) for x in row] for row in reader if row])
    times = rows[:, 0]
    psi = rows[:, 1 : 1 + 2 * n].reshape(-1, n, 2)
    h = rows[:, 1 + 2 * n :].reshape(-1, n * n, 2)
    return Trajectory(dt, times, _unpair(psi), _unpair(h).reshape(-1, n, n))


def _trajectory_dict(traj: Trajectory) -> dict:
    return {
        "format": "trajectory",
        "dt": float(traj.dt),
        "n": traj.n,
        "samples": [
            {
                "t": float(t),
                "psi": [_pair(z) for z in psi],
                "h": [[_pair(z) for z in row] for row in h],
            }
            for t, psi, h in traj
        ],
    }


def write_json(obj, path) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=1, allow_nan=False)
        fh.write("\n")


def trajectory_to_json(traj: Trajectory, path) -> None:
    write_json(_trajectory_dict(traj), path)


def trajectory_from_json(path) -> Trajectory:
    with open(path) as fh:
        data = json.load(fh)
    if data.get("format") != "trajectory":
        raise ValueError(f"{path}: not a trajectory file")
    samples = data["samples"]
    times = np.array([s["t"] for s in samples], dtype=np.float64)
    psi = _unpair([s["psi"] for s in samples])
    h = _unpair([s["h"] for s in samples])
    traj = Trajectory(float(data["dt"]), times, psi, h)
    if traj.n != int(data["n"]):
        raise ValueError(f"{path}: dimension field does not match samples")
    return traj


def load_trajectory(path) -> Trajectory:
    """Dispatch on the file suffix (``.json`` or ``.csv``)."""
    suffix = Path(path).suffix.lower()
    if suffix == ".json":
        return trajectory_from_json(path)
    if suffix == ".csv":
        return trajectory_from_csv(path)
    raise ValueError(f"unknown trajectory format {suffix!r}")


def bloch_from_trajectory(traj: Trajectory) -> BlochTrajectory:
    """Bloch vectors and fields ``B = -(Tr(H sigma)/2)`` of a qubit trajectory."""
    if traj.n != 2:
        raise ValueError("Bloch data requires a qubit trajectory")
    psi = traj.states
    paulis = (SIGMA_X, SIGMA_Y, SIGMA_Z)
    sigma = np.stack(
        [np.einsum("ji,ik,jk->j", psi.conj(), s, psi).real for s in paulis], axis=1
    )
    b = np.stack(
        [-0.5 * np.einsum("jik,ki->j", traj.hamiltonians, s).real for s in paulis], axis=1
    )
    return BlochTrajectory(np.array(traj.times), sigma, b)


def bloch_to_csv(bt: BlochTrajectory, path) -> None:
    speed = bt.speed
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(BLOCH_COLUMNS)
        for j in range(len(bt)):
            writer.writerow(
                [fmt(bt.t[j]), *map(fmt, bt.sigma[j]), *map(fmt, bt.B[j]), fmt(speed[j])]
            )


def bloch_from_csv(path) -> BlochTrajectory:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        if next(reader) != BLOCH_COLUMNS:
            raise ValueError(f"{path}: unexpected Bloch header")
        rows = np.array([[float(x) for x in row] for row in reader if row])
    return BlochTrajectory(rows[:, 0], rows[:, 1:4], rows[:, 4:7])


def _family_dict(fam: QubitFamily) -> dict:
    return {
        "k": fam.k,
        "l": fam.l,
        "omega": fam.omega,
        "orientation": fam.orientation,
        "Omega": fam.Omega,
        "OmegaPrime": fam.OmegaPrime,
        "T": fam.T,
        "arrival": fam.arrival,
    }


def bloch_to_json(bt: BlochTrajectory, path) -> None:
    data = {
        "format": "bloch",
        "family": _family_dict(bt.family) if bt.family is not None else None,
        "columns": BLOCH_COLUMNS,
        "rows": [
            [float(bt.t[j]), *map(float, bt.sigma[j]), *map(float, bt.B[j]), float(s)]
            for j, s in enumerate(bt.speed)
        ],
    }
    write_json(data, path)


def bloch_from_json(path) -> BlochTrajectory:
    with open(path) as fh:
        data = json.load(fh)
    if data.get("format") != "bloch":
        raise ValueError(f"{path}: not a Bloch file")
    rows = np.array(data["rows"], dtype=np.float64)
    fam = data.get("family")
    family = None
    if fam is not None:
        family = QubitFamily(fam["k"], fam["l"], fam["omega"], fam["orientation"], fam["arrival"])
    return BlochTrajectory(rows[:, 0], rows[:, 1:4], rows[:, 4:7], family)
