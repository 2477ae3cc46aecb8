"""Time evolution under traceless Hamiltonians and trajectory diagnostics.

States are integrated with a fixed-step classical RK4 scheme followed by
renormalization. Propagators are built as ordered products of per-step
unitary exponentials, so they are unitary up to round-off regardless of
the step size.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
import numpy.typing as npt
from scipy.interpolate import CubicSpline

from .errors import StepTooCoarse
from .hilbert import fubini_study_distance

__all__ = [
    "HamiltonianSchedule",
    "Trajectory",
    "constant_schedule",
    "schedule_from_trajectory",
    "evolve",
    "propagator_matrix",
    "propagators",
    "path_length",
    "aa_residual",
    "geodesic_residual",
    "MAX_STEP_NORM",
]

# Largest allowed ||H|| * dt for the fixed-step schemes.
MAX_STEP_NORM = 0.5

_GAUSS_OFFSET = np.sqrt(3.0) / 6.0


@dataclass(frozen=True)
class HamiltonianSchedule:
    """A traceless Hamiltonian ``H(t)`` on ``[0, T]``.

    ``evaluator`` must be reentrant: the verifier and the shooting
    restarts may call it from several places at once.
    """

    evaluator: Callable[[float], np.ndarray]
    T: float

    def __post_init__(self):
        if not float(self.T) > 0.0:
            raise ValueError("schedule duration must be positive")
        object.__setattr__(self, "T", float(self.T))

    def __call__(self, t: float) -> np.ndarray:
        return np.asarray(self.evaluator(t), dtype=np.complex128)

    def checked(self, t: float) -> np.ndarray:
        """Evaluate and assert the Hermitian/traceless contract."""
        h = self(t)
        if np.max(np.abs(h - h.conj().T)) > 1e-10:
            raise ValueError(f"schedule returned a non-Hermitian operator at t={t!r}")
        if abs(np.trace(h)) > 1e-10:
            raise ValueError(f"schedule returned an operator with nonzero trace at t={t!r}")
        return h


def constant_schedule(h: np.ndarray, T: float) -> HamiltonianSchedule:
    h = np.array(h, dtype=np.complex128)
    h.flags.writeable = False
    return HamiltonianSchedule(lambda t: h, T)


@dataclass(frozen=True)
class Trajectory:
    """Uniformly sampled states and traceless Hamiltonians.

    Attributes
    ----------
    dt : float
        Time step.
    times : ndarray, shape (N+1,)
        ``times[j] == j * dt`` up to round-off.
    states : ndarray, shape (N+1, n)
    hamiltonians : ndarray, shape (N+1, n, n)
    """

    dt: float
    times: npt.NDArray[np.float64]
    states: npt.NDArray[np.complex128]
    hamiltonians: npt.NDArray[np.complex128]

    def __post_init__(self):
        dt = float(self.dt)
        times = np.array(self.times, dtype=np.float64)
        states = np.array(self.states, dtype=np.complex128)
        hams = np.array(self.hamiltonians, dtype=np.complex128)
        if not dt > 0.0:
            raise ValueError("dt must be positive")
        if times.ndim != 1 or times.size < 2:
            raise ValueError("a trajectory needs at least two samples")
        count, n = times.size, states.shape[-1]
        if states.shape != (count, n) or hams.shape != (count, n, n):
            raise ValueError("times, states and hamiltonians have inconsistent shapes")
        grid = np.arange(count) * dt
        if np.max(np.abs(times - grid)) > 1e-9 * max(1.0, grid[-1]):
            raise ValueError("time grid is not uniform with spacing dt")
        norms = np.linalg.norm(states, axis=1)
        if np.max(np.abs(norms - 1.0)) > 1e-9:
            raise ValueError("trajectory contains non-normalized states")
        traces = np.abs(np.trace(hams, axis1=1, axis2=2))
        if np.max(traces) > 1e-10:
            raise ValueError("trajectory Hamiltonians must be traceless")
        for a in (times, states, hams):
            a.flags.writeable = False
        object.__setattr__(self, "dt", dt)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "hamiltonians", hams)

    @property
    def n(self) -> int:
        return self.states.shape[1]

    @property
    def steps(self) -> int:
        return self.times.size - 1

    @property
    def T(self) -> float:
        return float(self.times[-1])

    def __len__(self) -> int:
        return self.times.size

    def __iter__(self):
        return iter(zip(self.times, self.states, self.hamiltonians))


def schedule_from_trajectory(traj: Trajectory) -> HamiltonianSchedule:
    """Cubic-spline interpolant through the stored Hamiltonians."""
    flat = traj.hamiltonians.reshape(len(traj), -1)
    re = CubicSpline(traj.times, flat.real, axis=0)
    im = CubicSpline(traj.times, flat.imag, axis=0)
    n = traj.n
    T = traj.T

    def evaluator(t):
        t = min(max(float(t), 0.0), T)
        h = (re(t) + 1j * im(t)).reshape(n, n)
        h = 0.5 * (h + h.conj().T)
        return h - (np.trace(h) / n) * np.eye(n)

    return HamiltonianSchedule(evaluator, T)


def _step_norm_guard(hams: np.ndarray, times: np.ndarray, dt: float, limit: float) -> None:
    """Raise StepTooCoarse at the first sample where ``||H|| * dt`` exceeds ``limit``.

    The Frobenius norm bounds the spectral norm from above, so eigenvalues
    are only computed for samples that the cheap bound cannot clear.
    """
    frob = np.sqrt(np.sum(np.abs(hams) ** 2, axis=(-2, -1)))
    suspect = np.flatnonzero(frob * dt > limit)
    if not suspect.size:
        return
    norms = np.max(np.abs(np.linalg.eigvalsh(hams[suspect])), axis=-1)
    bad = suspect[norms * dt > limit]
    if bad.size:
        j = bad[0]
        norm = np.max(np.abs(np.linalg.eigvalsh(hams[j])))
        raise StepTooCoarse(
            f"||H|| * dt = {norm * dt:.3g} exceeds {limit} at t={times[j]:.6g}; increase steps"
        )


def _sample(schedule: HamiltonianSchedule, times: np.ndarray, checked: bool) -> np.ndarray:
    hams = np.array([schedule(t) for t in times], dtype=np.complex128)
    if checked:
        herm = np.max(np.abs(hams - np.swapaxes(hams.conj(), -1, -2)), axis=(1, 2))
        trace = np.abs(np.trace(hams, axis1=1, axis2=2))
        bad = np.flatnonzero((herm > 1e-10) | (trace > 1e-10))
        if bad.size:
            raise ValueError(
                f"schedule returned a non-Hermitian or traced operator at t={times[bad[0]]!r}"
            )
    return hams


def _rk4_step_matrices(a_now: np.ndarray, a_mid: np.ndarray) -> np.ndarray:
    """Classical RK4 for the linear ODE ``psi' = A(t) psi`` written as ``psi_{j+1} = M_j psi_j``.

    ``a_now[j] = -i dt H(t_j)`` and ``a_mid[j] = -i dt H(t_j + dt/2)``.
    """
    a, b, c = a_now[:-1], a_mid, a_now[1:]
    eye = np.eye(a.shape[-1])
    k1 = a
    k2 = b @ (eye + 0.5 * k1)
    k3 = b @ (eye + 0.5 * k2)
    k4 = c @ (eye + k3)
    return eye + (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0


def evolve(
    schedule: HamiltonianSchedule,
    psi0: np.ndarray,
    steps: int,
    max_step_norm: float = MAX_STEP_NORM,
) -> Trajectory:
    """Integrate ``i d/dt psi = H(t) psi`` on a uniform grid with RK4.

    The state is renormalized after every step. Raises ``StepTooCoarse``
    when ``||H|| * dt`` (spectral norm) exceeds ``max_step_norm`` at any
    grid point or step midpoint.
    """
    if steps < 2:
        raise ValueError("steps must be at least 2")
    psi = np.array(psi0, dtype=np.complex128)
    if abs(np.linalg.norm(psi) - 1.0) > 1e-9:
        raise ValueError("initial state must be normalized")
    dt = schedule.T / steps
    times = np.arange(steps + 1) * dt
    mid_times = times[:-1] + 0.5 * dt
    hams = _sample(schedule, times, checked=True)
    mids = _sample(schedule, mid_times, checked=False)
    _step_norm_guard(hams, times, dt, max_step_norm)
    _step_norm_guard(mids, mid_times, dt, max_step_norm)
    step = _rk4_step_matrices(-1j * dt * hams, -1j * dt * mids)
    out = [psi]
    for m in step:
        psi = m @ psi
        out.append(psi)
    # The step is linear, so rescaling psi between steps never changes later
    # directions: normalizing every sample at the end is per-step renormalization.
    states = np.array(out)
    states /= np.linalg.norm(states, axis=1)[:, None]
    return Trajectory(dt, times, states, hams)


def _expm_hermitian(k: np.ndarray) -> np.ndarray:
    """``exp(-i K)`` for Hermitian ``K`` (or a stack of them)."""
    vals, vecs = np.linalg.eigh(k)
    return (vecs * np.exp(-1j * vals)[..., None, :]) @ np.swapaxes(vecs.conj(), -1, -2)


def _step_generators(schedule, steps, method, max_step_norm):
    """Hermitian exponents ``K_j`` with ``U_{j+1} = exp(-i K_j) U_j``, shape (steps, n, n)."""
    dt = schedule.T / steps
    starts = np.arange(steps) * dt
    if method == "magnus4":
        t1 = starts + (0.5 - _GAUSS_OFFSET) * dt
        t2 = starts + (0.5 + _GAUSS_OFFSET) * dt
        h1, h2 = _sample(schedule, t1, False), _sample(schedule, t2, False)
        _step_norm_guard(h1, t1, dt, max_step_norm)
        _step_norm_guard(h2, t2, dt, max_step_norm)
        comm = h1 @ h2 - h2 @ h1
        k = 0.5 * dt * (h1 + h2) + 1j * (np.sqrt(3.0) * dt * dt / 12.0) * comm
    elif method == "midpoint":
        tm = starts + 0.5 * dt
        h = _sample(schedule, tm, False)
        _step_norm_guard(h, tm, dt, max_step_norm)
        k = dt * h
    else:
        raise ValueError(f"unknown propagator method {method!r}")
    return 0.5 * (k + np.swapaxes(k.conj(), -1, -2))


def propagators(
    schedule: HamiltonianSchedule,
    steps: int,
    method: str = "magnus4",
    max_step_norm: float = MAX_STEP_NORM,
) -> npt.NDArray[np.complex128]:
    """Time-ordered propagators ``U(t_j)`` for every grid point, shape (steps+1, n, n).

    ``method="magnus4"`` uses the two-point Gauss fourth-order Magnus step;
    ``method="midpoint"`` uses ``exp(-i H(t_j + dt/2) dt)`` (second order).
    """
    if steps < 2:
        raise ValueError("steps must be at least 2")
    return ordered_products(_expm_hermitian(_step_generators(schedule, steps, method, max_step_norm)))


def ordered_products(step_unitaries: np.ndarray) -> npt.NDArray[np.complex128]:
    """Cumulative left products ``U_j = S_{j-1} ... S_0`` with ``U_0 = I``."""
    count, n = step_unitaries.shape[0], step_unitaries.shape[-1]
    out = np.empty((count + 1, n, n), dtype=np.complex128)
    u = np.eye(n, dtype=np.complex128)
    out[0] = u
    for j in range(count):
        u = step_unitaries[j] @ u
        out[j + 1] = u
    return out


def propagator_matrix(
    schedule: HamiltonianSchedule,
    steps: int,
    method: str = "magnus4",
    max_step_norm: float = MAX_STEP_NORM,
) -> npt.NDArray[np.complex128]:
    """The time-ordered exponential ``U(T)``."""
    return propagators(schedule, steps, method, max_step_norm)[-1]


def _step_distances(traj: Trajectory) -> np.ndarray:
    s = traj.states
    return np.array([fubini_study_distance(s[j], s[j + 1]) for j in range(traj.steps)])


def path_length(traj: Trajectory) -> float:
    """Sum of Fubini-Study distances between consecutive samples."""
    return float(np.sum(_step_distances(traj)))


def _delta_e(h: np.ndarray, psi: np.ndarray) -> float:
    hpsi = h @ psi
    mean = np.vdot(psi, hpsi).real
    return float(np.sqrt(max(np.vdot(hpsi, hpsi).real - mean * mean, 0.0)))


def aa_residual(traj: Trajectory) -> float:
    """Discrete residual of ``ds = dE dt``.

    ``max_j | d_FS(psi_j, psi_{j+1}) / dt - dE(t_j) |`` where ``dE`` is the
    energy spread of the stored Hamiltonian at ``t_j``.
    """
    speeds = _step_distances(traj) / traj.dt
    spreads = np.array(
        [_delta_e(traj.hamiltonians[j], traj.states[j]) for j in range(traj.steps)]
    )
    return float(np.max(np.abs(speeds - spreads)))


def _phase_aligned(states: np.ndarray) -> np.ndarray:
    out = np.array(states, dtype=np.complex128)
    for j in range(1, len(out)):
        overlap = np.vdot(out[j - 1], out[j])
        if abs(overlap) > 0.0:
            out[j] *= np.conj(overlap) / abs(overlap)
    return out


def geodesic_residual(traj: Trajectory) -> float:
    """Largest horizontal acceleration ``||(1 - P) psi''||`` over interior samples.

    States are re-phased so consecutive overlaps are real and non-negative
    (the discrete counterpart of the ``<H> = 0`` gauge), then differenced
    with a second-order central stencil. Vanishes, up to O(dt^2), only on
    Fubini-Study geodesics.
    """
    if traj.steps < 4:
        raise ValueError("geodesic_residual needs at least 4 steps")
    s = _phase_aligned(traj.states)
    acc = (s[2:] - 2.0 * s[1:-1] + s[:-2]) / traj.dt**2
    mid = s[1:-1]
    horiz = acc - mid * np.einsum("ji,ji->j", mid.conj(), acc)[:, None]
    return float(np.max(np.linalg.norm(horiz, axis=1)))
