"""Closed-form time-optimal control under the isotropic budget ``Tr H^2 / 2 = omega^2``.

The optimal Hamiltonian is constant, has rank two, and rotates the initial
state along the Fubini-Study geodesic towards the target at speed
``omega``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateEndpoints
from .hilbert import gram_schmidt_final, pure_state
from .propagator import Trajectory, constant_schedule, evolve

__all__ = [
    "IsotropicSolution",
    "TrivialSolution",
    "solve_isotropic",
    "geodesic_state",
    "geodesic_trajectory",
    "ReducedResiduals",
    "verify_reduced_equations",
]


@dataclass(frozen=True)
class IsotropicSolution:
    """Constant optimal Hamiltonian between two distinct rays.

    ``psi_i`` is the initial state re-phased so that its overlap with the
    target is real and non-negative; it is ray-equal to the caller's
    input. ``psi_f_prime`` is the Gram-Schmidt partner of ``psi_i``.
    """

    h_tilde: np.ndarray
    T: float
    psi_i: np.ndarray
    psi_f_prime: np.ndarray
    omega: float


@dataclass(frozen=True)
class TrivialSolution:
    """Returned when the endpoints already lie on the same ray: ``T = 0``, ``H = 0``."""

    psi_i: np.ndarray
    omega: float

    @property
    def T(self) -> float:
        return 0.0

    @property
    def h_tilde(self) -> np.ndarray:
        n = self.psi_i.size
        return np.zeros((n, n), dtype=np.complex128)


def solve_isotropic(psi_i, psi_f, omega: float) -> IsotropicSolution | TrivialSolution:
    """Time-optimal constant Hamiltonian from ``psi_i`` to the ray of ``psi_f``.

    Returns ``H = i omega (|f'><i| - |i><f'|)`` and
    ``T = arccos|<psi_f|psi_i>| / omega``. Ray-equal endpoints produce a
    :class:`TrivialSolution`.
    """
    omega = float(omega)
    if not omega > 0.0:
        raise ValueError("omega must be positive")
    psi_i = np.asarray(pure_state(psi_i, normalize=False))
    psi_f = np.asarray(pure_state(psi_f, normalize=False))
    if psi_i.shape != psi_f.shape:
        raise ValueError("endpoint dimensions differ")
    overlap = np.vdot(psi_f, psi_i)
    # Re-phase psi_i so that the geodesic lands on psi_f itself, not a phase copy.
    if abs(overlap) > 0.0:
        psi_i = pure_state(psi_i * (np.conj(overlap) / abs(overlap)), normalize=False)
    try:
        psi_fp = gram_schmidt_final(psi_i, psi_f)
    except DegenerateEndpoints:
        return TrivialSolution(pure_state(psi_i, normalize=False), omega)
    h = 1j * omega * (np.outer(psi_fp, psi_i.conj()) - np.outer(psi_i, psi_fp.conj()))
    h = 0.5 * (h + h.conj().T)
    h.flags.writeable = False
    T = float(np.arccos(min(abs(overlap), 1.0)) / omega)
    return IsotropicSolution(h, T, pure_state(psi_i, normalize=False), psi_fp, omega)


def _check_time(sol, t: float) -> float:
    t = float(t)
    if not -1e-12 <= t <= sol.T + 1e-12:
        raise ValueError(f"t={t!r} outside [0, {sol.T!r}]")
    return min(max(t, 0.0), sol.T)


def geodesic_state(sol: IsotropicSolution, t: float) -> np.ndarray:
    """``cos(omega t) |psi_i> + sin(omega t) |psi_f'>``."""
    t = _check_time(sol, t)
    wt = sol.omega * t
    return np.cos(wt) * sol.psi_i + np.sin(wt) * sol.psi_f_prime


def _geodesic_velocity(sol: IsotropicSolution, t: float) -> np.ndarray:
    wt = sol.omega * t
    return sol.omega * (-np.sin(wt) * sol.psi_i + np.cos(wt) * sol.psi_f_prime)


def geodesic_trajectory(sol: IsotropicSolution, steps: int) -> Trajectory:
    """Closed-form geodesic sampled on a uniform grid, as a :class:`Trajectory`."""
    if steps < 2:
        raise ValueError("steps must be at least 2")
    dt = sol.T / steps
    times = np.arange(steps + 1) * dt
    wt = sol.omega * np.minimum(times, sol.T)
    states = np.cos(wt)[:, None] * sol.psi_i + np.sin(wt)[:, None] * sol.psi_f_prime
    hams = np.broadcast_to(sol.h_tilde, (steps + 1,) + sol.h_tilde.shape)
    return Trajectory(dt, times, states, hams)


def evolved_trajectory(sol: IsotropicSolution, steps: int) -> Trajectory:
    """Numerically integrate ``psi_i`` under the constant optimal Hamiltonian."""
    return evolve(constant_schedule(sol.h_tilde, sol.T), sol.psi_i, steps)


@dataclass(frozen=True)
class ReducedResiduals:
    structure: float
    """max ``||H - (HP + PH)||``"""
    generator: float
    """max ``||H - i(|psi'><psi| - |psi><psi'|)||``"""
    orthogonality: float
    """max ``|<psi|psi'>|``"""

    def passed(self, tol: float = 1e-10) -> bool:
        return max(self.structure, self.generator, self.orthogonality) < tol


def verify_reduced_equations(sol: IsotropicSolution, samples: int) -> ReducedResiduals:
    """Evaluate the reduced optimality equations along the closed-form geodesic."""
    if samples < 1:
        raise ValueError("samples must be positive")
    h = np.asarray(sol.h_tilde)
    worst = np.zeros(3)
    for t in np.linspace(0.0, sol.T, samples):
        psi = geodesic_state(sol, t)
        dpsi = _geodesic_velocity(sol, t)
        p = np.outer(psi, psi.conj())
        r_struct = np.max(np.abs(h - (h @ p + p @ h)))
        gen = 1j * (np.outer(dpsi, psi.conj()) - np.outer(psi, dpsi.conj()))
        r_gen = np.max(np.abs(h - gen))
        r_orth = abs(np.vdot(psi, dpsi))
        worst = np.maximum(worst, [r_struct, r_gen, r_orth])
    return ReducedResiduals(*map(float, worst))
