"""One qubit driven by a field confined to the x-y plane.

The constraints are ``Tr H^2 / 2 = omega^2`` and ``Tr(H sigma_z) = 0``.
Starting from ``P(0) = (1 + sigma_x)/2`` with ``H(0) = -omega sigma_y``,
the locally optimal controls are fields of constant magnitude ``omega``
rotating about z at angular velocity ``2 Omega``. Reaching the antipode
``(1 - sigma_x)/2`` quantizes ``Omega`` into the ``(k, l)`` families
enumerated by :func:`enumerate_families`.

Sign conventions: ``Omega`` is positive for ``orientation=+1``; the
mirrored family (``orientation=-1``) is its reflection ``y -> -y`` and is
equally fast. ``H(0) = +omega sigma_y`` would trace the reflection
``z -> -z``; :func:`scan_arrival` covers it by mirroring the target.
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from typing import Iterator, NamedTuple, Sequence

import numpy as np
import numpy.typing as npt
from scipy.optimize import brentq, minimize

from .errors import DensityTooLow, TargetUnreachable
from .hilbert import SIGMA_X, SIGMA_Y, SIGMA_Z, bloch_vector, pure_state
from .propagator import HamiltonianSchedule, Trajectory

__all__ = [
    "INITIAL_STATE",
    "ANTIPODE_STATE",
    "QubitFamily",
    "BlochSample",
    "BlochTrajectory",
    "enumerate_families",
    "bloch_components",
    "field_profile",
    "hamiltonian",
    "variance_profile",
    "qubit_state",
    "qubit_schedule",
    "qubit_trajectory",
    "bloch_trajectory",
    "count_nodes",
    "node_times",
    "global_optimum",
    "frame_rotation",
    "RotatingFieldSolution",
    "scan_arrival",
]

INITIAL_STATE = pure_state([1.0, 1.0])
ANTIPODE_STATE = pure_state([1.0, -1.0])

ON_EQUATOR_TOL = 1e-9
RAY_TOL = 1e-8


@dataclass(frozen=True)
class QubitFamily:
    """A ``(k, l)`` branch of locally optimal solutions.

    ``arrival`` truncates the branch at an earlier time; it is set by
    :func:`global_optimum` when the target is met before ``T``.
    """

    k: int
    l: int
    omega: float
    orientation: int = 1
    arrival: float | None = None

    def __post_init__(self):
        if not (isinstance(self.k, (int, np.integer)) and isinstance(self.l, (int, np.integer))):
            raise TypeError("k and l must be integers")
        if not (self.l > self.k >= 0):
            raise ValueError("families require l > k >= 0")
        if (self.k + self.l) % 2 != 1:
            raise ValueError("families require k + l odd")
        if not float(self.omega) > 0.0:
            raise ValueError("omega must be positive")
        if self.orientation not in (1, -1):
            raise ValueError("orientation must be +1 or -1")
        object.__setattr__(self, "k", int(self.k))
        object.__setattr__(self, "l", int(self.l))
        object.__setattr__(self, "omega", float(self.omega))

    @property
    def root(self) -> float:
        return float(np.sqrt(self.l * self.l - self.k * self.k))

    @property
    def Omega(self) -> float:
        """Half the field rotation rate, signed by ``orientation``."""
        return self.orientation * self.k * self.omega / self.root

    @property
    def OmegaPrime(self) -> float:
        return float(np.hypot(self.omega, self.Omega))

    @property
    def T(self) -> float:
        """Duration to the antipode: ``(pi/2) sqrt(l^2 - k^2) / omega``."""
        return 0.5 * np.pi * self.root / self.omega

    @property
    def duration(self) -> float:
        return self.T if self.arrival is None else float(self.arrival)

    def mirrored(self) -> "QubitFamily":
        return dataclasses.replace(self, orientation=-self.orientation)


class BlochSample(NamedTuple):
    t: float
    sigma: npt.NDArray[np.float64]
    B: npt.NDArray[np.float64]


@dataclass(frozen=True)
class BlochTrajectory:
    """Column-oriented Bloch samples; iterating yields :class:`BlochSample`."""

    t: npt.NDArray[np.float64]
    sigma: npt.NDArray[np.float64]
    B: npt.NDArray[np.float64]
    family: QubitFamily | None = None

    def __len__(self) -> int:
        return self.t.size

    def __iter__(self) -> Iterator[BlochSample]:
        for j in range(self.t.size):
            yield BlochSample(float(self.t[j]), self.sigma[j], self.B[j])

    def __getitem__(self, j) -> BlochSample:
        return BlochSample(float(self.t[j]), self.sigma[j], self.B[j])

    @property
    def speed(self) -> npt.NDArray[np.float64]:
        """Energy spread ``sqrt(omega^2 - (B . sigma)^2)`` at each sample."""
        b2 = np.sum(self.B * self.B, axis=1)
        proj = np.sum(self.B * self.sigma, axis=1)
        return np.sqrt(np.maximum(b2 - proj * proj, 0.0))


def enumerate_families(omega: float, max_l: int) -> list[QubitFamily]:
    """All ``(k, l)`` with ``l <= max_l``, ``l > k >= 0``, ``k + l`` odd, sorted by ``T``.

    Pairs with a common factor ``g > 1`` are skipped: they retrace the
    primitive family ``(k/g, l/g)`` and pass the antipode at ``T/g``.
    """
    if max_l < 1:
        raise ValueError("max_l must be at least 1")
    fams = [
        QubitFamily(k, l, omega)
        for l in range(1, max_l + 1)
        for k in range(l - 1, -1, -2)
        if math.gcd(k, l) == 1
    ]
    return sorted(fams, key=lambda f: (f.l * f.l - f.k * f.k, f.k))


def _bloch_closed_form(omega, Omega, t):
    t = np.asarray(t, dtype=np.float64)
    op = np.hypot(omega, Omega)
    a, b = 2.0 * Omega * t, 2.0 * op * t
    ratio = Omega / op
    return np.stack(
        [
            np.cos(a) * np.cos(b) + ratio * np.sin(a) * np.sin(b),
            -np.sin(a) * np.cos(b) + ratio * np.cos(a) * np.sin(b),
            (omega / op) * np.sin(b),
        ],
        axis=-1,
    )


def _check_time(family: QubitFamily, t):
    t = np.asarray(t, dtype=np.float64)
    if np.any(t < -1e-12) or np.any(t > family.T + 1e-12):
        raise ValueError(f"t outside [0, {family.T!r}]")
    return np.clip(t, 0.0, family.T)


def bloch_components(family: QubitFamily, t) -> npt.NDArray[np.float64]:
    """Closed-form ``(<sigma_x>, <sigma_y>, <sigma_z>)`` at time(s) ``t``."""
    return _bloch_closed_form(family.omega, family.Omega, _check_time(family, t))


def field_profile(family: QubitFamily, t) -> npt.NDArray[np.float64]:
    """Field ``B(t) = omega (sin 2 Omega t, cos 2 Omega t, 0)``; ``H = -sigma . B``."""
    t = _check_time(family, t)
    a = 2.0 * family.Omega * t
    return family.omega * np.stack([np.sin(a), np.cos(a), np.zeros_like(a)], axis=-1)


def hamiltonian(family: QubitFamily, t: float) -> np.ndarray:
    bx, by, _ = field_profile(family, t)
    return -(bx * SIGMA_X + by * SIGMA_Y)


def variance_profile(family: QubitFamily, t):
    """Energy spread ``omega sqrt(1 - (Omega/Omega' sin 2 Omega' t)^2)``."""
    t = _check_time(family, t)
    s = (family.Omega / family.OmegaPrime) * np.sin(2.0 * family.OmegaPrime * t)
    return family.omega * np.sqrt(1.0 - s * s)


def _su2(n_vec, angle):
    """``exp(-i angle n . sigma)`` for unit ``n_vec``."""
    nx, ny, nz = n_vec
    c, s = np.cos(angle), np.sin(angle)
    return np.array(
        [[c - 1j * s * nz, -1j * s * (nx - 1j * ny)], [-1j * s * (nx + 1j * ny), c + 1j * s * nz]]
    )


def qubit_state(family: QubitFamily, t: float) -> np.ndarray:
    """Closed-form state ``exp(i Omega t sz) exp(-i (H(0) + Omega sz) t) |+x>``."""
    t = float(_check_time(family, t))
    w, om = family.omega, family.Omega
    op = family.OmegaPrime
    # H(0) + Omega sz = -w sy + Omega sz = op * (0, -w/op, om/op) . sigma
    inner = _su2((0.0, -w / op, om / op), op * t)
    outer = np.diag([np.exp(1j * om * t), np.exp(-1j * om * t)])
    return outer @ inner @ INITIAL_STATE


def qubit_schedule(family: QubitFamily) -> HamiltonianSchedule:
    return HamiltonianSchedule(lambda t: hamiltonian(family, min(max(t, 0.0), family.T)), family.duration)


def qubit_trajectory(family: QubitFamily, steps: int) -> Trajectory:
    """Closed-form states and fields on a uniform grid over ``[0, duration]``."""
    if steps < 2:
        raise ValueError("steps must be at least 2")
    dt = family.duration / steps
    times = np.arange(steps + 1) * dt
    clipped = np.minimum(times, family.T)
    states = np.array([qubit_state(family, t) for t in clipped])
    hams = np.array([hamiltonian(family, t) for t in clipped])
    return Trajectory(dt, times, states, hams)


def bloch_trajectory(family: QubitFamily, samples: int) -> BlochTrajectory:
    """Closed-form Bloch vector and field on ``samples`` uniform points of ``[0, duration]``."""
    if samples < 2:
        raise ValueError("samples must be at least 2")
    t = np.linspace(0.0, family.duration, samples)
    return BlochTrajectory(t, bloch_components(family, t), field_profile(family, t), family)


def count_nodes(samples: Sequence[BlochSample] | BlochTrajectory) -> int:
    """Number of sign changes of ``<sigma_z>`` strictly inside the sampled interval.

    Samples within 1e-9 of the equator are treated as lying on it and
    skipped, so crossings that land exactly on a grid point count once and
    the endpoints never count.

    Raises
    ------
    DensityTooLow
        If consecutive z-values differ by more than 0.5.
    """
    if isinstance(samples, BlochTrajectory):
        z = samples.sigma[:, 2]
    else:
        z = np.array([s.sigma[2] for s in samples], dtype=np.float64)
    if z.size < 2:
        return 0
    if np.max(np.abs(np.diff(z))) > 0.5:
        raise DensityTooLow("consecutive <sigma_z> samples differ by more than 0.5")
    off = z[np.abs(z) >= ON_EQUATOR_TOL]
    signs = np.sign(off)
    return int(np.count_nonzero(signs[1:] != signs[:-1]))


def node_times(family: QubitFamily, samples: int | None = None) -> npt.NDArray[np.float64]:
    """Interior equator crossings, bracketed on a grid and refined by bisection to 1e-10."""
    if samples is None:
        samples = 64 * (family.l + 1)
    t = np.linspace(0.0, family.duration, samples)
    z = bloch_components(family, t)[:, 2]
    zfun = lambda s: float(bloch_components(family, s)[2])
    roots = []
    for j in range(samples - 1):
        a, b = t[j], t[j + 1]
        za, zb = z[j], z[j + 1]
        if abs(za) < ON_EQUATOR_TOL or abs(zb) < ON_EQUATOR_TOL:
            continue
        if za * zb < 0.0:
            roots.append(brentq(zfun, a, b, xtol=1e-14, rtol=4 * np.finfo(float).eps))
    # crossings that land on a grid point
    for j in range(1, samples - 1):
        if abs(z[j]) < ON_EQUATOR_TOL and z[j - 1] * z[j + 1] < 0.0:
            roots.append(brentq(zfun, t[j - 1], t[j + 1], xtol=1e-14, rtol=4 * np.finfo(float).eps))
    return np.array(sorted(roots))


def _equatorial_angle(initial) -> float:
    s = bloch_vector(initial)
    if abs(s[2]) > 1e-9:
        raise ValueError("initial state must lie on the equator <sigma_z> = 0")
    return float(np.arctan2(s[1], s[0]))


def frame_rotation(initial) -> np.ndarray:
    """z-rotation taking ``|+x>`` to the ray of the equatorial state ``initial``."""
    angle = _equatorial_angle(pure_state(initial))
    return np.diag([np.exp(-0.5j * angle), np.exp(0.5j * angle)])


def _rotate_z(vec, angle):
    c, s = np.cos(angle), np.sin(angle)
    x, y, z = vec
    return np.array([c * x - s * y, s * x + c * y, z])


def _target_vector(target, initial):
    s = bloch_vector(pure_state(target))
    if initial is not None:
        s = _rotate_z(s, -_equatorial_angle(pure_state(initial)))
    return s


def _first_arrival(bloch, t_end, target, grid) -> float | None:
    """Earliest ``t`` in ``(0, t_end]`` with ``(1 - s(t) . target)/2 < RAY_TOL``.

    Candidates are local maxima of ``s(t) . target`` on a grid; interior
    ones are refined as roots of its time derivative (central differences),
    which resolves the arrival time far below the square-root precision of
    a direct minimization.
    """
    t = np.linspace(0.0, t_end, grid)
    align = bloch(t) @ target
    h = 1e-5 * t_end

    def slope(s):
        return float((bloch(s + h) - bloch(s - h)) @ target) / (2.0 * h)

    for j in range(1, grid):
        right = align[j + 1] if j + 1 < grid else -np.inf
        if not (align[j] >= align[j - 1] and align[j] >= right and align[j] > 0.99):
            continue
        if j == grid - 1:
            cand = t_end
        else:
            a, b = t[j - 1], t[j + 1]
            if slope(a) > 0.0 > slope(b):
                cand = brentq(slope, a, b, xtol=1e-15, rtol=4 * np.finfo(float).eps)
            else:
                cand = t[j]
        if 0.5 * (1.0 - float(bloch(cand) @ target)) < RAY_TOL:
            return float(cand)
    return None


def global_optimum(families: Sequence[QubitFamily], target, initial=None) -> QubitFamily:
    """Fastest listed family whose trajectory passes through the target ray.

    The returned family has ``arrival`` set to the first time the target
    is met (``T`` for the antipode, the node time for a node target, 0 for
    a target on the initial ray).

    Parameters
    ----------
    families : sequence of QubitFamily
    target : array_like
        Qubit state to reach.
    initial : array_like, optional
        Equatorial initial state; defaults to ``|+x>``. Other equatorial
        starts are handled by rotating the problem about z.
    """
    if not families:
        raise ValueError("families must be non-empty")
    goal = _target_vector(target, initial)
    if 0.5 * (1.0 - goal[0]) < RAY_TOL:
        best = min(families, key=lambda f: f.T)
        return dataclasses.replace(best, arrival=0.0)
    best, best_time = None, np.inf
    for fam in families:
        bloch = lambda s, fam=fam: _bloch_closed_form(fam.omega, fam.Omega, s)
        arrival = _first_arrival(bloch, fam.T, goal, grid=256 * (fam.l + 1))
        if arrival is not None and arrival < best_time - 1e-12:
            best, best_time = fam, arrival
    if best is None:
        raise TargetUnreachable("no listed family passes through the target ray")
    if abs(best_time - best.T) < 1e-9:
        best_time = best.T
    return dataclasses.replace(best, arrival=best_time)


@dataclass(frozen=True)
class RotatingFieldSolution:
    """A rotating-field control reaching a general target.

    ``mirrored`` selects ``H(0) = +omega sigma_y`` (reflection ``z -> -z``).
    """

    omega: float
    Omega: float
    duration: float
    mirrored: bool = False

    def bloch(self, t):
        s = _bloch_closed_form(self.omega, self.Omega, t)
        if self.mirrored:
            s = s * np.array([1.0, 1.0, -1.0])
        return s


def scan_arrival(
    target,
    omega: float,
    initial=None,
    max_rate: float = 4.0,
    grid: int = 801,
    horizon: float | None = None,
    polish: int = 12,
) -> RotatingFieldSolution:
    """Shortest rotating-field arrival at an arbitrary target.

    Scans ``Omega / omega`` over ``[-max_rate, max_rate]``, finds the first
    near-arrival of each candidate within ``horizon`` (default ``4 pi / omega``),
    and polishes the ``polish`` earliest candidates in ``(Omega, t)`` by
    Nelder-Mead.
    Only controls consistent with the stated initial condition are
    searched, so this is a local-optimality extension, not a global proof.
    """
    omega = float(omega)
    goal = _target_vector(target, initial)
    if 0.5 * (1.0 - goal[0]) < RAY_TOL:
        return RotatingFieldSolution(omega, 0.0, 0.0)
    horizon = 4.0 * np.pi / omega if horizon is None else horizon
    t = np.linspace(0.0, horizon, 2048)
    candidates = []
    for mirror in (False, True):
        g = goal * np.array([1.0, 1.0, -1.0]) if mirror else goal
        for rate in np.linspace(-max_rate, max_rate, grid):
            gap = 0.5 * (1.0 - _bloch_closed_form(omega, rate * omega, t) @ g)
            idx = np.flatnonzero(gap[1:] < 5e-3)
            if idx.size:
                candidates.append((t[idx[0] + 1], rate * omega, mirror))
    found = []
    for t0, rate, mirror in sorted(candidates)[:polish]:
        g = goal * np.array([1.0, 1.0, -1.0]) if mirror else goal
        fun = lambda x, g=g: 0.5 * (1.0 - _bloch_closed_form(omega, x[0], x[1]) @ g)
        res = minimize(fun, [rate, t0], method="Nelder-Mead",
                       options={"xatol": 1e-12, "fatol": 1e-18, "maxiter": 4000})
        if res.fun < RAY_TOL and res.x[1] > 0.0:
            found.append((float(res.x[1]), float(res.x[0]), mirror))
    if not found:
        raise TargetUnreachable("no rotating-field control reaches the target within the horizon")
    duration, rate, mirror = min(found)
    return RotatingFieldSolution(omega, rate, duration, mirror)
