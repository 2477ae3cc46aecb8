"""Finite-dimensional Hilbert-space primitives.

States are complex amplitude vectors of shape ``(n,)`` and operators are
complex ``(n, n)`` arrays. The constructors :func:`pure_state` and
:func:`hermitian` validate their input and return read-only copies, so
values handed around by the solvers are effectively immutable.

Global phases are kept: two states that differ by a phase are different
arrays but compare equal under :func:`ray_equal`.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import numpy.typing as npt

from .errors import DegenerateEndpoints

ComplexVector = npt.NDArray[np.complex128]
ComplexMatrix = npt.NDArray[np.complex128]

__all__ = [
    "SIGMA_X",
    "SIGMA_Y",
    "SIGMA_Z",
    "ConstraintSet",
    "pure_state",
    "hermitian",
    "ray_equal",
    "projector",
    "traceless_part",
    "expectation",
    "energy_variance",
    "fubini_study_distance",
    "gram_schmidt_final",
    "bloch_vector",
]

NORM_TOL = 1e-9
HERMITIAN_TOL = 1e-9


def _frozen(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


SIGMA_X: ComplexMatrix = _frozen(np.array([[0, 1], [1, 0]], dtype=np.complex128))
SIGMA_Y: ComplexMatrix = _frozen(np.array([[0, -1j], [1j, 0]], dtype=np.complex128))
SIGMA_Z: ComplexMatrix = _frozen(np.array([[1, 0], [0, -1]], dtype=np.complex128))


def pure_state(amplitudes: Sequence[complex] | np.ndarray, normalize: bool = True) -> ComplexVector:
    """Return a normalized, read-only state vector.

    Parameters
    ----------
    amplitudes : array_like
        Complex amplitudes, length ``n >= 2``.
    normalize : bool
        If False, the input must already have unit norm (within 1e-9).
    """
    psi = np.array(amplitudes, dtype=np.complex128).reshape(-1)
    if psi.size < 2:
        raise ValueError("state dimension must be at least 2")
    if not np.all(np.isfinite(psi)):
        raise ValueError("state amplitudes must be finite")
    norm = np.linalg.norm(psi)
    if normalize:
        if norm < 1e-12:
            raise ValueError("cannot normalize a zero vector")
        psi = psi / norm
    elif abs(norm - 1.0) > NORM_TOL:
        raise ValueError(f"state is not normalized (norm = {norm!r})")
    return _frozen(psi)


def hermitian(matrix: Sequence[Sequence[complex]] | np.ndarray, tol: float = HERMITIAN_TOL) -> ComplexMatrix:
    """Return the Hermitian symmetrization ``(M + M^dagger)/2`` as a read-only array.

    Raises ``ValueError`` if the anti-Hermitian part of ``M`` exceeds ``tol``
    in max-norm.
    """
    m = np.array(matrix, dtype=np.complex128)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"operator must be square, got shape {m.shape}")
    anti = 0.5 * (m - m.conj().T)
    if np.max(np.abs(anti), initial=0.0) > tol:
        raise ValueError("operator is not Hermitian")
    return _frozen(0.5 * (m + m.conj().T))


def _check_normalized(psi: np.ndarray) -> np.ndarray:
    psi = np.asarray(psi, dtype=np.complex128)
    norm = np.linalg.norm(psi)
    if abs(norm - 1.0) > NORM_TOL:
        raise ValueError(f"state is not normalized (norm = {norm!r})")
    return psi


def ray_equal(psi1: np.ndarray, psi2: np.ndarray, tol: float = 1e-12) -> bool:
    """True if the states agree up to a global phase."""
    return bool(abs(abs(np.vdot(psi1, psi2)) - 1.0) <= tol)


def projector(psi: np.ndarray) -> ComplexMatrix:
    """Rank-one projector ``|psi><psi|``."""
    psi = _check_normalized(psi)
    return np.outer(psi, psi.conj())


def traceless_part(h: np.ndarray) -> ComplexMatrix:
    """Return ``H - (Tr H / n) I``."""
    h = np.asarray(h, dtype=np.complex128)
    n = h.shape[0]
    return h - (np.trace(h) / n) * np.eye(n)


def expectation(h: np.ndarray, psi: np.ndarray) -> float:
    """Real expectation value ``<psi|H|psi>``; ``h`` must be Hermitian to 1e-9."""
    psi = _check_normalized(psi)
    h = np.asarray(h)
    if h.size and np.max(np.abs(h - h.conj().T)) > 1e-9:
        raise ValueError("operator is not Hermitian")
    return float(np.vdot(psi, h @ psi).real)


def energy_variance(h: np.ndarray, psi: np.ndarray) -> float:
    """``<H^2> - <H>^2``, clamped at zero against round-off."""
    psi = _check_normalized(psi)
    hpsi = np.asarray(h) @ psi
    mean = np.vdot(psi, hpsi).real
    var = np.vdot(hpsi, hpsi).real - mean * mean
    if var < 0.0:
        if var < -1e-12:
            raise ValueError(f"negative variance {var!r}; operator not Hermitian")
        var = 0.0
    return float(var)


def fubini_study_distance(psi1: np.ndarray, psi2: np.ndarray) -> float:
    """Fubini-Study distance ``arccos |<psi1|psi2>|`` in ``[0, pi/2]``.

    Evaluated as ``atan2(|psi2 - <psi1|psi2> psi1|, |<psi1|psi2>|)``, which
    keeps full precision near both ends of the range.
    """
    psi1, psi2 = np.asarray(psi1), np.asarray(psi2)
    overlap = np.vdot(psi1, psi2)
    perp = np.linalg.norm(psi2 - overlap * psi1)
    return float(np.arctan2(perp, abs(overlap)))


def gram_schmidt_final(psi_i: np.ndarray, psi_f: np.ndarray) -> ComplexVector:
    """Unit vector in ``span{psi_i, psi_f}`` orthogonal to ``psi_i``.

    The phase is chosen so that ``<psi_f|psi_f'>`` is real and positive.

    Raises
    ------
    DegenerateEndpoints
        If the two states lie on the same ray.
    """
    psi_i = _check_normalized(psi_i)
    psi_f = _check_normalized(psi_f)
    overlap = np.vdot(psi_i, psi_f)
    if abs(overlap) >= 1.0 - 1e-12:
        raise DegenerateEndpoints("initial and final states lie on the same ray")
    residual = psi_f - overlap * psi_i
    return _frozen(residual / np.linalg.norm(residual))


def bloch_vector(psi: np.ndarray) -> npt.NDArray[np.float64]:
    """``(<sigma_x>, <sigma_y>, <sigma_z>)`` for a qubit state."""
    psi = np.asarray(psi, dtype=np.complex128)
    if psi.shape != (2,):
        raise ValueError("Bloch vectors are defined for qubit states only")
    a, b = psi
    ab = np.conj(a) * b
    return np.array([2.0 * ab.real, 2.0 * ab.imag, abs(a) ** 2 - abs(b) ** 2])


@dataclass(frozen=True)
class ConstraintSet:
    """Isotropic norm budget ``Tr H^2 / 2 = omega^2`` plus forbidden directions.

    Each forbidden direction ``A`` imposes the linear constraint
    ``Tr(H A) = 0`` on the traceless Hamiltonian.
    """

    omega: float
    forbidden: tuple[np.ndarray, ...] = field(default_factory=tuple)

    def __post_init__(self):
        omega = float(self.omega)
        if not omega > 0.0:
            raise ValueError("omega must be positive")
        object.__setattr__(self, "omega", omega)
        ops = tuple(hermitian(a) for a in self.forbidden)
        for a in ops:
            if abs(np.trace(a)) > 1e-12:
                raise ValueError("forbidden directions must be traceless")
        if ops:
            shapes = {a.shape for a in ops}
            if len(shapes) != 1:
                raise ValueError("forbidden directions must share one dimension")
            flat = np.array([np.concatenate([a.real.ravel(), a.imag.ravel()]) for a in ops])
            if np.linalg.matrix_rank(flat, tol=1e-10) < len(ops):
                raise ValueError("forbidden directions must be linearly independent")
        object.__setattr__(self, "forbidden", ops)

    @property
    def m(self) -> int:
        """Number of forbidden directions."""
        return len(self.forbidden)
