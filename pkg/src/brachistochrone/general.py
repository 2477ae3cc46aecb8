"""Optimality conditions and shooting for general constraint sets.

Constraints are one quadratic budget ``Tr H^2 / 2 = omega^2`` plus any
number of linear constraints ``Tr(H A_a) = 0``. With multipliers
``lambda = (1, lambda_2, ...)`` the F operator is::

    F = sum_a lambda_a (G_a - <G_a> P),   G_1 = H,  G_a = A_a

and an optimal trajectory satisfies

* the structure condition ``F = F P + P F``, and
* the transport condition ``F(t) = U(t) F(0) U(t)^dagger``.

Only ratios of multipliers matter, so the first one is fixed to 1.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np
import numpy.typing as npt
from scipy.interpolate import CubicSpline
from scipy.linalg import null_space
from scipy.optimize import least_squares, minimize

from .errors import ConstraintInfeasible, DegenerateEndpoints, IndeterminateMultipliers, NoConvergence
from .hilbert import ConstraintSet, pure_state, ray_equal
from .isotropic import IsotropicSolution, solve_isotropic
from .propagator import (
    HamiltonianSchedule,
    Trajectory,
    _expm_hermitian,
    ordered_products,
    schedule_from_trajectory,
)

__all__ = [
    "constraint_value",
    "build_F",
    "Tolerances",
    "OptimalityReport",
    "verify_optimality",
    "trajectory_propagators",
    "ShootingParameters",
    "ShootingOptions",
    "RestartOutcome",
    "ShootResult",
    "shoot",
]


def constraint_value(cset: ConstraintSet, h: np.ndarray) -> npt.NDArray[np.float64]:
    """``[Tr h^2/2 - omega^2, Tr(h A_1), ..., Tr(h A_m)]``."""
    h = np.asarray(h, dtype=np.complex128)
    out = [0.5 * np.trace(h @ h).real - cset.omega**2]
    out.extend(np.trace(h @ a).real for a in cset.forbidden)
    return np.array(out)


def _gradients(cset: ConstraintSet, h: np.ndarray) -> list[np.ndarray]:
    return [np.asarray(h, dtype=np.complex128), *cset.forbidden]


def build_F(cset: ConstraintSet, lambdas: Sequence[float], h: np.ndarray, psi: np.ndarray) -> np.ndarray:
    """Multiplier-weighted constraint gradients with the state component removed.

    ``<psi|F|psi>`` vanishes identically. ``Tr F`` equals
    ``-sum_a lambda_a <G_a>``, which is zero whenever the structure
    condition holds.
    """
    h = np.asarray(h, dtype=np.complex128)
    psi = np.asarray(psi, dtype=np.complex128)
    lambdas = np.asarray(lambdas, dtype=np.float64)
    if lambdas.shape != (1 + cset.m,):
        raise ValueError(f"expected {1 + cset.m} multipliers, got {lambdas.size}")
    if h.shape != (psi.size, psi.size):
        raise ValueError("Hamiltonian and state dimensions differ")
    if cset.m and cset.forbidden[0].shape != h.shape:
        raise ValueError("constraint directions and Hamiltonian dimensions differ")
    p = np.outer(psi, psi.conj())
    f = np.zeros_like(h)
    for lam, g in zip(lambdas, _gradients(cset, h)):
        f += lam * (g - np.vdot(psi, g @ psi).real * p)
    return f


def _structure_defect(x, p):
    """``X - (X P + P X)`` for stacks of matrices."""
    return x - (x @ p + p @ x)


def _realify(m):
    """Stack real and imaginary parts of the trailing matrix axes into one vector."""
    flat = m.reshape(m.shape[:-2] + (-1,))
    return np.concatenate([flat.real, flat.imag], axis=-1)


def trajectory_propagators(traj: Trajectory) -> npt.NDArray[np.complex128]:
    """``U(t_j)`` generated by the trajectory's Hamiltonians.

    The stored samples are interpolated with a cubic spline and each step
    uses the two-point Gauss fourth-order Magnus exponential.
    """
    count, n = len(traj), traj.n
    flat = traj.hamiltonians.reshape(count, -1)
    re = CubicSpline(traj.times, flat.real, axis=0)
    im = CubicSpline(traj.times, flat.imag, axis=0)
    off = np.sqrt(3.0) / 6.0
    starts = traj.times[:-1]
    t1 = starts + (0.5 - off) * traj.dt
    t2 = starts + (0.5 + off) * traj.dt
    h1 = (re(t1) + 1j * im(t1)).reshape(-1, n, n)
    h2 = (re(t2) + 1j * im(t2)).reshape(-1, n, n)
    comm = h1 @ h2 - h2 @ h1
    k = 0.5 * traj.dt * (h1 + h2) + 1j * (np.sqrt(3.0) * traj.dt**2 / 12.0) * comm
    k = 0.5 * (k + np.swapaxes(k.conj(), -1, -2))
    return ordered_products(_expm_hermitian(k))


@dataclass(frozen=True)
class Tolerances:
    structure: float = 1e-7
    transport: float = 1e-7
    constraints: float = 1e-7
    lambda_spread: float = 1e-6
    rank: float = 1e-8


@dataclass(frozen=True)
class OptimalityReport:
    """Residuals of the necessary optimality conditions along a trajectory.

    ``lambda_fit[j]`` holds the multiplier ratios fitted at sample ``j``
    from the structure condition alone; rows are NaN where that sample
    cannot determine them (for instance a qubit crossing the equator with
    ``sigma_z`` forbidden). ``lambda_global`` is the single least-squares
    fit over all samples and is what every residual below uses.
    ``residual_projected`` is the weaker condition
    ``(dF/dt + i[H, F]) |psi> = 0`` estimated by central differences; it is
    reported for reference and does not enter the verdict.
    """

    lambda_fit: npt.NDArray[np.float64]
    lambda_global: npt.NDArray[np.float64]
    lambda_spread: float
    lambda_constant: bool
    residual_structure: float
    residual_transport: float
    residual_constraints: float
    residual_projected: float
    tolerances: Tolerances
    verdict: bool

    def to_dict(self) -> dict:
        fits = [[None if np.isnan(v) else float(v) for v in row] for row in self.lambda_fit]
        return {
            "verdict": "pass" if self.verdict else "fail",
            "residual_structure": self.residual_structure,
            "residual_transport": self.residual_transport,
            "residual_constraints": self.residual_constraints,
            "residual_projected": self.residual_projected,
            "lambda_global": [float(v) for v in self.lambda_global],
            "lambda_spread": self.lambda_spread,
            "lambda_constant": self.lambda_constant,
            "lambda_fit": fits,
            "tolerances": asdict(self.tolerances),
        }


def verify_optimality(
    traj: Trajectory, cset: ConstraintSet, tolerances: Tolerances | None = None
) -> OptimalityReport:
    """Check the structure, transport and constraint conditions on a trajectory.

    Raises
    ------
    IndeterminateMultipliers
        If no combination of samples determines the multiplier ratios.
    """
    tol = tolerances or Tolerances()
    if cset.m and cset.forbidden[0].shape != (traj.n, traj.n):
        raise ValueError("constraint directions and trajectory dimensions differ")
    psi = traj.states
    hams = traj.hamiltonians
    count, m = len(traj), cset.m
    p = np.einsum("ji,jk->jik", psi, psi.conj())

    def centered(g):
        mean = np.einsum("ji,jik,jk->j", psi.conj(), g, psi).real
        return g - mean[:, None, None] * p

    g1 = centered(hams)
    ga = [centered(np.broadcast_to(a, hams.shape)) for a in cset.forbidden]
    r1 = _realify(_structure_defect(g1, p))
    ra = np.stack([_realify(_structure_defect(g, p)) for g in ga], axis=-1) if m else None

    fits = np.full((count, m), np.nan)
    if m:
        design = ra.reshape(-1, m)
        sv = np.linalg.svd(design, compute_uv=False)
        if sv[-1] < tol.rank * np.sqrt(count):
            raise IndeterminateMultipliers(
                f"multipliers undetermined along the whole trajectory (smallest singular value {sv[-1]:.3g})"
            )
        lam, *_ = np.linalg.lstsq(design, -r1.reshape(-1), rcond=None)
        for j in range(count):
            local_sv = np.linalg.svd(ra[j], compute_uv=False)
            if local_sv[-1] >= tol.rank:
                fits[j], *_ = np.linalg.lstsq(ra[j], -r1[j], rcond=None)
        determined = ~np.isnan(fits[:, 0])
        spread = float(np.max(np.abs(fits[determined] - lam))) if determined.any() else 0.0
    else:
        lam = np.zeros(0)
        spread = 0.0

    f = g1 + sum((lam[a] * ga[a] for a in range(m)), np.zeros_like(g1))
    r_struct = float(np.max(np.abs(_structure_defect(f, p))))

    u = trajectory_propagators(traj)
    moved = u @ f[0] @ np.swapaxes(u.conj(), -1, -2)
    r_trans = float(np.max(np.abs(f - moved)))

    values = np.array([constraint_value(cset, h) for h in hams])
    r_cons = float(np.max(np.abs(values)))

    df = np.gradient(f, traj.dt, axis=0, edge_order=2)
    comm = hams @ f - f @ hams
    proj = np.einsum("jik,jk->ji", df + 1j * comm, psi)
    r_proj = float(np.max(np.linalg.norm(proj, axis=1)))

    verdict = (
        r_struct < tol.structure and r_trans < tol.transport and r_cons < tol.constraints
    )
    return OptimalityReport(
        lambda_fit=fits,
        lambda_global=np.asarray(lam, dtype=np.float64),
        lambda_spread=spread,
        lambda_constant=spread < tol.lambda_spread,
        residual_structure=r_struct,
        residual_transport=r_trans,
        residual_constraints=r_cons,
        residual_projected=r_proj,
        tolerances=tol,
        verdict=bool(verdict),
    )


@dataclass(frozen=True)
class ShootingParameters:
    """Converged (or trial) shooting data: multiplier ratios, ``H(0)`` and duration."""

    lambda_ratios: npt.NDArray[np.float64]
    h0: np.ndarray
    T: float

    def to_dict(self) -> dict:
        h0 = np.asarray(self.h0)
        return {
            "lambda_ratios": [float(v) for v in self.lambda_ratios],
            "h0": [[[float(z.real), float(z.imag)] for z in row] for row in h0],
            "T": float(self.T),
        }


@dataclass(frozen=True)
class ShootingOptions:
    """Knobs for :func:`shoot`.

    ``tol`` bounds the terminal infidelity ``||(1 - P_f) psi(T)||^2``.
    Restart 0 starts exactly at the seed; the others perturb the seed's
    search coordinates by ``spread`` (relative) using per-restart
    generators spawned from ``seed``. The shortest converged restart is
    polished again with ``refine_steps`` integration steps (0 disables),
    which removes most of the time-step bias from the returned duration.
    ``method`` picks the derivative-free
    local search: ``"least_squares"`` (trust-region on the residual vector
    with finite-difference Jacobians) or ``"nelder-mead"`` on its squared
    norm; ``polish`` only applies to the latter.
    """

    tol: float = 1e-14
    steps: int = 160
    refine_steps: int = 640
    output_steps: int = 1000
    restarts: int = 32
    seed: int = 0
    spread: float = 0.3
    penalty: float = 1e3
    maxiter: int = 4000
    polish: int = 2
    method: str = "least_squares"


@dataclass(frozen=True)
class RestartOutcome:
    T: float
    infidelity: float
    constraint_violation: float
    converged: bool
    params: ShootingParameters


@dataclass(frozen=True)
class ShootResult:
    """Best converged solution plus every restart's outcome.

    Unpacks as ``schedule, trajectory, params``.
    """

    schedule: HamiltonianSchedule
    trajectory: Trajectory
    params: ShootingParameters
    infidelity: float
    restarts: tuple[RestartOutcome, ...] = field(repr=False)

    def __iter__(self):
        return iter((self.schedule, self.trajectory, self.params))


class _ShootingProblem:
    """Linear parameterization of admissible ``(F(0), lambda)`` and the transport ODE.

    The search coordinates ``c`` live in the null space of the linear
    constraints evaluated on ``H(0)``. They map linearly to ``(v, mu)``
    where ``F(0) = |psi><v| + |v><psi|`` with ``v`` orthogonal to ``psi``,
    which is the general solution of the structure condition at ``t = 0``.
    """

    def __init__(self, psi_i, psi_f, cset: ConstraintSet):
        self.psi0 = np.asarray(psi_i, dtype=np.complex128)
        self.psi_f = np.asarray(psi_f, dtype=np.complex128)
        self.cset = cset
        n = self.n = self.psi0.size
        self.m = cset.m
        self.A = np.array(cset.forbidden).reshape(self.m, n, n)
        self.P0 = np.outer(self.psi0, self.psi0.conj())
        self.Q = null_space(self.psi0.conj()[None, :])  # n x (n-1) complement basis
        self.dim = 2 * (n - 1) + self.m
        basis = np.eye(self.dim)
        h_cols = np.array([self._h0_raw(e) for e in basis])
        rows = np.array([[np.trace(h @ a).real for h in h_cols] for a in self.A]).reshape(self.m, self.dim)
        self.N = null_space(rows) if self.m else np.eye(self.dim)
        if self.N.shape[1] == 0:
            raise ConstraintInfeasible("linear constraints leave no admissible initial Hamiltonian")
        reachable = np.array([self._h0_raw(col) for col in self.N.T])
        if np.max(np.abs(reachable), initial=0.0) < 1e-12:
            raise ConstraintInfeasible("every admissible initial Hamiltonian vanishes")

    def split(self, p):
        k = self.n - 1
        v = self.Q @ (p[:k] + 1j * p[k : 2 * k])
        return v, p[2 * k :]

    def _f0(self, v):
        return np.outer(self.psi0, v.conj()) + np.outer(v, self.psi0.conj())

    def recover(self, f, psi, mu):
        """Solve ``(H - <H>P) + sum mu_a (A_a - <A_a>P) = F`` for traceless ``H``."""
        p = np.outer(psi, psi.conj())
        x = f.copy()
        for a, coef in zip(self.A, mu):
            x -= coef * (a - np.vdot(psi, a @ psi).real * p)
        return x - np.trace(x) * p

    def _h0_raw(self, p):
        v, mu = self.split(p)
        return self.recover(self._f0(v), self.psi0, mu)

    def normalized(self, c):
        """Search coordinates -> raw parameters scaled to the isotropic budget; None if degenerate."""
        p = self.N @ c
        h0 = self._h0_raw(p)
        norm = np.sqrt(0.5 * np.trace(h0 @ h0).real)
        if norm < 1e-12:
            return None
        return p * (self.cset.omega / norm)

    def coordinates(self, lambda_ratios, h0):
        """Least-squares search coordinates for a user-supplied ``(lambda, H(0))``."""
        mu = np.asarray(lambda_ratios, dtype=np.float64).reshape(self.m)
        h0 = np.asarray(h0, dtype=np.complex128)
        f0 = h0 - np.vdot(self.psi0, h0 @ self.psi0).real * self.P0
        for a, coef in zip(self.A, mu):
            f0 = f0 + coef * (a - np.vdot(self.psi0, a @ self.psi0).real * self.P0)
        x = self.Q.conj().T @ (f0 @ self.psi0)
        p = np.concatenate([x.real, x.imag, mu])
        return self.N.T @ p

    def hamiltonian_along(self, p):
        """``H(U)`` for the parameters ``p``; equals ``recover(U F(0) U^dagger, U psi0, mu)``.

        With ``F(0) = |psi0><v| + |v><psi0|`` the transported operator is
        ``|psi><w| + |w><psi|`` (``w = U v``), and the ``<A_a> P`` terms of the
        recovery cancel against the trace correction, leaving
        ``H = F - sum mu_a A_a - Tr(F) P``.
        """
        v, mu = self.split(p)
        basis = np.stack([self.psi0, v], axis=1)
        mix = np.tensordot(mu, self.A, axes=1) if self.m else np.zeros((self.n, self.n))

        core = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=np.complex128)

        def ham(u):
            # H = [psi, w] K [psi, w]^dagger - mix with K = [[-Tr F, 1], [1, 0]]
            pw = u @ basis
            core[0, 0] = -2.0 * np.vdot(pw[:, 0], pw[:, 1]).real
            return pw @ core @ pw.conj().T - mix

        return ham

    def integrate(self, p, T, steps, record=False):
        """RK4 on ``dU/dt = -i H(U) U``; returns ``U(T)`` (and samples if ``record``)."""
        ham = self.hamiltonian_along(p)
        dt = T / steps
        u = np.eye(self.n, dtype=np.complex128)
        us, hs = [u], []
        for _ in range(steps):
            h = ham(u)
            if record:
                hs.append(h)
            k1 = -1j * (h @ u)
            k2 = -1j * (ham(u + 0.5 * dt * k1) @ (u + 0.5 * dt * k1))
            k3 = -1j * (ham(u + 0.5 * dt * k2) @ (u + 0.5 * dt * k2))
            k4 = -1j * (ham(u + dt * k3) @ (u + dt * k3))
            u = u + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            if record:
                us.append(u)
        if not record:
            return u
        w, _, vh = np.linalg.svd(u)
        hs.append(ham(w @ vh))
        return u, np.array(us), np.array(hs)

    def terminal_defect(self, u):
        """Real and imaginary parts of ``(1 - P_f) psi(T)``; squared norm is the infidelity."""
        psi = u @ self.psi0
        psi = psi / np.linalg.norm(psi)
        resid = psi - self.psi_f * np.vdot(self.psi_f, psi)
        return np.concatenate([resid.real, resid.imag])

    def infidelity(self, u):
        d = self.terminal_defect(u)
        return float(np.dot(d, d))

    def violation(self, hs):
        vals = np.array([constraint_value(self.cset, h) for h in hs])
        return float(np.max(np.abs(vals)))

    def params(self, p, T):
        v, mu = self.split(p)
        return ShootingParameters(np.array(mu, dtype=np.float64), self._h0_raw(p), float(T))


def _default_seed(problem: _ShootingProblem, psi_i, psi_f, cset) -> tuple[np.ndarray, float]:
    """Isotropic geodesic projected onto the admissible set."""
    sol = solve_isotropic(psi_i, psi_f, cset.omega)
    assert isinstance(sol, IsotropicSolution)
    h = np.array(sol.h_tilde)
    # psi_i in the isotropic solution may carry a different phase; F(0) only sees P.
    c = problem.coordinates(np.zeros(problem.m), h)
    if np.linalg.norm(c) < 1e-12 or problem.normalized(c) is None:
        c = np.ones(problem.N.shape[1])
    return c, sol.T


def shoot(
    psi_i,
    psi_f,
    cset: ConstraintSet,
    params0: ShootingParameters | None = None,
    options: ShootingOptions | None = None,
) -> ShootResult:
    """Locally time-optimal control between two rays by multi-start shooting.

    For trial ``(F(0), lambda, T)`` the Hamiltonian is reconstructed at
    every instant from ``F(t) = U F(0) U^dagger`` and the propagator is
    integrated forward. A derivative-free local search then drives the terminal infidelity
    (plus a weighted constraint-violation penalty) to zero. Among restarts
    that reach ``options.tol``, the shortest duration wins.

    ``params0`` seeds the search; by default the isotropic geodesic,
    projected onto the constraint set, is used.

    Raises
    ------
    DegenerateEndpoints
        If the endpoints lie on the same ray.
    ConstraintInfeasible
        If no initial Hamiltonian meets the constraints.
    NoConvergence
        If no restart reaches the infidelity tolerance.
    """
    opts = options or ShootingOptions()
    psi_i = pure_state(psi_i)
    psi_f = pure_state(psi_f)
    if ray_equal(psi_i, psi_f):
        raise DegenerateEndpoints("initial and final states lie on the same ray")
    if cset.m and cset.forbidden[0].shape != (psi_i.size, psi_i.size):
        raise ValueError("constraint directions and state dimensions differ")
    problem = _ShootingProblem(psi_i, psi_f, cset)
    if params0 is None:
        c0, T0 = _default_seed(problem, psi_i, psi_f, cset)
    else:
        c0, T0 = problem.coordinates(params0.lambda_ratios, params0.h0), float(params0.T)
        if np.linalg.norm(c0) < 1e-12:
            c0 = np.ones(problem.N.shape[1])
    c0 = c0 / np.linalg.norm(c0)
    omega = cset.omega

    # The isotropic budget is held exactly by normalization; only linear
    # constraints can drift along the transport, so only they are penalized.

    def residuals(z, steps):
        c, T = z[:-1], z[-1]
        weight = np.sqrt(opts.penalty / (steps + 1)) / omega
        p = problem.normalized(c)
        if p is None:
            return np.full(2 * problem.n + 1 + problem.m * (steps + 1), 1e3)
        pin = np.sqrt(1e-3) * (np.dot(c, c) - 1.0)
        if problem.m and opts.penalty:
            u, _, hs = problem.integrate(p, T, steps, record=True)
            vals = np.einsum("jik,aki->ja", hs, problem.A).real.ravel()
            return np.concatenate([problem.terminal_defect(u), [pin], weight * vals])
        return np.append(problem.terminal_defect(problem.integrate(p, T, steps)), pin)

    def local_search(z0, steps):
        lower = np.append(np.full(z0.size - 1, -np.inf), 1e-6 * T0)
        if opts.method == "least_squares":
            res = least_squares(
                residuals, z0, bounds=(lower, np.inf), method="trf", args=(steps,),
                xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=opts.maxiter,
            )
            return res.x
        if opts.method == "nelder-mead":
            fun = lambda z: float(np.sum(residuals(z, steps) ** 2)) if z[-1] > 0 else 1e3 + abs(z[-1])
            z = z0
            for _ in range(1 + opts.polish):
                z = minimize(fun, z, method="Nelder-Mead",
                             options={"xatol": 1e-11, "fatol": 1e-22,
                                      "maxiter": opts.maxiter, "adaptive": True}).x
            return z
        raise ValueError(f"unknown local search method {opts.method!r}")

    def evaluate(z, steps):
        c, T = z[:-1], float(z[-1])
        p = problem.normalized(c) if T > 0.0 else None
        if p is None:
            return None
        u, _, hs = problem.integrate(p, T, steps, record=True)
        infid = problem.infidelity(u)
        viol = problem.violation(hs)
        return RestartOutcome(T, infid, viol, bool(infid < opts.tol), problem.params(p, T)), p

    seeds = np.random.SeedSequence(opts.seed).spawn(opts.restarts)
    outcomes, raw = [], []
    for r, ss in enumerate(seeds):
        rng = np.random.default_rng(ss)
        if r == 0:
            z0 = np.append(c0, T0)
        else:
            c = c0 + opts.spread * rng.standard_normal(c0.size) / np.sqrt(c0.size)
            T = T0 * (1.0 + opts.spread * rng.uniform(-0.5, 1.0))
            z0 = np.append(c / np.linalg.norm(c), T)
        z = local_search(z0, opts.steps)
        outcome = evaluate(z, opts.steps)
        if outcome is not None:
            outcomes.append(outcome[0])
            raw.append(outcome[1])

    good = [j for j, o in enumerate(outcomes) if o.converged]
    if good and opts.refine_steps:
        j = min(good, key=lambda i: outcomes[i].T)
        z = np.append(problem.coordinates(outcomes[j].params.lambda_ratios, outcomes[j].params.h0),
                      outcomes[j].T)
        refined = evaluate(local_search(z, opts.refine_steps), opts.refine_steps)
        if refined is not None and refined[0].converged:
            outcomes[j], raw[j] = refined
    if not good:
        best = min(outcomes, key=lambda o: o.infidelity, default=None)
        detail = f" (best infidelity {best.infidelity:.3g})" if best else ""
        raise NoConvergence(f"no restart reached infidelity {opts.tol:g}{detail}")
    j = min(good, key=lambda i: outcomes[i].T)
    best = outcomes[j]
    traj, schedule = _build_output(problem, raw[j], best.T, opts.output_steps)
    return ShootResult(schedule, traj, best.params, best.infidelity, tuple(outcomes))


def _build_output(problem: _ShootingProblem, p, T, steps):
    _, us, hs = problem.integrate(p, T, steps, record=True)
    states = np.einsum("jik,k->ji", us, problem.psi0)
    states /= np.linalg.norm(states, axis=1)[:, None]
    hs = 0.5 * (hs + np.swapaxes(hs.conj(), -1, -2))
    n = problem.n
    hs = hs - (np.trace(hs, axis1=1, axis2=2) / n)[:, None, None] * np.eye(n)
    dt = T / steps
    traj = Trajectory(dt, np.arange(steps + 1) * dt, states, hs)
    return traj, schedule_from_trajectory(traj)
