import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import null_space

from brachistochrone.errors import (
    ConstraintInfeasible,
    DegenerateEndpoints,
    IndeterminateMultipliers,
    NoConvergence,
)
from brachistochrone.general import (
    ShootingOptions,
    ShootingParameters,
    Tolerances,
    build_F,
    constraint_value,
    shoot,
    trajectory_propagators,
    verify_optimality,
)
from brachistochrone.hilbert import SIGMA_X, SIGMA_Y, SIGMA_Z, ConstraintSet, projector
from brachistochrone.isotropic import geodesic_trajectory, solve_isotropic
from brachistochrone.propagator import Trajectory, propagators
from brachistochrone.qubit import ANTIPODE_STATE, INITIAL_STATE, QubitFamily, qubit_trajectory

from conftest import random_hermitian, random_state

QUBIT_Z = ConstraintSet(1.0, (SIGMA_Z,))
QUBIT_FREE = ConstraintSet(1.0)


# -- constraint values and F -------------------------------------------------

def test_constraint_value_examples():
    w = 1.3
    cs = ConstraintSet(w, (SIGMA_Z,))
    assert np.allclose(constraint_value(cs, -w * SIGMA_Y), [0, 0], atol=1e-15)
    assert np.allclose(constraint_value(cs, w * SIGMA_Z), [0, 2 * w])
    assert np.allclose(constraint_value(cs, np.zeros((2, 2))), [-w * w, 0])


def test_build_F_examples(rng):
    # on the equator <H> = <sigma_z> = 0, so F is the plain combination
    psi = np.array([1, np.exp(0.4j)]) / np.sqrt(2)
    h = -(-np.sin(0.4) * SIGMA_X + np.cos(0.4) * SIGMA_Y)
    f = build_F(QUBIT_Z, [1.0, 0.3], h, psi)
    assert np.allclose(f, h + 0.3 * SIGMA_Z, atol=1e-15)
    # isotropic-only reduction
    psi3 = random_state(rng, 3)
    h3 = random_hermitian(rng, 3, traceless=True)
    h3 -= np.vdot(psi3, h3 @ psi3).real * (projector(psi3) - np.eye(3) / 3) / (1 - 1 / 3)
    assert abs(np.vdot(psi3, h3 @ psi3)) < 1e-12
    cs3 = ConstraintSet(1.0, (random_hermitian(rng, 3, True), random_hermitian(rng, 3, True)))
    assert np.allclose(build_F(cs3, [1, 0, 0], h3, psi3), h3, atol=1e-12)


def test_build_F_rejects_mismatches():
    with pytest.raises(ValueError):
        build_F(QUBIT_Z, [1.0], -SIGMA_Y, INITIAL_STATE)
    with pytest.raises(ValueError):
        build_F(QUBIT_Z, [1.0, 0.0], np.zeros((3, 3)), INITIAL_STATE)
    with pytest.raises(ValueError):
        build_F(QUBIT_Z, [1.0, 0.0], np.zeros((3, 3)), np.eye(3)[0])


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_F_expectation_and_trace_identity(seed):
    rng = np.random.default_rng(seed)
    n = 3
    cs = ConstraintSet(1.0, (random_hermitian(rng, n, True), random_hermitian(rng, n, True)))
    lam = rng.normal(size=3)
    h, psi = random_hermitian(rng, n, True), random_state(rng, n)
    f = build_F(cs, lam, h, psi)
    assert np.allclose(f, f.conj().T, atol=1e-14)
    assert abs(np.vdot(psi, f @ psi)) < 1e-11
    # Tr F = -sum lambda_a <G_a> for arbitrary inputs ...
    means = [np.vdot(psi, g @ psi).real for g in (h, *cs.forbidden)]
    assert abs(np.trace(f) + np.dot(lam, means)) < 1e-11
    # ... and vanishes once the structure condition F = FP + PF holds
    p = projector(psi)
    g = f - (f @ p + p @ f)
    assert abs(np.trace(f) - np.trace(g) - 2 * np.vdot(psi, f @ psi).real) < 1e-11


def test_F_trace_vanishes_on_solutions():
    fam = QubitFamily(1, 2, 1.0)
    traj = qubit_trajectory(fam, 50)
    for _, psi, h in traj:
        f = build_F(QUBIT_Z, [1.0, fam.Omega], h, psi)
        assert abs(np.trace(f)) < 1e-11 and abs(np.vdot(psi, f @ psi)) < 1e-11


# -- F(0) parameterization ----------------------------------------------------

def hermitian_basis(n):
    out = []
    for i in range(n):
        e = np.zeros((n, n), complex)
        e[i, i] = 1
        out.append(e)
        for j in range(i + 1, n):
            s = np.zeros((n, n), complex)
            s[i, j] = s[j, i] = 1
            a = np.zeros((n, n), complex)
            a[i, j], a[j, i] = -1j, 1j
            out += [s, a]
    return out


@pytest.mark.parametrize("n", [2, 3])
def test_F0_parameterization_spans_structure_solutions(n, rng):
    psi = random_state(rng, n)
    p = projector(psi)
    basis = hermitian_basis(n)
    # brute force: F = sum x_b B_b with F - (FP + PF) = 0 and <F> = 0
    cols = []
    for b in basis:
        d = b - (b @ p + p @ b)
        cols.append(np.concatenate([d.real.ravel(), d.imag.ravel(), [np.vdot(psi, b @ psi).real]]))
    sols = null_space(np.array(cols).T)
    assert sols.shape[1] == 2 * (n - 1)
    # every parameterized F(0) = |psi><v| + |v><psi| with v orthogonal to psi solves it
    q = null_space(psi.conj()[None, :])
    param = []
    for k in range(n - 1):
        for c in (1, 1j):
            v = c * q[:, k]
            f = np.outer(psi, v.conj()) + np.outer(v, psi.conj())
            assert np.max(np.abs(f - (f @ p + p @ f))) < 1e-12
            param.append(np.linalg.lstsq(
                np.array([np.concatenate([b.real.ravel(), b.imag.ravel()]) for b in basis]).T,
                np.concatenate([f.real.ravel(), f.imag.ravel()]), rcond=None)[0])
    param = np.array(param).T
    # same subspace: ranks agree and the union adds nothing
    assert np.linalg.matrix_rank(param, tol=1e-10) == 2 * (n - 1)
    assert np.linalg.matrix_rank(np.hstack([param, sols]), tol=1e-10) == 2 * (n - 1)


# -- verifier ----------------------------------------------------------------

def test_isotropic_trajectory_passes(rng):
    sol = solve_isotropic(random_state(rng, 3), random_state(rng, 3), 1.0)
    rep = verify_optimality(geodesic_trajectory(sol, 1000), ConstraintSet(1.0))
    assert rep.verdict
    assert max(rep.residual_structure, rep.residual_transport, rep.residual_constraints) < 1e-8
    assert rep.lambda_constant


@pytest.mark.parametrize("kl", [(1, 2), (2, 3), (1, 4), (3, 4), (2, 5), (4, 5)])
def test_qubit_families_pass_with_fitted_omega(kl):
    fam = QubitFamily(*kl, 1.0)
    rep = verify_optimality(qubit_trajectory(fam, 1000), QUBIT_Z)
    assert rep.verdict, rep.to_dict()
    assert abs(rep.lambda_global[0] - fam.Omega) < 1e-6
    assert rep.lambda_constant
    finite = rep.lambda_fit[~np.isnan(rep.lambda_fit[:, 0]), 0]
    assert np.max(np.abs(finite - fam.Omega)) < 1e-6
    assert rep.residual_projected < 1e-3  # central differences, O(dt^2)
    rep_m = verify_optimality(qubit_trajectory(fam.mirrored(), 1000), QUBIT_Z)
    assert rep_m.verdict and abs(rep_m.lambda_global[0] + fam.Omega) < 1e-6


def test_sigma_z_perturbation_fails():
    w = 1.0
    traj = qubit_trajectory(QubitFamily(1, 2, w), 500)
    bad = Trajectory(traj.dt, traj.times, traj.states, traj.hamiltonians + 0.05 * w * SIGMA_Z)
    rep = verify_optimality(bad, QUBIT_Z)
    assert rep.residual_constraints >= 0.05 * w * 2 - 1e-12
    assert not rep.verdict


def test_great_circle_and_stationary_cases():
    w = 1.0
    t = np.linspace(0, 1, 201)
    psi = np.array([[np.cos(w * s), -1j * np.sin(w * s)] for s in t])
    hams = np.tile(w * SIGMA_X, (t.size, 1, 1))
    traj = Trajectory(t[1], t, psi, hams)
    rep = verify_optimality(traj, ConstraintSet(w, (SIGMA_Z,)))
    assert rep.verdict  # rotation about x from |0> is a great circle: a genuine optimum
    # |+x> is an eigenstate of the same field: nothing moves and no multiplier is fixed
    psi2 = np.array([np.cos(w * s) * INITIAL_STATE - 1j * np.sin(w * s) * (SIGMA_X @ INITIAL_STATE) for s in t])
    with pytest.raises(IndeterminateMultipliers):
        verify_optimality(Trajectory(t[1], t, psi2, hams), QUBIT_Z)


def test_tolerances_control_verdict():
    traj = qubit_trajectory(QubitFamily(1, 2, 1.0), 200)
    assert verify_optimality(traj, QUBIT_Z).verdict
    strict = Tolerances(structure=0.0)
    assert not verify_optimality(traj, QUBIT_Z, strict).verdict


def test_propagators_agree_with_package_propagation():
    fam = QubitFamily(2, 3, 1.0)
    traj = qubit_trajectory(fam, 1000)
    from brachistochrone.qubit import qubit_schedule

    ref = propagators(qubit_schedule(fam), 1000)
    assert np.max(np.abs(trajectory_propagators(traj) - ref)) < 1e-9


def test_report_serializes():
    rep = verify_optimality(qubit_trajectory(QubitFamily(1, 2, 1.0), 100), QUBIT_Z)
    d = rep.to_dict()
    assert d["verdict"] == "pass"
    assert len(d["lambda_fit"]) == 101
    assert any(row[0] is None for row in d["lambda_fit"])  # equator crossings


# -- shooting ---------------------------------------------------------------

FAST = ShootingOptions(restarts=4, output_steps=400)


def test_shoot_antipode_with_forbidden_z():
    res = shoot(INITIAL_STATE, ANTIPODE_STATE, QUBIT_Z, options=FAST)
    sched, traj, params = res
    assert abs(params.T - np.pi / 2) < 1e-6 * np.pi / 2
    assert abs(params.lambda_ratios[0]) < 1e-5
    assert res.infidelity < 1e-14
    assert abs(0.5 * np.trace(params.h0 @ params.h0).real - 1.0) < 1e-10
    assert abs(np.trace(params.h0 @ SIGMA_Z)) < 1e-10
    assert sched.T == params.T and traj.T == pytest.approx(params.T, rel=1e-14)


def test_shoot_without_forbidden_matches_isotropic(rng):
    for n in (2, 3):
        psi_i, psi_f = random_state(rng, n), random_state(rng, n)
        _, traj, params = shoot(psi_i, psi_f, ConstraintSet(1.0), options=FAST)
        T_iso = solve_isotropic(psi_i, psi_f, 1.0).T
        assert abs(params.T - T_iso) < 1e-6 * T_iso
        assert verify_optimality(traj, ConstraintSet(1.0)).verdict


def test_shoot_from_second_branch_seed():
    fam = QubitFamily(1, 2, 1.0)
    seed = ShootingParameters(np.array([fam.Omega * 1.03]), -SIGMA_Y, fam.T * 0.98)
    opts = ShootingOptions(restarts=2, spread=0.02, output_steps=1000)
    res = shoot(INITIAL_STATE, ANTIPODE_STATE, QUBIT_Z, params0=seed, options=opts)
    assert abs(res.params.T - fam.T) < 1e-5 * fam.T
    assert abs(res.params.lambda_ratios[0] - fam.Omega) < 1e-5
    rep = verify_optimality(res.trajectory, QUBIT_Z)
    assert rep.verdict and abs(rep.lambda_global[0] - fam.Omega) < 1e-6


def test_shoot_output_invariants(rng):
    psi_i, psi_f = random_state(rng, 3), random_state(rng, 3)
    a = random_hermitian(rng, 3, True)
    cs = ConstraintSet(1.0, (a,))
    res = shoot(psi_i, psi_f, cs, options=ShootingOptions(restarts=6, output_steps=600))
    traj, params = res.trajectory, res.params
    lam = np.concatenate([[1.0], params.lambda_ratios])
    f = np.array([build_F(cs, lam, h, psi) for _, psi, h in traj])
    spectra = np.linalg.eigvalsh(f)
    assert np.max(np.abs(spectra - spectra[0])) < 1e-8
    p0 = projector(traj.states[0])
    assert np.max(np.abs(f[0] - (f[0] @ p0 + p0 @ f[0]))) < 1e-11
    values = np.array([constraint_value(cs, h) for h in traj.hamiltonians])
    assert np.max(np.abs(values)) < 1e-7
    assert params.T >= solve_isotropic(psi_i, psi_f, 1.0).T - 1e-9
    assert all(o.T > 0 for o in res.restarts)


def test_shoot_is_deterministic():
    a = shoot(INITIAL_STATE, ANTIPODE_STATE, QUBIT_Z, options=ShootingOptions(restarts=2, output_steps=50))
    b = shoot(INITIAL_STATE, ANTIPODE_STATE, QUBIT_Z, options=ShootingOptions(restarts=2, output_steps=50))
    assert a.params.T == b.params.T
    assert np.array_equal(a.trajectory.states, b.trajectory.states)


def test_shoot_errors():
    with pytest.raises(DegenerateEndpoints):
        shoot(INITIAL_STATE, -INITIAL_STATE, QUBIT_Z, options=FAST)
    full = ConstraintSet(1.0, (SIGMA_X, SIGMA_Y, SIGMA_Z))
    with pytest.raises(ConstraintInfeasible):
        shoot(INITIAL_STATE, ANTIPODE_STATE, full, options=FAST)
    with pytest.raises(NoConvergence):
        shoot(INITIAL_STATE, ANTIPODE_STATE, QUBIT_Z,
              params0=ShootingParameters(np.array([0.4]), -SIGMA_Y, 0.5),
              options=ShootingOptions(restarts=1, maxiter=2, output_steps=50))
    with pytest.raises(ValueError):
        shoot(INITIAL_STATE, ANTIPODE_STATE, ConstraintSet(1.0, (np.diag([1, -1, 0]),)), options=FAST)


def test_transported_hamiltonian_matches_direct_recovery(rng):
    from brachistochrone.general import _ShootingProblem

    n = 3
    cs = ConstraintSet(1.0, (random_hermitian(rng, n, True), random_hermitian(rng, n, True)))
    prob = _ShootingProblem(random_state(rng, n), random_state(rng, n), cs)
    p = prob.N @ rng.normal(size=prob.N.shape[1])
    v, mu = prob.split(p)
    f0 = np.outer(prob.psi0, v.conj()) + np.outer(v, prob.psi0.conj())
    q, _ = np.linalg.qr(rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n)))
    direct = prob.recover(q @ f0 @ q.conj().T, q @ prob.psi0, mu)
    assert np.max(np.abs(prob.hamiltonian_along(p)(q) - direct)) < 1e-12
    assert abs(np.trace(direct)) < 1e-12
