"""Checking a trajectory against the optimality conditions.

The verifier fits the constant multiplier ratios and tests three things:
the structure of F, its transport along the motion and the constraint
values. Closed-form solutions pass. A small random perturbation of the
Hamiltonians or the states fails.
"""
import numpy as np

from brachistochrone import SIGMA_Z, ConstraintSet, QubitFamily, Trajectory, verify_optimality
from brachistochrone.qubit import qubit_trajectory

cset = ConstraintSet(1.0, (SIGMA_Z,))
fam = QubitFamily(1, 2, 1.0)
traj = qubit_trajectory(fam, 400)

report = verify_optimality(traj, cset)
print("closed-form (1, 2):", "pass" if report.verdict else "fail")
print("  fitted lambda    :", report.lambda_global, " expected Omega =", fam.Omega)
print("  structure        :", report.residual_structure)
print("  transport        :", report.residual_transport)
print("  constraints      :", report.residual_constraints)

rng = np.random.default_rng(0)
noise = rng.normal(size=traj.hamiltonians.shape) + 1j * rng.normal(size=traj.hamiltonians.shape)
noise = noise + np.conj(np.swapaxes(noise, 1, 2))
noise -= np.trace(noise, axis1=1, axis2=2)[:, None, None] / 2 * np.eye(2)
bent = Trajectory(traj.dt, traj.times, traj.states, traj.hamiltonians + 1e-2 * noise)

report = verify_optimality(bent, cset)
print("perturbed H        :", "pass" if report.verdict else "fail")
print("  constraints      :", report.residual_constraints)
print("  transport        :", report.residual_transport)
