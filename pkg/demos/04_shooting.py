"""Numerical shooting for constrained problems without a closed form.

The shooting solver searches over the multiplier ratios, the initial
Hamiltonian and the duration so that the propagated state lands on the
target ray. The first problem is the qubit with sigma_z forbidden, whose
answer pi/(2 omega) is known. The second is a qutrit with one forbidden
direction, where the answer can be compared with the unconstrained lower
bound and checked by the verifier.
"""
import numpy as np

from brachistochrone import ConstraintSet, SIGMA_Z, ShootingOptions, shoot, solve_isotropic, verify_optimality
from brachistochrone.qubit import ANTIPODE_STATE, INITIAL_STATE

opts = ShootingOptions(restarts=8, seed=0)
res = shoot(INITIAL_STATE, ANTIPODE_STATE, ConstraintSet(1.0, (SIGMA_Z,)), options=opts)
print("qubit: T =", res.params.T, " pi/2 =", np.pi / 2)
print("  lambda ratio      :", res.params.lambda_ratios)
print("  converged restarts:", sum(o.converged for o in res.restarts), "of", len(res.restarts))

psi_i = np.array([1, 0, 0], dtype=complex)
psi_f = np.array([0.5, 0.5j, np.sqrt(0.5)])
forbid = np.diag([1.0, -1.0, 0.0]).astype(complex)
cset = ConstraintSet(1.0, (forbid,))
res = shoot(psi_i, psi_f, cset, options=ShootingOptions(restarts=8, seed=3))
print("qutrit: T =", res.params.T, " unconstrained bound =", solve_isotropic(psi_i, psi_f, 1.0).T)
print("  terminal infidelity:", res.infidelity)
print("  verifier           :", "pass" if verify_optimality(res.trajectory, cset).verdict else "fail")
