"""Fastest transfer with only an energy-scale budget.

When the only restriction is Tr H^2 / 2 = omega^2, the optimal Hamiltonian
is constant and moves the state along the shortest Fubini-Study path.
This demo solves a random qutrit problem, integrates the Schrodinger
equation numerically and compares the distance walked with omega T.
"""
import numpy as np

from brachistochrone import aa_residual, fubini_study_distance, geodesic_residual, path_length, solve_isotropic
from brachistochrone.isotropic import evolved_trajectory, verify_reduced_equations

rng = np.random.default_rng(1)
psi_i = rng.normal(size=3) + 1j * rng.normal(size=3)
psi_f = rng.normal(size=3) + 1j * rng.normal(size=3)
psi_i /= np.linalg.norm(psi_i)
psi_f /= np.linalg.norm(psi_f)

omega = 1.0
sol = solve_isotropic(psi_i, psi_f, omega)
print("optimal time T          :", sol.T)
print("arccos|<f|i>| / omega   :", np.arccos(abs(np.vdot(psi_f, psi_i))) / omega)
print("eigenvalues of H        :", np.round(np.linalg.eigvalsh(sol.h_tilde), 12))

# integrate psi_i under the constant Hamiltonian
traj = evolved_trajectory(sol, 2000)
psi_T = traj.states[-1]
print("final infidelity        :", 1.0 - abs(np.vdot(psi_f, psi_T)) ** 2)

# the path is a geodesic travelled at constant speed dE = omega
print("path length / (omega T) :", path_length(traj) / (omega * sol.T))
print("FS distance / (omega T) :", fubini_study_distance(psi_i, psi_f) / (omega * sol.T))
print("AA residual             :", aa_residual(traj))
print("geodesic residual       :", geodesic_residual(traj))

# reduced optimality equations hold along the closed form
print(verify_reduced_equations(sol, 200))
