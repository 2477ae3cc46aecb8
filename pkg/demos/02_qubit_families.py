"""Qubit with a forbidden sigma_z component.

Forbidding sigma_z leaves a field that rotates in the x-y plane. Each
branch (k, l) of locally optimal solutions reaches the antipode of the
initial |+x> state after (pi/2) sqrt(l^2 - k^2) / omega. This demo prints
the family table and the node structure, checks the minimum energy spread,
and writes Bloch-sphere data for plotting to ./demo_out.
"""
from pathlib import Path

import numpy as np

from brachistochrone import bloch_trajectory, count_nodes, enumerate_families, global_optimum
from brachistochrone.io import bloch_to_csv
from brachistochrone.qubit import ANTIPODE_STATE, node_times, scan_arrival, variance_profile

omega = 1.0
out = Path("demo_out")
out.mkdir(exist_ok=True)

print(f"{'k':>2} {'l':>2} {'omega T':>10} {'Omega/omega':>12} {'nodes':>5} {'min dE':>10}")
for fam in enumerate_families(omega, 5):
    bt = bloch_trajectory(fam, 2001)
    spread = variance_profile(fam, bt.t)
    print(f"{fam.k:>2} {fam.l:>2} {omega * fam.T:>10.6f} {fam.Omega / omega:>12.6f} "
          f"{count_nodes(bt):>5} {spread.min():>10.6f}")
    bloch_to_csv(bt, out / f"bloch_k{fam.k}_l{fam.l}.csv")

# the slowest point of the (1, 2) branch sits at a node, where dE = omega^2 / Omega'
fam = enumerate_families(omega, 2)[1]
print("node times of (1, 2)    :", node_times(fam))
print("omega^2 / Omega'        :", omega**2 / fam.OmegaPrime)

# (0, 1) is the global optimum for the antipode
best = global_optimum(enumerate_families(omega, 5), ANTIPODE_STATE)
print("global optimum          :", (best.k, best.l), "duration", best.duration)

# a target off the antipode, reached by a rotating field at a scanned rate
target = np.array([np.cos(0.4), np.exp(0.7j) * np.sin(0.4)])
sol = scan_arrival(target, omega)
print("scan: Omega/omega = %.6f, arrival = %.6f" % (sol.Omega / omega, sol.duration))
print("wrote Bloch data to", out)
