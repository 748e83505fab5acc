"""Ground states and the shadow frequency for the construction case."""

import math

import numpy as np

from polybump.params import PotentialSpec, SystemParams
from polybump.radial import ground_state
from polybump.shadow import compute_shadow

# 1D ground state against its sech closed form
U1 = ground_state(1.0, 1.0, 1)
r = np.linspace(0.0, 10.0, 201)
print("N=1 sup |U - sqrt(2) sech r| =", np.max(np.abs(U1(r) - math.sqrt(2) / np.cosh(r))))

# planar and spatial ground states at omega = mu = 1
for N in (2, 3):
    U = ground_state(1.0, 1.0, N)
    print(f"N={N}  U(0) = {U(0.0):.8f}  energy identity defect = {U.energy_identity_defect():.2e}")

# shadow: omega(y) = W - beta Y(y)^2 with constant potentials
p = SystemParams(beta=-0.25, k=2, m=1, dim=2, epsilon=0.1)
V = W = PotentialSpec("constant", (1.0,))
sh = compute_shadow(p, V, W)
print(f"omega0 = {sh.omega0:.5f}  Delta omega(0) = {sh.lap_omega0:.4f} (fd {sh.lap_omega0_fd:.4f})")
print("classification:", sh.classification.value)
