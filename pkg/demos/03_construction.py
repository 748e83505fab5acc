"""Ansatz, corrections and a Newton solve for the construction case at eps = 0.1."""

import numpy as np

from polybump import acceptance as ac
from polybump import solver as sv

case = ac.construction_case()
pred = case.predicted(0.1)
print(f"predicted t = {pred.t:.4f}  d_eff = {pred.d_eff:.4f}  (limit {pred.d_limit:.4f})")

a = case.ansatz(0.1, pred.rho, quick=True)
print(f"grid nodes = {a.grid.size}  sup|Phi| = {np.max(np.abs(a.phi)):.4f}  sup|Psi| = {np.max(np.abs(a.psi)):.4f}")
print("Psi against the kernel direction:", a.extras["z_component"])

res = sv.newton_solve(a, tol=1e-10)
print(f"Newton: {res.newton_iters} iterations, residual {res.residual:.2e}, positive {res.positive}")
print(f"solution peak t = {res.peak_t:.4f}  vs predicted {pred.t:.4f}")
