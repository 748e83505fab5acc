"""Peak-radius balance: d_eff = rho / (eps |ln eps|) creeping toward its limit."""

from dataclasses import replace

from polybump.balance import BalanceProblem, solve_balance, sweep_d

tpl = BalanceProblem("alpha_zero", 1.0, 2, 1, 2, (1.0, 1.0), 1e-4)
print("d_limit =", tpl.d_limit)

for eps in (1e-2, 1e-4, 1e-8, 1e-12):
    s = solve_balance(replace(tpl, epsilon=eps))
    print(f"eps = {eps:7.0e}  t = {s.t:8.4f}  d_eff = {s.d_eff:.5f}  ratio = {s.d_eff / tpl.d_limit:.4f}")

sw = sweep_d(tpl, (1e-2, 1e-3, 1e-4, 1e-5, 1e-6))
print("monotone:", sw.monotone, " best correction model:", sw.best_model)
