"""Explicit constants and their drift as q approaches 2.

Run with ``python3 demos/constants.py``.
"""
from frac_neumann import ProblemParams, compute_constants, small_q_limit_check

rep = compute_constants(ProblemParams(1, 0.25, 1.0, 2.5), None, 1.0)
for key in ("two_star_n", "b", "C0", "K_mass", "K_q", "K_infty", "Lambda_q", "gamma_q"):
    print(f"{key:>10} = {getattr(rep, key):.8g}")

out = small_q_limit_check(1, 0.45, [2.5, 2.2, 2.1, 2.05, 2.01, 2.001, 2.0001])
print("\n     q   K_infty^(q-2)")
for q, v in out["rows"]:
    print(f"{q:8.4f}  {v:.6g}")
