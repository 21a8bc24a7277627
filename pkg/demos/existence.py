"""Non-constant radial solution for n=1, s=0.45, q=6 via the mountain pass.

Run with ``python3 demos/existence.py``.
"""
import numpy as np

from frac_neumann import (
    EnergyModel,
    KernelConfig,
    ProblemParams,
    assemble_forms,
    build_mesh,
    compute_spectrum,
    energy,
    mountain_pass,
)

s, q = 0.45, 6.0
forms = assemble_forms(build_mesh(200, 50, 8.0, 2.0), KernelConfig(1, s))
spec = compute_spectrum(forms)
d = 0.5 * (q - 2.0) / spec.lambda2_r_plus
params = ProblemParams(1, s, d, q).with_spectrum(spec.lambda2_r_plus)
model = EnergyModel(params, forms)

res = mountain_pass(model, spec)
x = res.u.interior_values
print(f"lambda2_r = {spec.lambda2_r:.6f}  lambda2_r_plus = {spec.lambda2_r_plus:.6f}")
print(f"d = {d:.6f}  q - 2 - d*lambda2_r_plus = {q - 2 - d * spec.lambda2_r_plus:.4f}")
print(f"classification = {res.classification}  residual = {res.residual_norm:.2e}")
print(f"E(u) = {res.energy:.6f}  E(1) = {energy(model, np.ones(forms.mesh.size)):.6f}")
print(f"u(0) = {x[0]:.4f}  u(1) = {x[-1]:.4f}  max u = {x.max():.4f}  in_cone = {res.in_cone}")
