"""Large diffusion: every run collapses to a constant (n=1, s=0.3, q=2.4).

Run with ``python3 demos/nonexistence.py``.
"""
import numpy as np

from frac_neumann import (
    EnergyModel,
    KernelConfig,
    ProblemParams,
    assemble_forms,
    build_mesh,
    compute_constants,
    compute_spectrum,
    cone_project,
    critical_exponent,
    embedding_constant_estimate,
    gradient_flow,
)

s, q = 0.3, 2.4
forms = assemble_forms(build_mesh(200, 50, 8.0, 2.0), KernelConfig(1, s))
spec = compute_spectrum(forms)
C = embedding_constant_estimate(forms, critical_exponent(1, s))
rep = compute_constants(ProblemParams(1, s, 1.0, q), spec, C)
print(f"C_embed ~ {C:.4f}  K_infty = {rep.K_infty:.4g}  d* = {rep.d_star:.4g}  d** = {rep.d_star_star:.4g}")

rng = np.random.default_rng(0)
for factor in (2, 5):
    model = EnergyModel(ProblemParams(1, s, factor * rep.d_star, q), forms)
    seen = {}
    for eps in (0.05, 0.2):
        for _ in range(10):
            w = np.sort(rng.uniform(0, 1, forms.n_interior))
            u0 = cone_project(forms, forms.extend(1 + eps * w))
            res = gradient_flow(model, u0)
            seen[res.classification] = seen.get(res.classification, 0) + 1
    print(f"d = {factor} d*: {seen}")
