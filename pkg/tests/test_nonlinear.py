import math

import numpy as np
import pytest

from conftest import forms_for, spectrum_for
from frac_neumann.discretization import DiscreteFunction
from frac_neumann.nonlinear import (
    EnergyModel,
    SolverResult,
    classify,
    cone_project,
    energy,
    energy_expansion_check,
    energy_gradient,
    far_endpoint,
    gradient_flow,
    in_cone,
    initial_direction,
    mountain_pass,
    newton_refine,
    parse_solver_result,
    ray_maximum,
)
from frac_neumann.problem import G_antiderivative, ProblemParams, g_trunc, g_trunc_prime


def test_truncation_junction():
    p = ProblemParams(1, 0.45, 1.0, 4.0, ell=3.0, t0=2.0)
    assert g_trunc(p, 2.0) == pytest.approx(8.0)
    assert g_trunc_prime(p, 2.0 - 1e-12) == pytest.approx(12.0)
    assert g_trunc_prime(p, 2.0 + 1e-12) == pytest.approx(12.0)
    assert g_trunc(p, 4.0) == pytest.approx(44.0)


def test_truncation_inequalities():
    p = ProblemParams(1, 0.45, 1.0, 4.0, ell=3.0, t0=2.0)
    t = np.linspace(0, 50, 2001)
    assert np.all(g_trunc(p, t) <= t**3 * (1 + 1e-14))
    tt = t[t >= 1]
    assert np.all(g_trunc(p, tt) >= tt**2 * (1 - 1e-14))


def test_antiderivative():
    p = ProblemParams(1, 0.45, 1.0, 4.0, ell=3.0, t0=2.0)
    for b in (0.5, 2.0, 3.7, 10.0):
        x = np.linspace(0, b, 20001)
        assert G_antiderivative(p, b) == pytest.approx(np.trapezoid(g_trunc(p, x), x), rel=1e-6)


def test_untruncated_and_domain():
    p = ProblemParams(1, 0.45, 1.0, 3.5)
    assert g_trunc(p, 1.7) == pytest.approx(1.7**2.5)
    with pytest.raises(ValueError):
        g_trunc(p, -1.0)
    assert g_trunc(p, -2.0, extend=True) == 2.0
    assert G_antiderivative(p, -2.0, extend=True) == -2.0


def test_params_validation_and_flags():
    with pytest.raises(ValueError):
        ProblemParams(1, 0.45, 1.0, 2.0)
    with pytest.raises(ValueError):
        ProblemParams(1, 0.45, 1.0, 4.0, ell=5.0, t0=3.0)
    p = ProblemParams(1, 0.45, 0.5, 6.0)
    assert p.hypothesis_flags["q_above_spectral_threshold"] is None
    p2 = p.with_spectrum(3.0)
    assert p2.hypothesis_flags["q_above_spectral_threshold"] is True
    assert p2.hypothesis_flags["q_below_radial_bound"] is True


@pytest.fixture(scope="module")
def model():
    F = forms_for(0.45)
    return EnergyModel(ProblemParams(1, 0.45, 0.3, 4.0), F)


def test_energy_constants(model):
    F = model.forms
    N = F.mesh.size
    assert energy(model, np.zeros(N)) == 0.0
    assert energy(model, np.ones(N)) == pytest.approx(0.5, rel=1e-13)
    for c in (0.5, 1.0, 2.0):
        assert energy(model, np.full(N, c)) == pytest.approx(2 * (c * c / 2 - c**4 / 4), rel=1e-12)


def test_gradient_vanishes_at_constants(model):
    N = model.forms.mesh.size
    assert np.abs(energy_gradient(model, np.ones(N))).max() < 1e-12
    assert np.abs(energy_gradient(model, np.zeros(N))).max() == 0.0


def test_gradient_finite_differences(model, rng):
    F = model.forms
    u = F.extend(0.5 + np.cumsum(rng.uniform(0, 0.02, F.n_interior)))
    g = energy_gradient(model, u)
    for _ in range(5):
        v = rng.standard_normal(F.mesh.size)
        h = 1e-5
        fd = (energy(model, u + h * v) - energy(model, u - h * v)) / (2 * h)
        assert fd == pytest.approx(g @ v, rel=1e-6)


def test_params_mesh_mismatch():
    with pytest.raises(ValueError):
        EnergyModel(ProblemParams(1, 0.3, 1.0, 3.0), forms_for(0.45))


def test_cone_projection(model):
    F = model.forms
    nI = F.n_interior
    u = cone_project(F, -np.ones(F.mesh.size))
    assert np.all(u.interior_values == 0)
    w = F.extend(np.linspace(0, 1, nI) ** 2)
    assert np.allclose(cone_project(F, w).values, w)
    assert in_cone(F, w)
    rng = np.random.default_rng(0)
    c = F.lumped_mass[:nI]
    a, b = rng.standard_normal(nI), rng.standard_normal(nI)
    pa = cone_project(F, F.extend(a)).interior_values
    pb = cone_project(F, F.extend(b)).interior_values
    assert np.dot(c, (pa - pb) ** 2) <= np.dot(c, (a - b) ** 2) * (1 + 1e-12)
    pp = cone_project(F, cone_project(F, F.extend(a))).interior_values
    np.testing.assert_allclose(pp, pa, atol=1e-14)


def test_classify(model):
    F = model.forms
    N = F.mesh.size
    assert classify(F, np.zeros(N)) == "zero"
    assert classify(F, np.ones(N)) == "one"
    assert classify(F, F.extend(np.linspace(0.5, 1.5, F.n_interior))) == "nonconstant"


def test_ray_maximum_constant(model):
    t, e = ray_maximum(model, np.ones(model.forms.mesh.size))
    assert t == pytest.approx(1.0, rel=1e-12)
    assert e == pytest.approx(0.5, rel=1e-12)


def test_ray_maximum_truncated():
    F = forms_for(0.45)
    p = ProblemParams(1, 0.45, 0.3, 4.0, ell=3.0, t0=1.5)
    t, e = ray_maximum(EnergyModel(p, F), np.full(F.mesh.size, 0.5))
    assert t == pytest.approx(2.0, rel=1e-10)


def test_gradient_flow_from_one(model):
    r = gradient_flow(model, np.ones(model.forms.mesh.size))
    assert r.iterations == 0 and r.classification == "one" and r.converged


def test_gradient_flow_energy_monotone():
    F = forms_for(0.45)
    sp = spectrum_for(0.45)
    p = ProblemParams(1, 0.45, 0.2 * 4 / sp.lambda2_r_plus, 6.0)
    m = EnergyModel(p, F)
    u0 = cone_project(F, F.extend(0.5 + F.mesh.interior_nodes ** 4))
    r = gradient_flow(m, u0, max_iters=300)
    h = np.array(r.history)
    assert np.all(np.diff(h) <= 1e-12 * np.abs(h[:-1]).max())
    assert r.in_cone


def test_gradient_flow_fixed_step():
    F = forms_for(0.45)
    m = EnergyModel(ProblemParams(1, 0.45, 5.0, 3.0), F)
    u0 = cone_project(F, F.extend(1 + 0.1 * F.mesh.interior_nodes))
    r = gradient_flow(m, u0, step_rule=0.05, max_iters=2000)
    assert r.classification == "one"


def test_newton_from_one_and_perturbed():
    F = forms_for(0.3)
    sp = spectrum_for(0.3)
    m = EnergyModel(ProblemParams(1, 0.3, 200.0, 2.4), F)
    r = newton_refine(m, np.ones(F.mesh.size))
    assert r.converged and r.iterations <= 1
    rng = np.random.default_rng(4)
    r = newton_refine(m, F.extend(1 + 1e-3 * rng.standard_normal(F.n_interior)))
    assert r.converged and r.classification == "one" and r.residual_norm < 1e-11
    h = [x for x in r.history if x > 1e-14]
    ratios = [b / a**2 for a, b in zip(h, h[1:])]
    assert max(ratios) < 1e6


def test_initial_path_endpoints():
    F = forms_for(0.45)
    sp = spectrum_for(0.45)
    p = ProblemParams(1, 0.45, 0.5 * 4 / sp.lambda2_r_plus, 6.0).with_spectrum(sp.lambda2_r_plus)
    m = EnergyModel(p, F)
    w, tbar = initial_direction(F, sp)
    assert in_cone(F, w) and tbar <= 1e-2
    t_inf = far_endpoint(m, w)
    assert energy(m, 0 * w) == 0.0
    assert energy(m, t_inf * w) < 0


def test_solver_result_round_trip(tmp_path):
    F = forms_for(0.45)
    u = DiscreteFunction(F.mesh, np.linspace(0, 1, F.mesh.size))
    r = SolverResult(u, 0.125, 1e-12, "nonconstant", True, 12, path_max_energy=0.5, message="ok")
    r.save(tmp_path / "r.txt", 1, 0.45)
    back, meta = parse_solver_result((tmp_path / "r.txt").read_text())
    assert back.energy == r.energy and back.in_cone and back.iterations == 12
    assert np.array_equal(back.u.values, u.values)


def test_mountain_pass_small_d_energy_below_one():
    F = forms_for(0.45)
    sp = spectrum_for(0.45)
    p = ProblemParams(1, 0.45, 0.1 * 4 / sp.lambda2_r_plus, 6.0).with_spectrum(sp.lambda2_r_plus)
    m = EnergyModel(p, F)
    r = mountain_pass(m, sp)
    assert r.classification == "nonconstant"
    assert r.residual_norm < 1e-9
    assert r.energy < energy(m, np.ones(F.mesh.size))
    assert r.path_max_energy is not None


def test_energy_expansion_trivial_and_sign():
    F = forms_for(0.45)
    sp = spectrum_for(0.45)
    p = ProblemParams(1, 0.45, 0.5 * 4 / sp.lambda2_r_plus, 6.0)
    rows = energy_expansion_check(EnergyModel(p, F), sp, [0.0, 1e-2])
    assert rows[0]["measured"] == pytest.approx(0.0, abs=1e-15)
    assert rows[1]["measured"] < 0 and rows[1]["predicted"] < 0
