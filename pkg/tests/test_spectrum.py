import numpy as np
import pytest

from conftest import forms_for, spectrum_for
from frac_neumann.projections import isotonic, monotone_nonnegative, monotone_zero_mean, tie_blocks
from frac_neumann.spectrum import (
    compute_spectrum,
    rayleigh_quotient,
    second_eigenvalue,
    second_monotone_eigenvalue,
)


def test_isotonic_two_points():
    x, blocks = isotonic([3.0, 1.0], [1.0, 1.0])
    np.testing.assert_allclose(x, [2.0, 2.0])
    assert list(blocks) == [0, 2]


def test_projection_idempotent(rng):
    w = rng.uniform(0.5, 2, 50)
    y = rng.standard_normal(50)
    p1, _ = monotone_zero_mean(y, w)
    p2, _ = monotone_zero_mean(p1, w)
    assert np.abs(p1 - p2).max() <= 1e-14 * max(1.0, np.abs(p1).max())
    assert abs(np.dot(w, p1)) < 1e-12
    assert np.all(np.diff(p1) >= -1e-14)
    q1 = monotone_nonnegative(y, w)
    np.testing.assert_allclose(monotone_nonnegative(q1, w), q1, atol=1e-15)


def test_tie_blocks():
    assert list(tie_blocks([0, 0, 1, 1, 1, 2])) == [0, 2, 5, 6]


def test_rayleigh_quotient_basics(forms045, rng):
    F = forms045
    assert rayleigh_quotient(F, np.ones(F.mesh.size)) < 1e-12
    v = F.extend(rng.standard_normal(F.n_interior))
    assert rayleigh_quotient(F, 4 * v) == pytest.approx(rayleigh_quotient(F, v), rel=1e-13)
    with pytest.raises(ZeroDivisionError):
        rayleigh_quotient(F, np.concatenate([np.zeros(F.n_interior), np.ones(F.mesh.n_exterior)]))


def test_second_eigenvalue(forms045, rng):
    F = forms045
    lam, phi, res = second_eigenvalue(F, full_output=True)
    assert res <= 1e-9
    assert abs(phi.values @ F.mass @ np.ones(F.mesh.size)) < 1e-12
    assert phi.values @ F.mass @ phi.values == pytest.approx(1.0)
    assert phi.interior_values[-1] > 0
    c = F.lumped_mass[: F.n_interior]
    for _ in range(1000):
        v = rng.standard_normal(F.n_interior) * rng.uniform(0, 3) ** np.arange(F.n_interior) % 7
        v = v - np.dot(c, v) / c.sum()
        assert rayleigh_quotient(F, F.extend(v)) >= lam * (1 - 1e-12)


def test_spectrum_invariants(spec045, forms045):
    sp = spec045
    assert 0 < sp.lambda2 <= sp.lambda2_r <= sp.lambda2_r_plus + 1e-10
    phi = sp.phi2
    F = forms045
    assert abs(phi.values @ F.mass @ np.ones(F.mesh.size)) <= 1e-10
    assert np.all(np.diff(phi.interior_values) >= -1e-12)
    assert rayleigh_quotient(F, phi) == pytest.approx(sp.lambda2_r_plus, rel=1e-10)
    assert sp.residuals["lambda2_r_plus"] <= 1e-8
    assert sp.lambda2_is_radial


def test_monotone_eigenvalue_beats_random_feasible(spec045, forms045, rng):
    F = forms045
    c = F.lumped_mass[: F.n_interior]
    for _ in range(1000):
        inc = rng.exponential(size=F.n_interior) ** rng.uniform(0.5, 4)
        v, _ = monotone_zero_mean(np.cumsum(inc), c)
        assert rayleigh_quotient(F, F.extend(v)) >= spec045.lambda2_r_plus * (1 - 1e-12)


def test_constraint_inactive_coincides():
    # at s = 0.7 the radial eigenfunction is monotone, so both values agree
    F = forms_for(0.7, 100, 30)
    lam, phi = second_eigenvalue(F)
    lp, _ = second_monotone_eigenvalue(F, restarts=4)
    if np.all(np.diff(phi.interior_values) >= 0):
        assert lp == pytest.approx(lam, rel=1e-8)
    else:
        assert lp >= lam


def test_restart_stability():
    a = spectrum_for(0.45, restarts=16).lambda2_r_plus
    b = spectrum_for(0.45, restarts=64).lambda2_r_plus
    assert float(f"{a:.3g}") == float(f"{b:.3g}")


def test_mesh_doubling_stability():
    for s in (0.3, 0.45):
        a, b = spectrum_for(s), spectrum_for(s, refinements=1)
        assert b.lambda2_r == pytest.approx(a.lambda2_r, rel=5e-3)
        assert b.lambda2_r_plus == pytest.approx(a.lambda2_r_plus, rel=5e-3)


def test_seed_determinism(forms045):
    a = compute_spectrum(forms045, seed=7)
    b = compute_spectrum(forms045, seed=7)
    assert a.lambda2_r_plus == b.lambda2_r_plus
    assert np.array_equal(a.phi2.values, b.phi2.values)
