import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad
from scipy.stats import qmc

from frac_neumann.discretization import DiscreteFunction, build_mesh
from frac_neumann.kernel_core import (
    KernelConfig,
    angular_kernel,
    ball_volume,
    neumann_derivative,
    neumann_extension,
    normalization_constant,
    pointwise_fractional_laplacian,
    sphere_area,
)


def test_normalization_half_order_line():
    assert normalization_constant(1, 0.5) == pytest.approx(1 / math.pi, rel=1e-14)


@pytest.mark.parametrize("n,s", [(2, 0.5), (1, 0.3), (3, 0.75), (2, 0.1)])
def test_normalization_against_mpmath(n, s):
    mp = mpmath.mpf
    ref = mp(s) * 4 ** mp(s) * mpmath.gamma((n + 2 * mp(s)) / 2) / (mpmath.pi ** (mp(n) / 2) * mpmath.gamma(1 - mp(s)))
    assert normalization_constant(n, s) == pytest.approx(float(ref), rel=1e-12)


def test_normalization_vanishes_with_s():
    vals = [normalization_constant(1, s) for s in (1e-2, 1e-4, 1e-6)]
    assert vals[0] > vals[1] > vals[2] > 0 and vals[2] < 1e-5


def test_config_rejects_bad_constant():
    with pytest.raises(ValueError):
        KernelConfig(1, 0.3, c_ns=1.0)
    with pytest.raises(ValueError):
        KernelConfig(1, 1.2)


def test_ball_and_sphere():
    assert ball_volume(1) == pytest.approx(2.0)
    assert ball_volume(3) == pytest.approx(4 * math.pi / 3)
    assert sphere_area(2) == pytest.approx(2 * math.pi)
    assert sphere_area(3) == pytest.approx(4 * math.pi)


def test_angular_kernel_line_closed_form():
    cfg = KernelConfig(1, 0.25)
    assert angular_kernel(cfg, 0.5, 1.0) == pytest.approx(0.5**-1.5 + 1.5**-1.5, rel=1e-14)
    assert angular_kernel(cfg, 0.5, 1.0) == pytest.approx(3.37275817, rel=1e-8)


def test_angular_kernel_diagonal_raises():
    with pytest.raises(ValueError):
        angular_kernel(KernelConfig(2, 0.3), 0.4, 0.4)


@settings(max_examples=40, deadline=None)
@given(n=st.integers(1, 4), s=st.floats(0.05, 0.95),
       r=st.floats(0.0, 5.0), rho=st.floats(0.0, 5.0))
def test_angular_kernel_symmetric(n, s, r, rho):
    if abs(r - rho) < 1e-6:
        return
    cfg = KernelConfig(n, s)
    assert angular_kernel(cfg, r, rho) == pytest.approx(angular_kernel(cfg, rho, r), rel=1e-12)


def _theta_oracle(n, s, r, rho):
    p = (n + 2 * s) / 2
    f = lambda t: (r * r + rho * rho - 2 * r * rho * math.cos(t)) ** (-p) * math.sin(t) ** (n - 2)
    return sphere_area(n - 1) * quad(f, 0, math.pi, epsabs=0, epsrel=1e-12, limit=200)[0]


def test_angular_kernel_three_dim_oracle():
    cfg = KernelConfig(3, 0.4)
    ref = 2 * math.pi * quad(lambda t: (0.9 + 0.81 - 0.54 * math.cos(t)) ** -1.9 * math.sin(t) + 0 * t,
                             0, math.pi, epsrel=1e-13)[0]
    ref = _theta_oracle(3, 0.4, 0.3, 0.9)
    assert angular_kernel(cfg, 0.3, 0.9) == pytest.approx(ref, rel=1e-8)
    quadcfg = KernelConfig(3, 0.4, angular_method="quadrature")
    assert angular_kernel(quadcfg, 0.3, 0.9) == pytest.approx(ref, rel=1e-8)


@pytest.mark.parametrize("n,s,r,rho", [(2, 0.3, 0.5, 0.7), (2, 0.8, 0.99, 1.01), (4, 0.45, 0.2, 2.0),
                                       (3, 0.6, 0.999, 1.0)])
def test_angular_quadrature_oracle(n, s, r, rho):
    cfg = KernelConfig(n, s, angular_method="quadrature")
    assert angular_kernel(cfg, r, rho) == pytest.approx(_theta_oracle(n, s, r, rho), rel=1e-8)


def test_closed_form_matches_quadrature_path():
    r = np.array([0.1, 0.5, 0.9, 0.999, 1.5, 3.0])
    rho = np.array([0.3, 0.55, 1.1, 1.0, 7.0, 0.0])
    a = angular_kernel(KernelConfig(3, 0.3), r, rho)
    b = angular_kernel(KernelConfig(3, 0.3, angular_method="quadrature"), r, rho)
    np.testing.assert_allclose(a, b, rtol=1e-10)


def test_extension_of_constant():
    cfg = KernelConfig(2, 0.4)
    for R in (1.01, 1.5, 6.0):
        assert neumann_extension(cfg, lambda r: 3.0 + 0 * r, R) == pytest.approx(3.0, rel=1e-13)


def test_extension_qmc_oracle():
    cfg = KernelConfig(1, 0.3)
    R, a = 1.5, 1.6
    y = 2 * qmc.Sobol(1, scramble=True, seed=3).random_base2(16)[:, 0] - 1
    k = np.abs(R - y) ** -a
    ref = np.mean(np.abs(y) * k) / np.mean(k)
    val = neumann_extension(cfg, lambda r: r, R)
    assert 0 < val < 1
    assert val == pytest.approx(ref, rel=1e-4)


@settings(max_examples=30, deadline=None)
@given(c=st.lists(st.floats(-5, 5), min_size=3, max_size=3), R=st.floats(1.001, 20.0),
       s=st.floats(0.1, 0.9), n=st.integers(1, 3))
def test_extension_monotone_and_bounded(c, R, s, n):
    cfg = KernelConfig(n, s)
    u1 = lambda r: c[0] + c[1] * r + c[2] * np.sin(3 * r)
    u2 = lambda r: u1(r) + 0.5 + r**2
    e1, e2 = neumann_extension(cfg, u1, R), neumann_extension(cfg, u2, R)
    assert e1 <= e2
    grid = np.linspace(0, 1, 2001)
    tol = 1e-9 * (1 + np.abs(u1(grid)).max())
    assert u1(grid).min() - tol <= e1 <= u1(grid).max() + tol


def test_extension_rejects_interior_radius():
    with pytest.raises(ValueError):
        neumann_extension(KernelConfig(1, 0.3), lambda r: r, 1.0)


def test_derivative_of_constant_vanishes():
    assert abs(neumann_derivative(KernelConfig(3, 0.2), lambda r: 2.0 + 0 * r, 1.7)) < 1e-13


@pytest.mark.parametrize("n,s", [(1, 0.3), (2, 0.45), (3, 0.7)])
def test_derivative_vanishes_at_extension(n, s):
    cfg = KernelConfig(n, s)
    inner = lambda r: np.cos(2 * r) + r**3
    for R in (1.05, 2.0, 8.0):
        e = neumann_extension(cfg, inner, R)
        u = lambda r, e=e, R=R: np.where(np.asarray(r) < R - 1e-12, inner(r), e)
        assert abs(neumann_derivative(cfg, u, R)) < 1e-8 * 2.0


def test_derivative_boundary_jump():
    s = 0.3
    cfg = KernelConfig(1, s)
    val = neumann_derivative(cfg, lambda r: (np.asarray(r) > 1).astype(float), 2.0)
    ref = cfg.c_ns * (1 - 3.0**-0.6) / 0.6
    assert val == pytest.approx(ref, rel=1e-10)


def test_pointwise_constant_is_harmonic():
    cfg = KernelConfig(2, 0.4)
    assert abs(pointwise_fractional_laplacian(cfg, lambda r: 1.0 + 0 * r, 0.3)) < 1e-12


@pytest.mark.parametrize("r", [0.0, 0.4, 1.3])
def test_pointwise_fourier_symbol(r):
    cfg = KernelConfig(1, 0.5)
    val = pointwise_fractional_laplacian(cfg, np.cos, r)
    assert abs(val - math.cos(r)) < 1e-4


def test_pointwise_linearity():
    cfg = KernelConfig(1, 0.3)
    u = lambda r: np.exp(-np.asarray(r) ** 2)
    v = lambda r: 1 / (1 + np.asarray(r) ** 2)
    lhs = pointwise_fractional_laplacian(cfg, lambda r: 2 * u(r) - 3 * v(r), 0.7)
    rhs = 2 * pointwise_fractional_laplacian(cfg, u, 0.7) - 3 * pointwise_fractional_laplacian(cfg, v, 0.7)
    assert lhs == pytest.approx(rhs, rel=1e-8, abs=1e-10)


def test_pointwise_accepts_discrete_profile():
    mesh = build_mesh(64, 16, 8.0)
    u = DiscreteFunction.constant(mesh, 2.0)
    assert abs(pointwise_fractional_laplacian(KernelConfig(1, 0.3), u, 0.5)) < 1e-10
