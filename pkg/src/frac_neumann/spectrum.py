"""Second eigenvalues of the Neumann fractional Laplacian on radial profiles.

All computations run on interior values; exterior values are slaved to them
by the discrete Neumann extension, so the quadratic form is the Schur
complement `forms.schur`.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .discretization import DiscreteFunction, seminorm_sq
from .projections import block_matrix, monotone_zero_mean, tie_blocks

MASS_FLOOR = 1e-280


class ConvergenceError(RuntimeError):
    pass


@dataclass
class SpectralResult:
    """Second eigenvalues and eigenfunctions.

    ``lambda2`` is computed over radial profiles only, so it equals
    ``lambda2_r``; ``lambda2_is_radial`` records this substitution.
    ``phi2`` minimizes the quotient over zero-mean non-decreasing profiles
    (L^2(B)-normalized, phi2(1) > 0); ``phi2_r`` is the unconstrained
    radial eigenfunction.
    """

    lambda2: float
    lambda2_r: float
    lambda2_r_plus: float
    phi2: DiscreteFunction
    phi2_r: DiscreteFunction
    residuals: dict = field(default_factory=dict)
    restarts_used: int = 0
    lambda2_is_radial: bool = True


def _mass_norm(forms, vi):
    return float(np.sqrt(max(vi @ forms.mass_interior @ vi, 0.0)))


def rayleigh_quotient(forms, v):
    """[v]^2 / int_B v^2 for a DiscreteFunction or full nodal vector."""
    x = v.values if isinstance(v, DiscreteFunction) else np.asarray(v, dtype=float)
    if isinstance(v, DiscreteFunction):
        forms.check_mesh(v)
    m = float(x @ forms.mass @ x)
    if m < MASS_FLOOR:
        raise ZeroDivisionError("function has (numerically) zero L^2(B) norm")
    return seminorm_sq(forms, x) / m


def _zero_mean_basis(c):
    return linalg.null_space(c[None, :])


def _finish(forms, vi):
    """Normalize interior values (unit L^2, positive at r = 1) and extend."""
    vi = vi / _mass_norm(forms, vi)
    if vi[-1] < 0:
        vi = -vi
    return forms.function(vi)


def second_eigenvalue(forms, full_output=False):
    """Smallest eigenvalue of (S~, M) on the zero-mean subspace and its eigenfunction."""
    S, M = forms.schur, forms.mass_interior
    c = forms.lumped_mass[: forms.n_interior]
    Q = _zero_mean_basis(c)
    w, Y = linalg.eigh(Q.T @ S @ Q, Q.T @ M @ Q, subset_by_index=[0, 0])
    lam = float(w[0])
    vi = Q @ Y[:, 0]
    phi = _finish(forms, vi)
    vi = phi.interior_values
    sv = S @ vi
    res = float(np.linalg.norm(sv - lam * (M @ vi)) / max(np.linalg.norm(sv), 1e-300))
    if full_output:
        return lam, phi, res
    return lam, phi


def _face_solve(S, M, c, blocks):
    """Minimize the quotient over zero-mean vectors constant on the given blocks."""
    nI = S.shape[0]
    if len(blocks) < 3:
        return None
    B = block_matrix(blocks, nI)
    cb = B.T @ c
    Q = _zero_mean_basis(cb)
    BQ = B @ Q
    w, Y = linalg.eigh(BQ.T @ S @ BQ, BQ.T @ M @ BQ, subset_by_index=[0, 0])
    v = BQ @ Y[:, 0]
    v /= np.sqrt(v @ M @ v)
    if v[-1] < v[0]:
        v = -v
    return float(w[0]), v


def _kkt_residual(S, M, c, v, lam):
    """Relative fixed-point residual of the projected gradient map (v is M-normalized)."""
    g = 2.0 * (S @ v - lam * (M @ v)) / c
    gamma = 1.0 / max(lam, 1e-300)
    p, _ = monotone_zero_mean(v - gamma * g, c)
    return float(np.sqrt(np.dot(c, (v - p) ** 2)) / gamma / max(lam, 1e-300))


def _monotone_descent(S, M, c, v, tol, max_iter, polish_every=10):
    """Projected gradient for the quotient on the monotone zero-mean cone."""
    v, _ = monotone_zero_mean(v, c)
    nv = np.sqrt(v @ M @ v)
    if nv < 1e-150:
        return None
    v = v / nv
    lam = float(v @ S @ v)
    gamma = 1.0 / max(lam, 1e-12)
    kkt = np.inf
    for it in range(1, max_iter + 1):
        g = 2.0 * (S @ v - lam * (M @ v)) / c
        while True:
            w, _ = monotone_zero_mean(v - gamma * g, c)
            nw = np.sqrt(w @ M @ w)
            if nw > 1e-150:
                w = w / nw
                lw = float(w @ S @ w)
                if lw <= lam - 1e-4 * np.dot(c, (w - v) ** 2) / gamma:
                    break
            gamma *= 0.5
            if gamma < 1e-18 / max(lam, 1e-12):
                w, lw = v, lam
                break
        moved = w is not v
        v, lam = w, lw
        if moved:
            gamma *= 2.0
        if it % polish_every == 0 or not moved:
            face = _face_solve(S, M, c, tie_blocks(v))
            if face is not None:
                lf, vf = face
                if np.all(np.diff(vf) >= -1e-14 * np.abs(vf).max()) and lf <= lam + 1e-12 * max(lam, 1.0):
                    vf, _ = monotone_zero_mean(vf, c)
                    vf /= np.sqrt(vf @ M @ vf)
                    v, lam = vf, float(vf @ S @ vf)
            kkt = _kkt_residual(S, M, c, v, lam)
            if kkt <= tol:
                return lam, v, kkt, it
            if not moved:
                gamma = 1.0 / max(lam, 1e-12)
    return lam, v, kkt, max_iter


def _random_monotone(rng, size):
    inc = rng.exponential(size=size) ** 3 * (rng.random(size) < rng.uniform(0.1, 1.0))
    return np.cumsum(inc) + 1e-3 * np.arange(size) / size


def second_monotone_eigenvalue(forms, restarts=16, seed=0, tol=1e-8, max_iter=4000, full_output=False):
    """Minimize the quotient over zero-mean, radially non-decreasing profiles.

    Restart 0 starts from the projected unconstrained eigenfunction, the
    others from random non-decreasing profiles drawn from `seed`. The best
    restart meeting the KKT tolerance wins (lowest index on ties).
    """
    S, M = forms.schur, forms.mass_interior
    c = forms.lumped_mass[: forms.n_interior]
    nI = forms.n_interior
    _, phi_r = second_eigenvalue(forms)
    rng = np.random.default_rng(seed)
    starts = [phi_r.interior_values] + [_random_monotone(rng, nI) for _ in range(restarts - 1)]
    best = None
    for k, v0 in enumerate(starts):
        out = _monotone_descent(S, M, c, v0, tol, max_iter)
        if out is None:
            continue
        lam, v, kkt, _ = out
        if kkt <= tol and (best is None or lam < best[0] - 1e-14 * abs(best[0])):
            best = (lam, v, kkt, k)
    if best is None:
        raise ConvergenceError("no restart reached the KKT tolerance")
    lam, v, kkt, _ = best
    vi = v / _mass_norm(forms, v)
    phi = forms.function(vi)
    lam = rayleigh_quotient(forms, phi)
    if full_output:
        return lam, phi, kkt, len(starts)
    return lam, phi


def compute_spectrum(forms, restarts=16, seed=0, tol=1e-8):
    """All second eigenvalues, with residual diagnostics."""
    lam_r, phi_r, res_r = second_eigenvalue(forms, full_output=True)
    lam_p, phi_p, kkt, used = second_monotone_eigenvalue(
        forms, restarts=restarts, seed=seed, tol=tol, full_output=True
    )
    if lam_p < lam_r - 1e-10 * max(1.0, lam_r):
        raise ConvergenceError("monotone eigenvalue fell below the unconstrained one")
    return SpectralResult(
        lambda2=lam_r,
        lambda2_r=lam_r,
        lambda2_r_plus=lam_p,
        phi2=phi_p,
        phi2_r=phi_r,
        residuals={"lambda2_r": res_r, "lambda2_r_plus": kkt},
        restarts_used=used,
    )
