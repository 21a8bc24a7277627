"""Energy, cone-constrained descent, mountain pass and Newton polishing.

Solvers work on interior nodal values; exterior values always follow from
the discrete Neumann extension (for which the exterior rows of the energy
gradient vanish identically).
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg
from scipy.optimize import brentq

from .discretization import (
    DiscreteFunction,
    nonlinear_integral,
    nonlinear_jacobian,
    parse_profile,
    weak_residual,
)
from .problem import G_antiderivative, ProblemParams, critical_exponent, g_trunc, g_trunc_prime  # noqa: F401
from .projections import monotone_nonnegative

RESIDUAL_TOL = 1e-9
CLASS_TOL = 1e-4
U0_RADIUS = 0.5


@dataclass
class EnergyModel:
    params: ProblemParams
    forms: object

    def __post_init__(self):
        if self.params.n != self.forms.cfg.n or self.params.s != self.forms.cfg.s:
            raise ValueError("params and forms disagree on (n, s)")


@dataclass
class SolverResult:
    u: DiscreteFunction
    energy: float
    residual_norm: float
    classification: str
    in_cone: bool
    iterations: int
    path_max_energy: float = None
    converged: bool = True
    message: str = ""
    history: list = field(default_factory=list, repr=False)
    diagnostics: dict = field(default_factory=dict, repr=False)

    _KEYS = ("energy", "residual_norm", "classification", "in_cone", "iterations",
             "path_max_energy", "converged", "message")

    def to_text(self, n, s):
        lines = []
        for key in self._KEYS:
            val = getattr(self, key)
            if isinstance(val, float):
                val = f"{val:.17g}"
            lines.append(f"{key}={val}")
        return "\n".join(lines) + "\n" + self.u.to_text(n, s)

    def save(self, path, n, s):
        with open(path, "w", encoding="ascii") as fh:
            fh.write(self.to_text(n, s))


def parse_solver_result(text):
    head, sep, prof = text.partition("# frac-neumann profile")
    if not sep:
        raise ValueError("missing profile block")
    u, meta = parse_profile(sep + prof)
    kv = dict(line.split("=", 1) for line in head.splitlines() if "=" in line)

    def num(x):
        return None if x == "None" else float(x)

    res = SolverResult(
        u=u,
        energy=float(kv["energy"]),
        residual_norm=float(kv["residual_norm"]),
        classification=kv["classification"],
        in_cone=kv["in_cone"] == "True",
        iterations=int(kv["iterations"]),
        path_max_energy=num(kv.get("path_max_energy", "None")),
        converged=kv.get("converged", "True") == "True",
        message=kv.get("message", ""),
    )
    return res, meta


# ---------------------------------------------------------------------------
# energy


def _full(model, u):
    forms = model.forms
    if isinstance(u, DiscreteFunction):
        forms.check_mesh(u)
        return u.values
    u = np.asarray(u, dtype=float)
    if u.size == forms.n_interior:
        return forms.extend(u)
    if u.size != forms.mesh.size:
        raise ValueError("nodal vector has the wrong length")
    return u


def energy(model, u):
    """(d/2)[u]^2 + (1/2) int_B u^2 - int_B G(u)."""
    x = _full(model, u)
    F, p = model.forms, model.params
    return float(0.5 * p.d * (x @ F.stiffness @ x) + 0.5 * (x @ F.mass @ x) - nonlinear_integral(F, p, x))


def energy_gradient(model, u):
    """Gradient with respect to all nodal values (the weak residual with g_{q,t0})."""
    return weak_residual(model.forms, model.params, _full(model, u))


def _reduced(model, ui):
    """Energy and interior gradient for interior values (exterior slaved)."""
    x = model.forms.extend(ui)
    return energy(model, x), energy_gradient(model, x)[: model.forms.n_interior]


def cone_project(forms, u):
    """Projection onto {u >= 0, non-decreasing on [0, 1]} in the lumped-mass metric."""
    x = u.values if isinstance(u, DiscreteFunction) else np.asarray(u, dtype=float)
    nI = forms.n_interior
    w = forms.lumped_mass[:nI]
    return forms.function(monotone_nonnegative(x[:nI], w))


def in_cone(forms, u, rtol=1e-12):
    x = u.values if isinstance(u, DiscreteFunction) else np.asarray(u, dtype=float)
    xi = x[: forms.n_interior]
    scale = max(np.abs(xi).max(), 1.0)
    return bool(np.all(np.diff(xi) >= -rtol * scale) and np.all(xi >= -rtol * scale))


def l2_norm(forms, x):
    return float(np.sqrt(max(x @ forms.mass @ x, 0.0)))


def classify(forms, u, tol=CLASS_TOL):
    x = u.values if isinstance(u, DiscreteFunction) else np.asarray(u, dtype=float)
    if l2_norm(forms, x) <= tol:
        return "zero"
    if l2_norm(forms, x - 1.0) <= tol:
        return "one"
    return "nonconstant"


def _result(model, ui, iterations, converged, message, path_max=None, history=None):
    forms = model.forms
    x = forms.extend(ui)
    _, rel = weak_residual(forms, model.params, x, full_output=True)
    return SolverResult(
        u=DiscreteFunction(forms.mesh, x),
        energy=energy(model, x),
        residual_norm=rel,
        classification=classify(forms, x),
        in_cone=in_cone(forms, x),
        iterations=iterations,
        path_max_energy=path_max,
        converged=converged,
        message=message,
        history=history or [],
    )


# ---------------------------------------------------------------------------
# rays


def ray_maximum(model, w):
    """Return (t*, E(t* w)) maximizing t -> E(t w) over t > 0.

    Uses t Q(w) = int g(t w) w with Q(w) = d[w]^2 + int w^2; since g(t)/t is
    increasing the root is unique. Returns (0, 0) if w vanishes on B.
    """
    forms, p = model.forms, model.params
    x = _full(model, w)
    wq = forms.element_values(x)
    if np.abs(wq).max() == 0.0:
        return 0.0, 0.0
    Q = p.d * (x @ forms.stiffness @ x) + x @ forms.mass @ x
    if math.isinf(p.t0):
        t = (Q / forms.integrate(np.abs(wq) ** p.q)) ** (1.0 / (p.q - 2.0))
    else:
        def h(logt):
            t = math.exp(logt)
            return forms.integrate(g_trunc(p, t * wq, extend=True) * wq) / t - Q

        lo, hi = -1.0, 1.0
        while h(lo) > 0:
            lo -= 2.0
        while h(hi) < 0:
            hi += 2.0
        t = math.exp(brentq(h, lo, hi, xtol=1e-15, rtol=1e-15))
    return float(t), energy(model, t * x)


def _projected_gradient_norm(model, ui, grad):
    forms = model.forms
    c = forms.lumped_mass[: forms.n_interior]
    p = monotone_nonnegative(ui - grad / c, c)
    num = np.sqrt(np.dot(c, (ui - p) ** 2))
    return float(num / max(np.sqrt(np.dot(c, ui * ui)), 1.0))


# ---------------------------------------------------------------------------
# descent


def _descent(model, ui, step_rule, max_iters, tol, nehari, warm_tol=None):
    """Projected gradient descent in the lumped-mass metric.

    With `nehari`, every iterate is rescaled to the maximum of the energy on
    its ray, i.e. the descent acts on J(w) = max_t E(t w).
    Stops when the projected-gradient norm drops below `tol` (or the relative
    weak residual below `warm_tol`, if given).
    """
    forms = model.forms
    c = forms.lumped_mass[: forms.n_interior]
    fixed = None if step_rule == "armijo" else float(step_rule)
    tau = fixed if fixed is not None else 1.0
    e, grad = _reduced(model, ui)
    history = [e]
    for it in range(max_iters):
        pg = _projected_gradient_norm(model, ui, grad)
        if pg < tol:
            return ui, it, True, "projected gradient below tolerance", history
        if warm_tol is not None:
            _, rel = weak_residual(forms, model.params, forms.extend(ui), full_output=True)
            if rel < warm_tol:
                return ui, it, True, "warm-start residual reached", history
        direction = grad / c
        while True:
            w = monotone_nonnegative(ui - tau * direction, c)
            if nehari:
                t, ew = ray_maximum(model, w)
                w = t * w
            else:
                ew = energy(model, forms.extend(w))
            decrease = np.dot(c, (w - ui) ** 2) / tau
            if ew <= e - 1e-4 * decrease or decrease == 0.0:
                break
            tau *= 0.5
            if tau < 1e-16:
                return ui, it, False, "line search failed", history
        if not np.any(w):
            return w, it + 1, True, "collapsed to zero", history + [0.0]
        ui = w
        e, grad = _reduced(model, ui)
        history.append(e)
        if fixed is None:
            tau *= 2.0
        else:
            tau = fixed
    return ui, max_iters, False, "iteration cap reached", history


def gradient_flow(model, u0, step_rule="armijo", max_iters=5000, tol=1e-9, nehari=True):
    """Projected descent u <- P_cone(u - tau M_L^{-1} grad E) from u0.

    The energy is unbounded below along constants, so by default each
    iterate is moved to the energy maximum on its ray (``nehari=True``);
    the energy sequence is then non-increasing and cannot escape to
    infinity. ``step_rule`` is "armijo" (adaptive backtracking) or a fixed
    step, halved when it fails to decrease the energy. Hitting the
    iteration cap returns ``converged=False``.
    """
    forms = model.forms
    x = _full(model, u0)
    ui = x[: forms.n_interior].copy()
    if nehari and np.any(ui):
        t, _ = ray_maximum(model, ui)
        ui = t * ui
    ui, its, ok, msg, hist = _descent(model, ui, step_rule, max_iters, tol, nehari)
    return _result(model, ui, its, ok, msg, history=hist)


def newton_refine(model, u, max_iters=30, tol=1e-11):
    """Newton's method on the interior residual with exterior values slaved.

    Jacobian: d S~ + M_II - (int g'(u) psi_i psi_j). A backtracking line
    search on the residual norm guards the first steps. A singular Jacobian
    or stagnation returns ``converged=False``.
    """
    forms, p = model.forms, model.params
    nI = forms.n_interior
    ui = _full(model, u)[:nI].copy()
    base = p.d * forms.schur + forms.mass_interior
    history = []

    def resid(v):
        r, rel = weak_residual(forms, p, forms.extend(v), full_output=True)
        return r[:nI], rel

    r, rel = resid(ui)
    history.append(rel)
    for it in range(max_iters):
        if rel < tol:
            return _result(model, ui, it, True, "newton converged", history=history)
        J = base - nonlinear_jacobian(forms, p, forms.extend(ui))
        try:
            step = linalg.solve(J, -r, assume_a="sym")
        except (linalg.LinAlgError, ValueError):
            return _result(model, ui, it, False, "singular jacobian", history=history)
        if not np.all(np.isfinite(step)):
            return _result(model, ui, it, False, "singular jacobian", history=history)
        lam = 1.0
        nr = np.linalg.norm(r)
        while lam > 1e-4:
            cand = ui + lam * step
            try:
                rc, relc = resid(cand)
            except OverflowError:
                rc, relc = None, np.inf
            if rc is not None and np.linalg.norm(rc) < (1 - 1e-4 * lam) * nr:
                break
            lam *= 0.5
        else:
            return _result(model, ui, it, rel < tol, "newton stagnated", history=history)
        ui, r, rel = cand, rc, relc
        history.append(rel)
    return _result(model, ui, max_iters, rel < tol, "newton iteration cap", history=history)


# ---------------------------------------------------------------------------
# mountain pass


def initial_direction(forms, spectral, tbar=1e-2):
    """w = 1 + tbar phi2 with tbar halved until w lies in the cone."""
    phi = spectral.phi2.interior_values
    while True:
        w = 1.0 + tbar * phi
        if in_cone(forms, w) and w.min() > 0:
            return w, tbar
        tbar *= 0.5


def far_endpoint(model, w, t_start=1.0, max_doublings=200):
    """Smallest t = t_start * 2^k with E(t w) < 0."""
    t = t_start
    for _ in range(max_doublings):
        if energy(model, t * w) < 0:
            return t
        t *= 2.0
    raise RuntimeError("no negative-energy endpoint found on the ray")


def _ray_path(model, w, t_inf, resolution):
    ts = np.linspace(0.0, 1.0, resolution) * t_inf
    es = np.array([energy(model, t * w) for t in ts])
    return ts, es


def mountain_pass(model, spectral, path_resolution=33, max_deformations=4000,
                  tol=RESIDUAL_TOL, tbar=1e-2, newton=True):
    """Cone-constrained mountain pass started from the path t -> t t_inf (1 + tbar phi2).

    All paths are rays from 0 through the current summit direction w: a
    deformation takes a projected descent step at the summit, the new path
    is the ray through the result (its points are equally spaced in L^2),
    and the summit is re-located exactly by one-dimensional maximization.
    Once the relative residual at the summit is small the summit is
    polished with `newton_refine`.
    """
    forms, p = model.forms, model.params
    flag = p.hypothesis_flags.get("q_above_spectral_threshold")
    warn = "" if flag else "spectral hypothesis not verified; "
    w, tbar = initial_direction(forms, spectral, tbar)
    t_inf = far_endpoint(model, w)
    ts, es = _ray_path(model, w, t_inf, path_resolution)
    if not (es[0] == 0.0 and es[-1] < 0):
        raise RuntimeError("endpoint conditions of the initial path fail")
    t_star, e_star = ray_maximum(model, w)
    # the level set ||u||_inf = U0_RADIUS separates the endpoints with positive energy
    r0 = U0_RADIUS / np.abs(w).max()
    if energy(model, r0 * w) <= 0:
        raise RuntimeError("energy is not positive on the small sphere")
    ui = t_star * w
    history = [max(e_star, es.max())]

    done = 0
    warm = 1e-5
    while done < max_deformations:
        chunk = min(200, max_deformations - done)
        ui, its, ok, msg, hist = _descent(model, ui, "armijo", chunk, 1e-9, True, warm_tol=warm)
        done += max(its, 1)
        history.extend(hist[1:])
        if not np.any(ui):
            return _result(model, ui, done, False, warn + "summit collapsed to zero", history=history)
        flat = len(hist) > 1 and abs(hist[0] - hist[-1]) <= 1e-13 * max(1.0, abs(hist[-1]))
        stalled = msg.startswith("projected") or msg == "line search failed" or flat
        if (msg.startswith("warm") or stalled) and newton:
            summit = _result(model, ui, done, False, "")
            res = newton_refine(model, ui)
            if res.converged and res.residual_norm < tol:
                res.iterations = done + res.iterations
                res.path_max_energy = history[-1]
                res.history = history
                res.diagnostics = {
                    "summit_energy": summit.energy,
                    "summit_residual": summit.residual_norm,
                    "summit_in_cone": summit.in_cone,
                    "newton_shift_l2": l2_norm(forms, res.u.values - summit.u.values),
                }
                res.message = warn + (
                    "mountain pass converged" if res.in_cone
                    else "critical point next to the cone summit lies outside the cone"
                )
                return res
            warm *= 0.01
            if stalled or warm < 1e-14:
                break
        elif stalled:
            break
    out = _result(model, ui, done, False, warn + "deformation cap reached", history=history)
    out.path_max_energy = history[-1]
    out.converged = out.residual_norm < tol
    return out


# ---------------------------------------------------------------------------
# energy expansion near u = 1


def energy_expansion_check(model, spectral, t_values):
    """Compare E(c(t)(1 + t phi2)) - E(1) with (t^2/2)(d lambda - q + 2) int phi2^2.

    c(t) keeps int_B v_t = |B|; with int phi2 = 0 it equals 1.
    Returns a list of dicts with keys t, c, measured, predicted, ratio.
    """
    forms, p = model.forms, model.params
    phi = spectral.phi2.values
    one = np.ones(forms.mesh.size)
    e1 = energy(model, one)
    lam = spectral.lambda2_r_plus
    norm2 = float(phi @ forms.mass @ phi)
    vol = float(forms.lumped_mass.sum())
    rows = []
    for t in t_values:
        v = one + t * phi
        c = vol / float(forms.lumped_mass @ v)
        measured = energy(model, c * v) - e1
        predicted = 0.5 * t * t * (p.d * lam - p.q + 2.0) * norm2
        ratio = measured / predicted if predicted != 0 else (1.0 if measured == 0 else math.inf)
        rows.append({"t": float(t), "c": c, "measured": measured, "predicted": predicted, "ratio": ratio})
    return rows
