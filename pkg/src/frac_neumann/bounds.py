"""Explicit constants of the L^infinity and non-existence estimates, and verifiers.

Every constant downstream of the embedding constant C is only as good as C,
which is estimated numerically from below (`embedding_constant_estimate`);
reports therefore carry ``indicative = True``.
"""

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import linalg

from .discretization import DiscreteFunction, lp_norm, seminorm_sq, weak_residual
from .kernel_core import ball_volume
from .problem import critical_exponent, g_trunc
from .projections import monotone_nonnegative

__all__ = [
    "ConstantsReport",
    "MoserTrace",
    "critical_exponent",
    "compute_constants",
    "embedding_constant_estimate",
    "moser_recurrence_check",
    "mass_identity_check",
    "nonexistence_certificate",
    "small_q_limit_check",
    "moser_C0",
    "moser_C0_product",
]

MOSER_SLACK = 0.10
SOLUTION_TOL = 1e-8


def _exp(x):
    """exp that returns inf instead of raising on overflow."""
    try:
        return math.exp(x)
    except OverflowError:
        return math.inf


def moser_C0(b):
    """C0 = (prod_k b^(k / b^k))^(1/2) = exp(ln(b)/2 * b/(b-1)^2) for b > 1."""
    if not b > 1:
        return math.inf
    return _exp(0.5 * math.log(b) * b / (b - 1.0) ** 2)


def moser_C0_product(b, terms=60):
    """Truncated product prod_{k<=terms} beta_k^(1/beta_k), square-rooted."""
    k = np.arange(1, terms + 1, dtype=float)
    return float(np.exp(0.5 * np.sum(k * math.log(b) * b ** (-k))))


def _moser_chain(P, q, d, C, volume, K_mass, d_factor=False):
    """log K_q, log K_infinity and the exponents for critical exponent P.

    With ``d_factor`` the max{1, 1/d} powers are folded into the constants
    (cone estimate, whose constants depend on d).
    """
    out = {"b": (P - q + 2.0) / 2.0}
    if not q < P:
        out.update(beta_sum=math.inf, C0=math.inf, C_q=math.inf, log_K_q=math.inf,
                   gamma_q=math.inf, delta_q=math.inf, log_K_infty=math.inf, valid=False)
        return out
    b = out["b"]
    beta_sum = 2.0 / (P - q)
    C0 = moser_C0(b)
    C_q = C * max(1.0, volume ** (0.5 * (q - 2.0) / P))
    md = max(1.0, 1.0 / d)
    log_K_q = (max(math.log(2.0), beta_sum * math.log(2.0)) + beta_sum * math.log(C_q)
               + 0.5 * math.log(b) * b / (b - 1.0) ** 2)
    gamma = (P - 2.0) / (P - q)
    delta = 1.0 / (P - q)
    if d_factor:
        log_K_q += delta * math.log(md)
        K_eff = md * K_mass
    else:
        K_eff = K_mass
    valid = gamma / 2.0 < 1.0
    if valid:
        inner = max(0.0, 0.5 * gamma * math.log(K_eff) + gamma * math.log(C))
        log_K_inf = 2.0 / (2.0 - gamma) * (math.log(2.0) + log_K_q + inner)
    else:
        log_K_inf = math.inf
    out.update(beta_sum=beta_sum, C0=C0, C_q=C_q, log_K_q=log_K_q, gamma_q=gamma,
               delta_q=delta, log_K_infty=log_K_inf, valid=valid)
    return out


@dataclass
class ConstantsReport:
    """Explicit constants for one parameter set.

    ``K_infty_valid`` is False when q >= (2*+2)/2 (gamma_q/2 >= 1), in which
    case K_infty, d_star are infinite. ``p_used`` is the exponent actually
    used in place of 2*_n (the auxiliary p when 2*_n is infinite).
    ``d_star`` uses lambda_{2,r} for lambda_2 (``lambda2_source``).
    """

    two_star_n: float
    two_star_1: float
    b: float
    beta_sum: float
    C0: float
    delta_small: float
    K_mass: float
    delta_prime: float
    K_mass_prime: float
    C_embed: float
    C_q: float
    K_q: float
    K_infty: float
    Lambda_q: float
    delta_q: float
    gamma_q: float
    d_star: float
    d_star_star: float
    t0_choice: float
    p_used: float
    K_infty_valid: bool = True
    K_prime_infty: float = math.inf
    K_prime_valid: bool = True
    indicative: bool = True
    lambda2_source: str = "lambda2_r"
    n: int = 1
    s: float = 0.0
    q: float = 0.0
    d: float = 0.0
    sensitivity: dict = field(default_factory=dict)

    def as_dict(self):
        return asdict(self)

    def to_text(self):
        lines = []
        for key, val in self.as_dict().items():
            if key == "sensitivity":
                for factor, row in val.items():
                    lines.append(f"sensitivity.C_x{factor}.K_infty={row['K_infty']:.17g}")
                    lines.append(f"sensitivity.C_x{factor}.d_star={row['d_star']:.17g}")
                continue
            if isinstance(val, float):
                val = f"{val:.17g}"
            lines.append(f"{key}={val}")
        return "\n".join(lines) + "\n"

    def to_json(self):
        def clean(v):
            if isinstance(v, dict):
                return {str(k): clean(x) for k, x in v.items()}
            if isinstance(v, float) and not math.isfinite(v):
                return str(v)
            return v

        return json.dumps(clean(self.as_dict()), indent=2, sort_keys=False) + "\n"


def compute_constants(params, spectral, C_embed, p_aux=None, C_embed_cone=None, t0_margin=2.0):
    """Fill a ConstantsReport for `params`.

    `spectral` supplies lambda2 (for d*) and lambda2_r_plus (for d**); pass
    None to leave both thresholds as nan. `C_embed_cone` is the constant of
    the radial embedding into L^(2*_1) used for the cone bound K'_infty
    (defaults to `C_embed`). When a critical exponent is infinite it is
    replaced by `p_aux` (default 2q).
    """
    n, s, q, d = params.n, params.s, params.q, params.d
    if not q > 2:
        raise ValueError("q must exceed 2")
    if p_aux is None:
        p_aux = 2.0 * q
    if not p_aux > q:
        raise ValueError("the auxiliary exponent must exceed q")
    vol = ball_volume(n)
    two_n, two_1 = critical_exponent(n, s), critical_exponent(1, s)
    P = two_n if math.isfinite(two_n) else float(p_aux)
    P1 = two_1 if math.isfinite(two_1) else float(p_aux)
    C = float(C_embed)
    C1 = C if C_embed_cone is None else float(C_embed_cone)

    delta_small = 2.0 ** (q - 2.0) - 1.0
    K_mass = 2.0 * vol * (1.0 + 1.0 / delta_small)
    delta_prime = 2.0 ** (params.ell - 2.0) - 1.0
    K_mass_prime = 2.0 * vol * (1.0 + 1.0 / delta_prime)

    main = _moser_chain(P, q, d, C, vol, K_mass)
    cone = _moser_chain(P1, q, d, C1, vol, K_mass_prime, d_factor=True)
    K_infty = _exp(main["log_K_infty"])
    K_prime = _exp(cone["log_K_infty"])
    if not math.isfinite(two_n):
        Lambda_q = 1.0
    elif two_n > 2.0 * (q - 1.0):
        Lambda_q = two_n / (two_n - 2.0 * (q - 1.0))
    else:
        Lambda_q = math.inf

    def thresholds(log_k_inf):
        if spectral is None:
            return math.nan, math.nan
        lam2, lamp = float(spectral.lambda2), float(spectral.lambda2_r_plus)
        kq = _exp((q - 2.0) * log_k_inf)
        d_star = max(1.0, ((q - 1.0) * kq - 1.0) / lam2) if main["valid"] else math.inf
        return d_star, (q - 2.0) / lamp

    d_star, d_star_star = thresholds(main["log_K_infty"])
    t0 = t0_margin * (K_prime + 1.0) if cone["valid"] else math.inf
    if not math.isfinite(t0):
        t0 = math.inf

    sens = {}
    for factor in (1, 2, 4):
        alt = _moser_chain(P, q, d, factor * C, vol, K_mass)
        sens[factor] = {"K_infty": _exp(alt["log_K_infty"]), "d_star": thresholds(alt["log_K_infty"])[0]}

    return ConstantsReport(
        two_star_n=two_n,
        two_star_1=two_1,
        b=main["b"],
        beta_sum=main["beta_sum"],
        C0=main["C0"],
        delta_small=delta_small,
        K_mass=K_mass,
        delta_prime=delta_prime,
        K_mass_prime=K_mass_prime,
        C_embed=C,
        C_q=main["C_q"],
        K_q=_exp(main["log_K_q"]),
        K_infty=K_infty,
        Lambda_q=Lambda_q,
        delta_q=main["delta_q"],
        gamma_q=main["gamma_q"],
        d_star=d_star,
        d_star_star=d_star_star,
        t0_choice=t0,
        p_used=P,
        K_infty_valid=bool(main["valid"]),
        K_prime_infty=K_prime,
        K_prime_valid=bool(cone["valid"]),
        n=n,
        s=s,
        q=q,
        d=d,
        sensitivity=sens,
    )


# ---------------------------------------------------------------------------
# embedding constant


def _h_norm(H, ui):
    return math.sqrt(max(ui @ H @ ui, 0.0))


def _ratio(forms, H, ui, p):
    nh = _h_norm(H, ui)
    if nh == 0.0:
        return 0.0
    return lp_norm(forms, forms.extend(ui), p) / nh


def _lp_ascent(forms, H, ui, p, cone, iters=300):
    """Projected gradient ascent on log ||u||_p - log ||u||_H."""
    c = forms.lumped_mass[: forms.n_interior]
    proj = (lambda v: monotone_nonnegative(v, c)) if cone else (lambda v: v)
    ui = proj(ui)
    val = _ratio(forms, H, ui, p)
    if val == 0.0:
        return 0.0
    step = 0.1
    for _ in range(iters):
        x = forms.extend(ui)
        ev = forms.element_values(x)
        top = np.abs(ev).max()
        lp = forms.integrate((np.abs(ev) / top) ** p)
        g_lp = forms.load_vector(np.sign(ev) * (np.abs(ev) / top) ** (p - 1))[: forms.n_interior] / (top * lp)
        Hu = H @ ui
        g = g_lp - Hu / (ui @ Hu)
        g = g / c
        scale = math.sqrt(np.dot(c, ui * ui))
        while step > 1e-10:
            trial = proj(ui + step * scale * g / max(math.sqrt(np.dot(c, g * g)), 1e-300))
            tv = _ratio(forms, H, trial, p)
            if tv > val * (1.0 + 1e-13):
                break
            step *= 0.5
        else:
            break
        ui, val = trial / math.sqrt(np.dot(c, trial * trial)), tv
        step = min(2.0 * step, 1.0)
    return val


def embedding_constant_estimate(forms, p, restrict_to_cone=False, family_size=32, seed=0,
                                ascent_starts=3, full_output=False):
    """Lower estimate of the best constant in ||u||_{L^p(B)} <= C ||u||_{H^s_{B,0}}.

    The H norm squared is [u]^2 + ||u||^2_{L^2(B)}, evaluated with the
    Neumann extension (which minimizes [u]^2 for given interior values).
    The estimate is the largest ratio over a search family: constants,
    low eigenmodes, bumps concentrating at r = 1 (and at r = 0 outside
    cone mode), `family_size` random non-decreasing profiles, and projected
    ascent started from the best `ascent_starts` deterministic members.
    Adding random members can only increase the result.
    """
    n, s = forms.cfg.n, forms.cfg.s
    crit = critical_exponent(1 if restrict_to_cone else n, s)
    if not 1 <= p <= crit or (math.isinf(p) and math.isinf(crit)):
        raise ValueError(f"p = {p} exceeds the critical exponent {crit}")
    nI = forms.n_interior
    H = forms.schur + forms.mass_interior
    r = forms.mesh.nodes[:nI]
    c = forms.lumped_mass[:nI]
    proj = (lambda v: monotone_nonnegative(v, c)) if restrict_to_cone else (lambda v: v)

    core = [np.ones(nI)]
    k = min(6, nI - 1)
    _, vecs = linalg.eigh(forms.schur, forms.mass_interior, subset_by_index=[0, k])
    for j in range(1, k + 1):
        v = vecs[:, j] * np.sign(vecs[-1, j] or 1.0)
        core.append(v)
    for a in (0.5, 0.8, 0.9, 0.95, 0.98, 0.99):
        for e in (1.0, 2.0):
            core.append(np.maximum(0.0, (r - a) / (1.0 - a)) ** e)
            if not restrict_to_cone:
                core.append(np.maximum(0.0, 1.0 - r / (1.0 - a)) ** e)
    core = [proj(v) for v in core]
    core = [v for v in core if np.abs(v).max() > 0]
    core_vals = [_ratio(forms, H, v, p) for v in core]

    best = max(core_vals)
    order = np.argsort(core_vals)[::-1][:ascent_starts]
    ascent = [_lp_ascent(forms, H, core[i], p, restrict_to_cone) for i in order]
    best = max(best, *ascent)

    rng = np.random.default_rng(seed)
    rand_vals = []
    for _ in range(family_size):
        inc = rng.exponential(size=nI) ** 3 * (rng.random(nI) < rng.uniform(0.05, 1.0))
        v = np.cumsum(inc)
        if not restrict_to_cone and rng.random() < 0.5:
            v = v - rng.uniform(0.0, 1.0) * v.max()
        v = proj(v)
        if np.abs(v).max() > 0:
            rand_vals.append(_ratio(forms, H, v, p))
    if rand_vals:
        best = max(best, max(rand_vals))
    if full_output:
        return best, {"core": core_vals, "ascent": ascent, "random": rand_vals}
    return best


# ---------------------------------------------------------------------------
# verifiers


def _interior_max(forms, x):
    return float(np.abs(np.asarray(x)[: forms.n_interior]).max())


def _require_solution(forms, params, x, tol):
    _, rel = weak_residual(forms, params, x, full_output=True)
    if rel > tol:
        raise ValueError(f"profile is not a solution (relative residual {rel:.2e} > {tol:.1e})")
    return rel


@dataclass
class MoserTrace:
    """Levels (m, beta_m, measured ||u||_{L^(beta_m 2*)}, recurrence bound).

    ``normalized`` holds the same norms for the probability measure dx/|B|;
    these are non-decreasing in m, which ``monotone_normalized`` records.
    """

    levels: list
    converged_sup: float
    normalized: list = field(default_factory=list)
    monotone_normalized: bool = True
    passed: bool = True
    slack: float = MOSER_SLACK
    linf: float = 0.0
    linf_bound: float = math.inf
    linf_ok: bool = True
    residual: float = 0.0


def moser_recurrence_check(forms, params, u, C_embed, levels=6, report=None, p_aux=None,
                           slack=MOSER_SLACK, residual_tol=SOLUTION_TOL):
    """Evaluate both sides of the Moser recurrence on a computed solution.

    Level m compares ||u||_{L^(b^m 2*)} with
    (C_q max{1, d^(-1/2)})^(1/b^m) (b^m)^(1/(2 b^m)) (1 + ||u||_{2*}^((q-2)/2))^(1/b^m)
    ||u||_{L^(b^(m-1) 2*)}, using measured norms on the right. Also checks
    ||u||_inf <= K_inf max{1, d^(-Lambda_q)} with K_inf from `report`
    (computed from `C_embed` when not given).
    """
    x = u.values if isinstance(u, DiscreteFunction) else np.asarray(u, dtype=float)
    if x.size == forms.n_interior:
        x = forms.extend(x)
    res = _require_solution(forms, params, x, residual_tol)
    if report is None:
        report = compute_constants(params, None, C_embed, p_aux=p_aux)
    q, d, P, b = params.q, params.d, report.p_used, report.b
    if not q < P:
        raise ValueError("the recurrence needs q below the critical exponent")
    C_q = report.C_q
    n_star = lp_norm(forms, x, P)
    prev = n_star
    rows, normed = [], [lp_norm(forms, x, P, normalized=True)]
    ok = True
    for m in range(1, levels + 1):
        beta = b**m
        meas = lp_norm(forms, x, beta * P)
        bound = ((C_q * max(1.0, 1.0 / math.sqrt(d))) ** (1.0 / beta) * beta ** (0.5 / beta)
                 * (1.0 + n_star ** (0.5 * (q - 2.0))) ** (1.0 / beta) * prev)
        rows.append((m, beta, meas, bound))
        ok &= meas <= bound * (1.0 + slack)
        normed.append(lp_norm(forms, x, beta * P, normalized=True))
        prev = meas
    mono = bool(np.all(np.diff(normed) >= -1e-12 * max(normed[-1], 1e-300)))
    linf = _interior_max(forms, x)
    lam = report.Lambda_q
    linf_bound = report.K_infty * max(1.0, d ** (-lam)) if report.K_infty_valid else math.inf
    return MoserTrace(
        levels=rows,
        converged_sup=linf,
        normalized=normed,
        monotone_normalized=mono,
        passed=bool(ok),
        slack=slack,
        linf=linf,
        linf_bound=linf_bound,
        linf_ok=bool(linf <= linf_bound),
        residual=res,
    )


def mass_identity_check(forms, params, u, floor=1e-300):
    """|int u - int g(u)| / max(int u, floor); zero for every solution."""
    x = u.values if isinstance(u, DiscreteFunction) else np.asarray(u, dtype=float)
    if x.size == forms.n_interior:
        x = forms.extend(x)
    ev = forms.element_values(x)
    iu = forms.integrate(ev)
    ig = forms.integrate(g_trunc(params, ev, extend=True))
    return abs(iu - ig) / max(abs(iu), floor)


def nonexistence_certificate(forms, params, spectral, u, report=None, phi_tol=1e-4,
                             residual_tol=SOLUTION_TOL):
    """Evaluate the non-existence inequality on a profile.

    With u0 the mean of u and phi = u - u0, the solution satisfies
    d [phi]^2 + int phi^2 = int (u^(q-1) - u0^(q-1)) phi, and the right side
    is at most (q-1) ||u||_inf^(q-2) int phi^2 while the left is at least
    (d lambda2 + 1) int phi^2. If (d lambda2 + 1) > (q-1) ||u||_inf^(q-2)
    the solution must be constant. Non-solutions are evaluated in diagnostic
    mode (``is_solution`` False) without any claim.
    """
    x = u.values if isinstance(u, DiscreteFunction) else np.asarray(u, dtype=float)
    if x.size == forms.n_interior:
        x = forms.extend(x)
    q, d = params.q, params.d
    lam2 = float(spectral.lambda2)
    _, rel = weak_residual(forms, params, x, full_output=True)
    ev = forms.element_values(x)
    u0 = forms.integrate(ev) / forms.volume
    phi = x - u0
    phi_sq = float(phi @ forms.mass @ phi)
    linf = _interior_max(forms, x)
    coef_left = d * lam2 + 1.0
    coef_right = (q - 1.0) * linf ** (q - 2.0)
    lhs_identity = d * seminorm_sq(forms, phi) + phi_sq
    pe = forms.element_values(phi)
    rhs_identity = forms.integrate(
        (g_trunc(params, ev, extend=True) - g_trunc(params, u0, extend=True)) * pe)
    forces_constant = coef_left > coef_right
    is_constant = math.sqrt(phi_sq) <= phi_tol
    out = {
        "is_solution": bool(rel <= residual_tol),
        "residual": rel,
        "u0": u0,
        "phi_l2_sq": phi_sq,
        "linf": linf,
        "lhs": coef_left * phi_sq,
        "rhs": coef_right * phi_sq,
        "lhs_identity": lhs_identity,
        "rhs_identity": rhs_identity,
        "forces_constant": bool(forces_constant),
        "is_constant": bool(is_constant),
        "certificate_holds": bool(is_constant or not forces_constant),
        "vacuous": bool(is_constant),
    }
    if report is not None:
        out["d_star"] = report.d_star
        out["d_above_d_star"] = bool(d > report.d_star)
        out["rhs_bound"] = ((q - 1.0) * report.K_infty ** (q - 2.0)
                            * max(1.0, d ** (-(q - 2.0) * report.Lambda_q)) * phi_sq)
    return out


def small_q_limit_check(n, s, q_sequence, C_embed=1.0, tail=3):
    """Tabulate K_inf^(q-2) along `q_sequence` (which should approach 2).

    Returns a dict with the rows (q, K_inf^(q-2)), whether |K_inf^(q-2) - 1|
    decreases over the last `tail` entries, and the deviation from 1 at the
    last entry.
    """
    from .problem import ProblemParams

    two = critical_exponent(n, s)
    top = (two + 2.0) / 2.0 if math.isfinite(two) else math.inf
    rows = []
    for q in q_sequence:
        if not 2.0 < q < top:
            raise ValueError(f"q = {q} outside (2, (2*+2)/2)")
        rep = compute_constants(ProblemParams(n, s, 1.0, q), None, C_embed)
        val = _exp((q - 2.0) * math.log(rep.K_infty)) if math.isfinite(rep.K_infty) else math.inf
        rows.append((float(q), val))
    dev = [abs(v - 1.0) for _, v in rows]
    t = dev[-tail:]
    return {
        "rows": rows,
        "tail_monotone": bool(all(a > b for a, b in zip(t, t[1:]))),
        "last_deviation": dev[-1],
    }
