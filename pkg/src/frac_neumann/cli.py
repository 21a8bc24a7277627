"""Command-line front end: ``frac-neumann {constants,spectrum,solve,sweep,verify}``.

Runs are configured by an INI file::

    [problem]
    n = 1
    s = 0.45
    q = 6
    d = 0.6             # or: d_over_d_star_star = 0.5

    [mesh]
    n_interior = 200
    n_exterior = 50
    R_ext = 8
    grading = 2

    [tolerances]
    residual = 1e-9
    quadrature = 1e-8
    kkt = 1e-8

    [solver]            # optional
    method = mountain_pass   # or gradient_flow, newton
    seed = 0
    restarts = 16
    path_resolution = 33
    max_iters = 5000
    epsilon = 0.05           # gradient_flow start 1 + epsilon * (cone profile)

    [embedding]         # optional
    C = estimate             # or a number
    family_size = 32

    [sweep]
    d_values = 0.2, 0.5, 1
    q_values = 2.4, 3, 6

    [verify]            # optional
    levels = 6
    moser_slack = 0.1

Exit codes: 0 success, 1 verification failure, 2 hypothesis violation,
64 configuration error. ``FRAC_NEUMANN_THREADS`` bounds the sweep worker pool.
"""

import argparse
import configparser
import csv
import io
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from importlib import metadata

import numpy as np

from . import bounds
from .discretization import (
    DiscreteFunction,
    assemble_forms,
    build_mesh,
    check_integration_by_parts,
    parse_profile,
    weak_residual,
)
from .kernel_core import NORMALIZATION_ID, KernelConfig
from .nonlinear import (
    EnergyModel,
    classify,
    cone_project,
    energy,
    gradient_flow,
    mountain_pass,
    newton_refine,
    parse_solver_result,
)
from .problem import ProblemParams
from .spectrum import compute_spectrum

EXIT_OK = 0
EXIT_VERIFY = 1
EXIT_HYPOTHESIS = 2
EXIT_CONFIG = 64

CSV_COLUMNS = ("d", "q", "s", "n", "classification", "energy", "residual", "linf",
               "d_star", "d_star_star", "lambda2r_plus", "hypothesis_ok")


class ConfigError(ValueError):
    pass


def _fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.17g}"
    return str(x)


# ---------------------------------------------------------------------------
# configuration


@dataclass
class RunConfig:
    n: int
    s: float
    q: float
    d: float
    d_over_d_star_star: float
    mesh: tuple
    tolerances: dict
    seed: int = 0
    restarts: int = 16
    method: str = "mountain_pass"
    path_resolution: int = 33
    max_iters: int = 5000
    epsilon: float = 0.05
    C_embed: object = "estimate"
    family_size: int = 32
    d_values: list = field(default_factory=list)
    q_values: list = field(default_factory=list)
    levels: int = 6
    moser_slack: float = bounds.MOSER_SLACK


def _get(cp, section, key, conv, default=None, required=True):
    if not cp.has_section(section) or not cp.has_option(section, key):
        if required:
            raise ConfigError(f"missing config key [{section}] {key}")
        return default
    raw = cp.get(section, key)
    try:
        return conv(raw)
    except ValueError:
        raise ConfigError(f"bad value for [{section}] {key}: {raw!r}") from None


def _floats(raw):
    vals = [float(x) for x in raw.replace(";", ",").split(",") if x.strip()]
    if not vals:
        raise ValueError("empty list")
    return vals


def _int(raw):
    return int(float(raw)) if float(raw).is_integer() else int(raw)


def load_config(path, need_d=True, need_grid=False):
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    cp.optionxform = str
    try:
        with open(path, encoding="utf-8") as fh:
            cp.read_file(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from None

    n = _get(cp, "problem", "n", _int)
    s = _get(cp, "problem", "s", float)
    q = _get(cp, "problem", "q", float, required=not need_grid)
    d = _get(cp, "problem", "d", float, required=False)
    rel = _get(cp, "problem", "d_over_d_star_star", float, required=False)
    if need_d and d is None and rel is None:
        raise ConfigError("missing config key [problem] d")
    mesh = (
        _get(cp, "mesh", "n_interior", _int),
        _get(cp, "mesh", "n_exterior", _int),
        _get(cp, "mesh", "R_ext", float),
        _get(cp, "mesh", "grading", float),
    )
    tol = {k: _get(cp, "tolerances", k, float) for k in ("residual", "quadrature", "kkt")}
    C = _get(cp, "embedding", "C", str, "estimate", required=False).strip()
    if C != "estimate":
        try:
            C = float(C)
        except ValueError:
            raise ConfigError(f"bad value for [embedding] C: {C!r}") from None
    cfg = RunConfig(
        n=n, s=s, q=q, d=d, d_over_d_star_star=rel, mesh=mesh, tolerances=tol,
        seed=_get(cp, "solver", "seed", _int, 0, required=False),
        restarts=_get(cp, "solver", "restarts", _int, 16, required=False),
        method=_get(cp, "solver", "method", str, "mountain_pass", required=False).strip(),
        path_resolution=_get(cp, "solver", "path_resolution", _int, 33, required=False),
        max_iters=_get(cp, "solver", "max_iters", _int, 5000, required=False),
        epsilon=_get(cp, "solver", "epsilon", float, 0.05, required=False),
        C_embed=C,
        family_size=_get(cp, "embedding", "family_size", _int, 32, required=False),
        d_values=_get(cp, "sweep", "d_values", _floats, required=need_grid) or [],
        q_values=_get(cp, "sweep", "q_values", _floats, required=need_grid) or [],
        levels=_get(cp, "verify", "levels", _int, 6, required=False),
        moser_slack=_get(cp, "verify", "moser_slack", float, bounds.MOSER_SLACK, required=False),
    )
    if cfg.method not in ("mountain_pass", "gradient_flow", "newton"):
        raise ConfigError(f"unknown [solver] method {cfg.method!r}")
    try:
        ProblemParams(n, s, d or 1.0, q if q is not None else 3.0)
        build_mesh(*mesh)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return cfg


# ---------------------------------------------------------------------------
# pipeline pieces


class Session:
    """Assembled forms and spectrum for one (n, s, mesh), computed once."""

    def __init__(self, cfg):
        self.cfg = cfg
        mesh = build_mesh(*cfg.mesh)
        self.kernel = KernelConfig(cfg.n, cfg.s)
        self.forms = assemble_forms(mesh, self.kernel, tol=cfg.tolerances["quadrature"])
        self.spectral = compute_spectrum(self.forms, restarts=cfg.restarts, seed=cfg.seed,
                                         tol=cfg.tolerances["kkt"])
        self._C = {}

    def embedding_constant(self, q):
        if self.cfg.C_embed != "estimate":
            return float(self.cfg.C_embed), float(self.cfg.C_embed)
        two_n = bounds.critical_exponent(self.cfg.n, self.cfg.s)
        two_1 = bounds.critical_exponent(1, self.cfg.s)
        p = two_n if math.isfinite(two_n) else 2.0 * q
        p1 = two_1 if math.isfinite(two_1) else 2.0 * q
        for key, cone in ((p, False), (p1, True)):
            if (key, cone) not in self._C:
                self._C[(key, cone)] = bounds.embedding_constant_estimate(
                    self.forms, key, cone, family_size=self.cfg.family_size, seed=self.cfg.seed)
        return self._C[(p, False)], self._C[(p1, True)]

    def params(self, d, q):
        return ProblemParams(self.cfg.n, self.cfg.s, d, q).with_spectrum(self.spectral.lambda2_r_plus)

    def resolve_d(self, q):
        if self.cfg.d is not None:
            return self.cfg.d
        return self.cfg.d_over_d_star_star * (q - 2.0) / self.spectral.lambda2_r_plus

    def constants(self, params):
        C, C1 = self.embedding_constant(params.q)
        return bounds.compute_constants(params, self.spectral, C, C_embed_cone=C1)

    def solve(self, params):
        cfg = self.cfg
        model = EnergyModel(params, self.forms)
        if cfg.method == "mountain_pass":
            return mountain_pass(model, self.spectral, path_resolution=cfg.path_resolution,
                                 max_deformations=cfg.max_iters, tol=cfg.tolerances["residual"])
        rng = np.random.default_rng(cfg.seed)
        nI = self.forms.n_interior
        w = np.cumsum(rng.exponential(size=nI))
        u0 = cone_project(self.forms, 1.0 + cfg.epsilon * w / w.max())
        if cfg.method == "gradient_flow":
            return gradient_flow(model, u0, max_iters=cfg.max_iters, tol=cfg.tolerances["residual"])
        return newton_refine(model, u0, tol=cfg.tolerances["residual"])


def _verification(session, params, u, report):
    """Verifier block for a profile; returns (dict, all_passed)."""
    forms, cfg = session.forms, session.cfg
    tol = cfg.tolerances["residual"]
    _, rel = weak_residual(forms, params, u.values, full_output=True)
    out = {"residual": rel, "residual_ok": bool(rel <= tol)}
    mass = bounds.mass_identity_check(forms, params, u)
    out["mass_identity"] = mass
    out["mass_identity_ok"] = bool(mass <= max(10 * tol, 1e-8))
    if out["residual_ok"] and report.K_infty_valid and params.q < report.p_used:
        trace = bounds.moser_recurrence_check(forms, params, u, report.C_embed, levels=cfg.levels,
                                              report=report, slack=cfg.moser_slack,
                                              residual_tol=max(tol, 1e-8))
        out["moser_levels"] = [list(map(float, row)) for row in trace.levels]
        out["moser_ok"] = trace.passed
        out["linf"] = trace.linf
        out["linf_bound"] = trace.linf_bound
        out["linf_ok"] = trace.linf_ok
    else:
        out["moser_ok"] = None
    cert = bounds.nonexistence_certificate(forms, params, session.spectral, u, report=report,
                                           residual_tol=max(tol, 1e-8))
    out["certificate"] = cert
    ibp = check_integration_by_parts(forms, session.kernel, lambda r: 1.0 - r**2, lambda r: r**2)
    out["ibp_discrepancy"] = float(ibp)
    checks = [out["residual_ok"], out["mass_identity_ok"], cert["certificate_holds"]]
    if out["moser_ok"] is not None:
        checks += [out["moser_ok"], out["linf_ok"]]
    return out, all(checks)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else str(x)
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def _write(path, text):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _hypothesis_ok(params, report):
    """True when the existence or the non-existence theorem applies at (d, q)."""
    f = params.hypothesis_flags
    exists = bool(f["q_above_spectral_threshold"]) and f["q_below_radial_bound"]
    nonexists = f["q_below_n_bound"] and report.K_infty_valid and params.d > report.d_star
    return bool(exists or nonexists)


# ---------------------------------------------------------------------------
# commands


def cmd_constants(cfg, out):
    session = Session(cfg)
    params = session.params(session.resolve_d(cfg.q), cfg.q)
    rep = session.constants(params)
    _write(os.path.join(out, "constants.txt"), rep.to_text())
    _write(os.path.join(out, "constants.json"), rep.to_json())
    if not rep.K_infty_valid:
        print("warning: q >= (2*+2)/2, K_infty is not valid", file=sys.stderr)
        return EXIT_HYPOTHESIS
    return EXIT_OK


def cmd_spectrum(cfg, out):
    session = Session(cfg)
    sp = session.spectral
    rows = [
        ("lambda2_r", sp.lambda2_r, sp.residuals["lambda2_r"], 1),
        ("lambda2_r_plus", sp.lambda2_r_plus, sp.residuals["lambda2_r_plus"], sp.restarts_used),
    ]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("name", "value", "residual", "restarts"))
    for row in rows:
        w.writerow([_fmt(x) for x in row])
    _write(os.path.join(out, "spectrum.csv"), buf.getvalue())
    sp.phi2.save(os.path.join(out, "phi2.txt"), cfg.n, cfg.s)
    sp.phi2_r.save(os.path.join(out, "phi2_r.txt"), cfg.n, cfg.s)
    return EXIT_OK


def cmd_solve(cfg, out):
    session = Session(cfg)
    params = session.params(session.resolve_d(cfg.q), cfg.q)
    if not params.hypothesis_flags["q_above_spectral_threshold"]:
        print("warning: q <= 2 + d*lambda2_r_plus, the existence hypothesis fails", file=sys.stderr)
    res = session.solve(params)
    res.save(os.path.join(out, "solution.txt"), cfg.n, cfg.s)
    rep = session.constants(params)
    ver, ok = _verification(session, params, res.u, rep)
    summary = {
        "classification": res.classification,
        "in_cone": res.in_cone,
        "energy": res.energy,
        "energy_of_one": _energy_of_one(params, session.forms),
        "residual": res.residual_norm,
        "message": res.message,
        "hypothesis_flags": params.hypothesis_flags,
        "diagnostics": res.diagnostics,
        "verification": ver,
    }
    _write(os.path.join(out, "solve.json"), json.dumps(_jsonable(summary), indent=2) + "\n")
    return EXIT_OK if ok else EXIT_VERIFY


def _energy_of_one(params, forms):
    return energy(EnergyModel(params, forms), np.ones(forms.mesh.size))


def _sweep_point(session, d, q):
    params = session.params(d, q)
    rep = session.constants(params)
    res = session.solve(params)
    x = res.u.values
    linf = float(np.abs(x[: session.forms.n_interior]).max())
    return (d, q, session.cfg.s, session.cfg.n, res.classification, res.energy, res.residual_norm,
            linf, rep.d_star, rep.d_star_star, session.spectral.lambda2_r_plus,
            _hypothesis_ok(params, rep))


def thread_count():
    raw = os.environ.get("FRAC_NEUMANN_THREADS", "1")
    try:
        k = int(raw)
    except ValueError:
        raise ConfigError(f"FRAC_NEUMANN_THREADS must be an integer, got {raw!r}") from None
    return max(1, k)


def cmd_sweep(cfg, out):
    session = Session(cfg)
    for q in cfg.q_values:
        session.embedding_constant(q)
    grid = [(d, q) for d in cfg.d_values for q in cfg.q_values]
    with ThreadPoolExecutor(max_workers=thread_count()) as pool:
        rows = list(pool.map(lambda dq: _sweep_point(session, *dq), grid))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for row in rows:
        w.writerow([_fmt(x) for x in row])
    _write(os.path.join(out, "sweep.csv"), buf.getvalue())
    return EXIT_OK


def cmd_verify(cfg, out, solution_file):
    try:
        with open(solution_file, encoding="ascii") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read solution file: {exc}") from None
    try:
        if text.startswith("# frac-neumann profile"):
            u, meta = parse_profile(text)
        else:
            u = parse_solver_result(text)[0].u
    except (ValueError, KeyError) as exc:
        raise ConfigError(f"malformed solution file: {exc}") from None
    session = Session(cfg)
    if not session.forms.mesh.same_as(u.mesh):
        raise ConfigError("solution mesh differs from the configured mesh")
    u = DiscreteFunction(session.forms.mesh, u.values)
    params = session.params(session.resolve_d(cfg.q), cfg.q)
    rep = session.constants(params)
    ver, ok = _verification(session, params, u, rep)
    ver["classification"] = classify(session.forms, u)
    ver["passed"] = ok
    _write(os.path.join(out, "verify.json"), json.dumps(_jsonable(ver), indent=2) + "\n")
    print("verification " + ("passed" if ok else "failed"))
    return EXIT_OK if ok else EXIT_VERIFY


# ---------------------------------------------------------------------------
# entry point


def _version():
    try:
        v = metadata.version("artifact")
    except metadata.PackageNotFoundError:
        v = "unknown"
    return f"artifact {v}; kernel normalization {NORMALIZATION_ID}"


def build_parser():
    ap = argparse.ArgumentParser(prog="frac-neumann", description=__doc__.split("\n")[0],
                                 formatter_class=argparse.RawTextHelpFormatter)
    ap.add_argument("--version", action="version", version=_version())
    sub = ap.add_subparsers(dest="command", required=True)
    for name in ("constants", "spectrum", "solve", "sweep", "verify"):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True)
        p.add_argument("--out", default=".")
        if name == "verify":
            p.add_argument("--solution", required=True, help="profile or solution file")
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, need_d=args.command != "sweep",
                          need_grid=args.command == "sweep")
        os.makedirs(args.out, exist_ok=True)
        if args.command == "constants":
            return cmd_constants(cfg, args.out)
        if args.command == "spectrum":
            return cmd_spectrum(cfg, args.out)
        if args.command == "solve":
            return cmd_solve(cfg, args.out)
        if args.command == "sweep":
            thread_count()
            return cmd_sweep(cfg, args.out)
        return cmd_verify(cfg, args.out, args.solution)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
