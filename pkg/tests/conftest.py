import functools

import numpy as np
import pytest

from frac_neumann.discretization import assemble_forms, build_mesh
from frac_neumann.kernel_core import KernelConfig
from frac_neumann.spectrum import compute_spectrum


@functools.lru_cache(maxsize=None)
def forms_for(s, n_interior=200, n_exterior=50, R_ext=8.0, n=1, refinements=0):
    mesh = build_mesh(n_interior, n_exterior, R_ext, 2.0)
    for _ in range(refinements):
        mesh = mesh.refine()
    return assemble_forms(mesh, KernelConfig(n, s))


@functools.lru_cache(maxsize=None)
def spectrum_for(s, refinements=0, restarts=16):
    return compute_spectrum(forms_for(s, refinements=refinements), restarts=restarts)


@pytest.fixture(scope="session")
def forms045():
    return forms_for(0.45)


@pytest.fixture(scope="session")
def spec045():
    return spectrum_for(0.45)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one summary line per acceptance criterion
_AC = {}


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.failed):
        return
    for key in report.keywords:
        if key.startswith("AC-"):
            ok = report.passed
            prev = _AC.get(key, (True, []))
            failed = prev[1] + ([report.nodeid.split("::")[-1]] if not ok else [])
            _AC[key] = (prev[0] and ok, failed)


def pytest_configure(config):
    for k in range(1, 10):
        config.addinivalue_line("markers", f"AC-{k}: acceptance criterion {k}")


def pytest_terminal_summary(terminalreporter):
    if not _AC:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_AC, key=lambda k: int(k.split("-")[1])):
        ok, failed = _AC[key]
        line = f"{key}: {'PASS' if ok else 'FAIL'}"
        if failed:
            line += "  (failed: " + ", ".join(failed) + ")"
        terminalreporter.write_line(line)
