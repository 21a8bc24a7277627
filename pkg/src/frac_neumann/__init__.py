"""Radial finite elements for d(-Delta)^s u + u = u^(q-1) on the unit ball
with the nonlocal Neumann condition."""

from .bounds import (
    ConstantsReport,
    MoserTrace,
    compute_constants,
    embedding_constant_estimate,
    mass_identity_check,
    moser_recurrence_check,
    nonexistence_certificate,
    small_q_limit_check,
)
from .discretization import (
    BilinearForms,
    DiscreteFunction,
    QuadratureError,
    RadialMesh,
    assemble_forms,
    build_mesh,
    check_integration_by_parts,
    load_profile,
    parse_profile,
    seminorm_sq,
    weak_residual,
)
from .kernel_core import (
    NORMALIZATION_ID,
    KernelConfig,
    angular_kernel,
    neumann_derivative,
    neumann_extension,
    normalization_constant,
    pointwise_fractional_laplacian,
)
from .nonlinear import (
    EnergyModel,
    SolverResult,
    classify,
    cone_project,
    energy,
    energy_expansion_check,
    energy_gradient,
    gradient_flow,
    mountain_pass,
    newton_refine,
)
from .problem import ProblemParams, critical_exponent, g_trunc
from .spectrum import (
    ConvergenceError,
    SpectralResult,
    compute_spectrum,
    rayleigh_quotient,
    second_eigenvalue,
    second_monotone_eigenvalue,
)
