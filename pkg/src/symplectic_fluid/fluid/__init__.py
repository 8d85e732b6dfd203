"""Flow scenes, their canonical forms and the structure verification suites."""
from .objects import (
    BUDGET_COLUMNS,
    ExcessiveMaskingError,
    HelicityBudget,
    HelicityFields,
    SuspensionResult,
    build_omega,
    build_theta,
    domain_integral,
    fit_exponential_rate,
    hamiltonian_closed_form,
    helicity_budget,
    helicity_current,
    helicity_current_closed_form,
    helicity_density_residual,
    helicity_fields,
    helicity_flux,
    suspension,
    suspension_one_form,
    theta_wedge_omega_closed_form,
    vorticity,
)
from .report import CheckResult, VerificationReport
from .scene import FluidScene
from .suites import (
    NUMERIC_TOL,
    four_form_identity,
    inviscid_current_closed_form,
    random_smooth_function,
    verify_prop1,
    verify_prop2,
    verify_prop3,
    verify_prop4,
    vorticity_over_q,
)

__all__ = [
    "BUDGET_COLUMNS",
    "CheckResult",
    "ExcessiveMaskingError",
    "FluidScene",
    "HelicityBudget",
    "HelicityFields",
    "NUMERIC_TOL",
    "SuspensionResult",
    "VerificationReport",
    "build_omega",
    "build_theta",
    "domain_integral",
    "fit_exponential_rate",
    "four_form_identity",
    "hamiltonian_closed_form",
    "helicity_budget",
    "helicity_current",
    "helicity_current_closed_form",
    "helicity_density_residual",
    "helicity_fields",
    "helicity_flux",
    "inviscid_current_closed_form",
    "random_smooth_function",
    "suspension",
    "suspension_one_form",
    "theta_wedge_omega_closed_form",
    "verify_prop1",
    "verify_prop2",
    "verify_prop3",
    "verify_prop4",
    "vorticity",
    "vorticity_over_q",
]
