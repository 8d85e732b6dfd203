"""Flows that solve the equations of motion: exact solutions and a spectral solver."""
from .catalog import (
    CatalogError,
    CatalogSpec,
    abc_field,
    make_decaying_beltrami,
    make_scene,
    make_shear_euler,
    scale_velocity,
)
from .residuals import dynamics_residuals, momentum_terms, vorticity_terms
from .solver import (
    AdvectionResult,
    SolverConfig,
    SolverInstabilityError,
    SpectralBox,
    advect_scalar,
    cfl_number,
    initial_velocity,
    pressure_from_velocity,
    sample_scene,
    step_navier_stokes,
    with_advected_phi,
)
