"""Coordinate exterior calculus on periodic space-time grids."""
from . import expr
from .forms import (
    DegreeError,
    GridMismatchError,
    KForm,
    SpaceTimeVector,
    d_scalar,
    exterior_derivative,
    field_norms,
    form_keys,
    form_norms,
    interior_product,
    lie_bracket,
    lie_derivative_form,
    norms,
    vector_norms,
    wedge,
)
from .grid import SpaceTimeGrid, uniform_times
from .providers import AnalyticProvider, NumericProvider, Provider, make_provider
from .symplectic import (
    DEFAULT_MASK_EPS,
    DegeneracyError,
    degeneracy_mask,
    evaluate_two_form,
    hamiltonian_residual,
    masked_fraction,
    pfaffian,
    pfaffian_density,
    solve_dual,
    solve_hamiltonian,
    symplectic_divergence,
    symplectic_volume,
)

__all__ = [
    "AnalyticProvider",
    "DEFAULT_MASK_EPS",
    "DegeneracyError",
    "DegreeError",
    "GridMismatchError",
    "KForm",
    "NumericProvider",
    "Provider",
    "SpaceTimeGrid",
    "SpaceTimeVector",
    "d_scalar",
    "degeneracy_mask",
    "evaluate_two_form",
    "exterior_derivative",
    "expr",
    "field_norms",
    "form_keys",
    "form_norms",
    "hamiltonian_residual",
    "interior_product",
    "lie_bracket",
    "lie_derivative_form",
    "make_provider",
    "masked_fraction",
    "norms",
    "pfaffian",
    "pfaffian_density",
    "solve_dual",
    "solve_hamiltonian",
    "symplectic_divergence",
    "symplectic_volume",
    "uniform_times",
    "vector_norms",
    "wedge",
]
