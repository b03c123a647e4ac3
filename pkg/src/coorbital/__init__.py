"""Numerical laboratory for coorbital dynamics in the planar restricted
circular three-body problem: the collinear point opposite the planet, its
manifolds and their exponentially small splitting, Lyapunov orbits with
their section curves and tangencies, and the two-round homoclinic mass
ratios."""

__version__ = "0.1.0"

from ._engine import JIT_ENABLED, engine_name
from .charts import ChartState, MassParam, convert, hamiltonian, \
    involution, vector_field

__all__ = [
    "ChartState", "MassParam", "convert", "hamiltonian", "involution",
    "vector_field", "JIT_ENABLED", "engine_name", "__version__",
]
