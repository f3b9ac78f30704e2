"""Exact surgery calculus for perturbative invariants of rational homology spheres."""
from .ring import FormalSeries, LaurentPoly, Scalar, binomial_series, h_from_kinv, kinv_from_h, quantum_number

__all__ = ["FormalSeries", "LaurentPoly", "Scalar", "binomial_series", "h_from_kinv", "kinv_from_h",
           "quantum_number"]
__version__ = "0.1.0"
