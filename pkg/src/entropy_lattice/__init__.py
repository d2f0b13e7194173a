"""Exact and Laplace-type partition sums on entropy lattices.

The probability of a lattice point ``x`` is proportional to ``exp S(x, N)``.
The package computes the exact sums in the log domain, the leading-order
Laplace approximations for interior and boundary maxima, and empirical
convergence rates of the LLN and CLT moment generating functions.
"""
__version__ = "0.1.0"

from .errors import EntropyLatticeError
from .kernels import BACKEND
from .lattice import BoundarySpec, Box, LatticeDomain, build_lattice, build_rotation
from .entropy_model import EntropyModel, make_model, MODEL_REGISTRY
from .exact_engine import LogValue, DiscreteDistribution, partition_sum, pmf, mgf_exact
from .laplace import MaximumInfo, classify_maximum, approx_interior, approx_boundary
from .limits import LimitLaw, ConvergenceReport, lln_error_curve, clt_error_curve

__all__ = [
    "__version__", "BACKEND", "EntropyLatticeError",
    "BoundarySpec", "Box", "LatticeDomain", "build_lattice", "build_rotation",
    "EntropyModel", "make_model", "MODEL_REGISTRY",
    "LogValue", "DiscreteDistribution", "partition_sum", "pmf", "mgf_exact",
    "MaximumInfo", "classify_maximum", "approx_interior", "approx_boundary",
    "LimitLaw", "ConvergenceReport", "lln_error_curve", "clt_error_curve",
]
