"""Toolkit for the antipodal point process on the unit circle.

Points ``theta_1, ..., theta_n`` carry the weight
``prod_{j<k} (2 |cos((theta_j - theta_k)/2)|)^beta``, which vanishes when two
points are antipodal and favours tight clusters.  The package provides exact
quadrature and Monte Carlo oracles, the large-n formulas, a Metropolis
sampler and experiments that compare them.
"""
from .errors import DiagnosticError, DomainError, ResourceError, SamplerInitError
from .model import ModelParams, configuration, log_weight, wrap_angle
from .testfunc import TestFunction, parse_test_function

__version__ = "0.1.0"

__all__ = [
    "DiagnosticError",
    "DomainError",
    "ModelParams",
    "ResourceError",
    "SamplerInitError",
    "TestFunction",
    "configuration",
    "log_weight",
    "parse_test_function",
    "wrap_angle",
    "__version__",
]
