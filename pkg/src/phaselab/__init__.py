"""Numerical laboratory for alignment models with density-driven phase transitions."""

from .errors import (
    ConsistencyError,
    ConvergenceError,
    DomainError,
    PhaselabError,
    QuadratureError,
    RangeError,
)
from .vmf import (
    log_vmf_normalization,
    order_parameter,
    order_parameter_prime,
    vmf_moment,
    vmf_normalization,
)

__version__ = "0.1.0"
