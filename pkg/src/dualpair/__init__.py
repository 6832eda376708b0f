"""Numerical laboratory for the dual-pair measure, pair kernels and the
dyadic level-set decomposition of nonlocal double-phase energies."""

from .params import (
    CANONICAL,
    AssumptionViolation,
    ParameterSet,
    check_assumptions,
    derive_exponents,
)

__all__ = ["CANONICAL", "AssumptionViolation", "ParameterSet", "check_assumptions", "derive_exponents"]
__version__ = "0.1.0"
