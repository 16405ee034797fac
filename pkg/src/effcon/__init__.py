"""effcon: exact effective-constraint reduction on the quantum phase space."""

from .gaussrat import GaussRat
from .moments import MomentSpace
from .operators import OperatorPoly, commutator, op_mul, weyl_monomial
from .ring import RingError, ScalarExpr, SymbolTable

__all__ = [
    "GaussRat",
    "MomentSpace",
    "OperatorPoly",
    "RingError",
    "ScalarExpr",
    "SymbolTable",
    "commutator",
    "op_mul",
    "weyl_monomial",
]

__version__ = "0.1.0"
