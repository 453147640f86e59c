"""Exact symbolic checks of Hamiltonian operators, conservation laws and metrics for WDVV hydrodynamic-type systems."""

from .algebra import Expr, Var, canonicalize, equals_zero, parse

__version__ = "0.1.0"

__all__ = ["Expr", "Var", "canonicalize", "equals_zero", "parse", "__version__"]
