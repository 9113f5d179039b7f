"""Subgeometric convergence bounds and verification tools for adaptive MCMC."""

from ._errors import ConfigError, DomainError, NumericError, RangeError

__version__ = "0.1.0"

__all__ = ["ConfigError", "DomainError", "NumericError", "RangeError", "__version__"]
