"""Samplers, bridges, partitions, Markov chains and densities for
Poisson-Kingman models driven by stable and generalized gamma subordinators."""
from .errors import (ConsistencyError, DomainError, ParameterError, QuadratureError,
                     UnsupportedInputError)
from .rand_core import RngStream, ZetaSpec
from .sticks import EPG, PD, PG

__version__ = "0.1.0"

__all__ = ["RngStream", "ZetaSpec", "PD", "PG", "EPG", "ParameterError", "DomainError",
           "ConsistencyError", "UnsupportedInputError", "QuadratureError"]
