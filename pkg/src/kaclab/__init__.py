"""Ising-Kac Glauber dynamics, dynamical Phi^4_2 sampling and discrete Besov norms."""

from .errors import (BudgetError, ConfigurationError, DegenerateKernelError, DimensionError,
                     KaclabError, ParameterError, ProfileError, SchemaError)
from .lattice import TorusField
from .kernel import KacKernel, build_kernel, renorm_constant

__version__ = "0.1.0"
