"""Exception types raised across kaclab."""


class KaclabError(Exception):
    """Base class for all package errors."""


class DimensionError(KaclabError, ValueError):
    """Fields living on incompatible lattices."""


class ConfigurationError(KaclabError, ValueError):
    """Invalid simulation or construction parameters."""


class ProfileError(KaclabError, ValueError):
    """Kernel profile is negative or not twice differentiable."""


class DegenerateKernelError(KaclabError, ArithmeticError):
    """A nonzero frequency has kernel symbol equal to one."""


class ParameterError(KaclabError, ValueError):
    """Argument outside the domain of an operation."""


class BudgetError(KaclabError, ValueError):
    """Exact enumeration would exceed the configuration budget."""


class SchemaError(KaclabError, KeyError):
    """Experiment configuration does not match the documented schema."""

    def __init__(self, key, message=None):
        self.key = key
        super().__init__(message or f"invalid configuration key: {key!r}")

    def __str__(self):
        return self.args[0]
