"""Exception hierarchy shared by all gpinow modules."""


class GpinowError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(GpinowError):
    """Bad configuration: column maps, run configs, parameter values."""


class DataValidationError(GpinowError, ValueError):
    """Input data violates a documented invariant."""


class NotFoundError(GpinowError, KeyError):
    """A requested country, month or key is absent."""

    def __str__(self):
        return str(self.args[0]) if self.args else ""


class ContractError(GpinowError, ValueError):
    """Caller broke an interface contract (shapes, column ids, alignment)."""


class DomainError(GpinowError, ValueError):
    """A value is outside the mathematical domain of an operation."""


class UnsupportedModelError(GpinowError, TypeError):
    """The operation is not defined for this model variant."""
