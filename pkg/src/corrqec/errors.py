"""Exception hierarchy shared by all simulator modules."""


class SimulationError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(SimulationError, ValueError):
    """Invalid input value or violated mathematical invariant."""


class ResourceError(SimulationError):
    """Requested problem size exceeds the configured dense-storage cap."""


class StepSizeError(SimulationError):
    """Time step too large for the first-order jump expansion to be valid."""


class IntegrationError(SimulationError):
    """Numerical integration drifted outside its accuracy budget."""


class ConfigError(SimulationError):
    """Malformed or inconsistent experiment configuration."""
