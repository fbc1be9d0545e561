"""Exception types shared across the package."""


class SubapsnapError(Exception):
    """Base class for all package errors."""


class RankDeficiencyError(SubapsnapError):
    """A matrix that was required to have full column rank does not."""


class ConfigError(SubapsnapError):
    """Invalid problem/experiment configuration."""


class NumericalError(SubapsnapError):
    """A numerical computation failed (singular solve, residual too large, ...)."""
