"""Exception types raised by the simulator."""

from __future__ import annotations


class DomainError(ValueError):
    """An argument lies outside the domain an operation is defined on."""


class ExtrapolationError(DomainError):
    """A tabulated quantity was queried outside its sampled range."""


class ResolutionError(DomainError):
    """A raster or grid is too coarse to resolve the physics it samples."""


class ConfigError(ValueError):
    """Invalid run configuration. ``field`` names the offending key."""

    def __init__(self, message: str, field: str | None = None):
        super().__init__(message if field is None else f"{field}: {message}")
        self.field = field


class IntegrationError(ArithmeticError):
    """Numerical integration produced a non-finite or unphysical state.

    ``tau`` is the local time at which the failure was detected.
    """

    def __init__(self, message: str, tau: float):
        super().__init__(f"{message} (at tau={tau:.12g} ns)")
        self.tau = tau
