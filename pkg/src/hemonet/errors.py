"""Exception types shared across the package."""


class HemonetError(Exception):
    """Base class for package-specific failures."""


class NetworkStructureError(HemonetError):
    """The segment graph is malformed (unexpected cycles, missing links)."""


class ConfigError(HemonetError):
    """A configuration value or policy table is inconsistent."""


class IntegrationError(HemonetError):
    """The segment integrator failed; carries diagnostics in args."""


class InfeasibleSampleError(HemonetError):
    """Constrained parameter sampling exhausted its rejection budget."""
