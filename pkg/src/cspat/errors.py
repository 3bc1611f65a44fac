"""Exception types shared across the package."""


class CspatError(Exception):
    """Base class for all package-specific errors."""


class ConfigurationError(CspatError):
    """Inconsistent grid, geometry or solver configuration."""


class InputFileError(CspatError):
    """Unreadable or malformed input file."""


class CFLError(CspatError):
    """Requested time step violates the stability bound of the wave solver."""


class InstabilityError(CspatError):
    """Non-finite values appeared during time stepping."""


class DivergenceError(CspatError):
    """Iterative solver diverged."""


class NonConvergenceError(CspatError):
    """Direct or iterative solve failed to reach its tolerance."""
