"""Exception types shared across the package."""


class SldgError(Exception):
    """Base class for all package errors."""


class DomainError(SldgError, ValueError):
    """Invalid spatial domain or point outside it."""


class ParameterError(SldgError, ValueError):
    """Scalar parameter outside its admissible range (dt, kappa, counts...)."""


class MeshMismatchError(SldgError, ValueError):
    """Two fields that must share a mesh/degree do not."""


class SizeGuardError(SldgError, ValueError):
    """Diagnostic-scale operation requested on a too-large system."""


class SolverError(SldgError, RuntimeError):
    """Linear solve failed: singular assembly or non-converged iteration."""


class ConfigError(SldgError, ValueError):
    """Invalid run configuration (unknown key, type mismatch, bad value)."""
