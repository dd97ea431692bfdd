"""Exception types shared across the package; the CLI maps them to exit codes."""


class ConfigError(ValueError):
    """A scenario description is malformed or out of range."""


class GeometryViolation(ValueError):
    """Control regions, sources or evaluation spheres overlap where they must not."""


class SingularKernelError(ValueError):
    """A kernel was evaluated at its singularity."""


class NumericalFailure(RuntimeError):
    """A non-finite value or failed factorization surfaced during a solve."""
