"""Exception hierarchy shared by every solver and by the command-line runner."""


class SolverError(Exception):
    """Base class for every failure raised by the library."""


class ConfigError(SolverError, ValueError):
    """Invalid parameters, grids, boundary data or scenario keys."""


class SupportError(SolverError):
    """A field's support does not fit in the trusted half of the box."""


class ConvergenceError(SolverError):
    """An iteration ran out of its budget before meeting its tolerance."""

    def __init__(self, message, iterations=None, last_increment=None):
        super().__init__(message)
        self.iterations = iterations
        self.last_increment = last_increment


class ResolutionError(SolverError):
    """A numerical gate failed (J <= 0, circle preservation, monotonicity)."""


class InversionError(SolverError):
    """Map inversion failed for at least one requested point."""

    def __init__(self, message, points=None):
        super().__init__(message)
        self.points = points


class NonzeroIndexError(SolverError):
    """Boundary coefficient has nonzero winding index."""

    def __init__(self, index, name="coefficient"):
        super().__init__(
            f"{name} has winding index {index}; only index-0 problems are "
            "solved (nonzero index needs the Gakhov canonical-function "
            "factorization, which is not implemented)"
        )
        self.index = index


class FieldFormatError(SolverError):
    """Corrupt or unsupported BFLD file."""


class ProbeError(SolverError):
    """A probe needs values the field cannot provide."""
