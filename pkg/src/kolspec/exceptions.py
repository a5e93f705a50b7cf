"""Exception hierarchy shared across the package.

The command line front end maps these onto exit codes: usage and
validation problems exit with 1, numerical failures with 2.
"""


class KolspecError(Exception):
    """Base class for all package errors."""


class ParameterError(KolspecError, ValueError):
    """A parameter is out of range or an input fails validation."""


class StructuralError(KolspecError, ValueError):
    """Mismatched sizes between objects that must describe the same cloud."""


class DegenerateInputError(KolspecError):
    """Input data is degenerate (zero bandwidths, vanishing densities, ...)."""


class TuningError(KolspecError):
    """Bandwidth tuning failed, e.g. a flat objective over the search range."""


class EigenSolverError(KolspecError):
    """The iterative eigensolver did not converge to tolerance."""


class IllConditionedError(KolspecError):
    """A spectral solve would divide by a numerically zero eigenvalue."""
