"""Exception hierarchy.

Every error raised by the library carries the name of the module it came
from so the command line front end can report where a pipeline failed.
"""


class FdxError(Exception):
    """Base class for all fdxsim errors."""

    module = "fdxsim"


class InvalidGeometryError(FdxError, ValueError):
    module = "array-geometry"


class SingularRangeError(FdxError, ValueError):
    """An observation point coincides with an array element."""

    module = "array-geometry"


class DimensionError(FdxError, ValueError):
    module = "fdxsim"

    def __init__(self, message, module=None):
        super().__init__(message)
        if module is not None:
            self.module = module


class NormalizationError(FdxError, ValueError):
    module = "si-channel"


class EmptyNullSpaceError(FdxError, ValueError):
    """A projection was requested onto an orthogonal complement that is empty."""

    module = "cancellation"


class CovarianceError(FdxError, ValueError):
    module = "link-eval"


class SelectionError(FdxError, ValueError):
    module = "user-select"


class ScenarioError(FdxError, ValueError):
    """Invalid scenario configuration.

    Parameters
    ----------
    message : str
        What went wrong.
    section : str, optional
        Config section the problem belongs to.
    line : int, optional
        1-based line number in the config text, when known.
    """

    module = "scenario-cli"

    def __init__(self, message, section=None, line=None):
        self.section = section
        self.line = line
        where = []
        if section is not None:
            where.append(f"[{section}]")
        if line is not None:
            where.append(f"line {line}")
        prefix = " ".join(where)
        super().__init__(f"{prefix}: {message}" if prefix else message)
