"""Exception types shared across the package.

Each maps to a CLI exit code: input problems exit 2, simulation
problems exit 3.  Solver non-convergence is reported through result
flags rather than an exception and exits 4.
"""


class GridLassoError(Exception):
    """Base class for all package-specific errors."""


class CaseformatError(GridLassoError):
    """Raised when case input text or structure is malformed."""


class TopologyError(GridLassoError):
    """Raised when a grid violates a structural requirement (connectivity,
    bad endpoints, nonpositive reactance, bad partition)."""


class ScenarioError(GridLassoError):
    """Raised when an event scenario cannot be applied to a case."""


class SelectionError(GridLassoError):
    """Raised when no candidate model satisfies a selection request
    (e.g. the fixed cardinality never appears on the path)."""
