"""Exception taxonomy shared across the package.

Each failure mode the pipeline can hit gets a distinct class so callers (and
the command-line front end, which maps them to exit codes) can react without
string matching.
"""

__all__ = [
    "DissipacertError",
    "ValidationError",
    "WindowError",
    "InformativityError",
    "DivergenceError",
    "NumericalError",
    "EquilibriumError",
    "ReductionError",
    "InfeasibleError",
]


class DissipacertError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(DissipacertError, ValueError):
    """Malformed or dimensionally inconsistent input."""


class WindowError(DissipacertError, IndexError):
    """A requested sample window falls outside the recorded trajectory."""


class InformativityError(DissipacertError):
    """Data too poor for the requested construction (rank / excitation).

    Carries the achieved and required ranks when known.
    """

    def __init__(self, message, achieved=None, required=None):
        super().__init__(message)
        self.achieved = achieved
        self.required = required


class DivergenceError(DissipacertError):
    """A simulated state became non-finite; ``index`` is the first bad step."""

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class NumericalError(DissipacertError):
    """A numerical routine failed to produce a usable result."""


class EquilibriumError(DissipacertError):
    """The fixed-point equation has no unique solution."""


class ReductionError(DissipacertError):
    """Minimal-realization reduction hit a degenerate subspace."""


class InfeasibleError(DissipacertError):
    """A matrix-inequality problem was certified or reported infeasible.

    ``worst_constraint`` names the most violated (or tightest) constraint and
    ``slack`` is the best achievable largest eigenvalue over all blocks, when
    the solver produced one.
    """

    def __init__(self, message, worst_constraint=None, slack=None):
        super().__init__(message)
        self.worst_constraint = worst_constraint
        self.slack = slack
