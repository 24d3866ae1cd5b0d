"""Exception hierarchy.

Numerical failures derive from ``NumericalError`` so the command line can map
them to a single exit code.
"""


class HclabError(Exception):
    """Base class for all package errors."""


class InvalidInputError(HclabError, ValueError):
    """Malformed parameters, states or files."""


class UnsupportedCycleError(InvalidInputError):
    """Cycle length outside the supported range (p = 3 in particular)."""


class PreconditionError(HclabError):
    """An operation was called outside the regime where it is meaningful."""


class NumericalError(HclabError):
    """Base class for failures of a numerical procedure."""


class DegenerateSaddleError(NumericalError):
    """A zero eigenvalue at a designated equilibrium."""


class DivergenceError(NumericalError):
    def __init__(self, message, last_time):
        super().__init__(message)
        self.last_time = last_time


class IntegratorFailure(NumericalError):
    """A state component went negative beyond the clamping tolerance."""


class PassageFailure(NumericalError):
    """An orbit left a saddle neighbourhood through the stable coordinates."""


class TraceFailure(NumericalError):
    """An unstable-manifold orbit did not reach its target saddle."""


class MeshConsistencyError(NumericalError):
    """Adjacent charts disagree along a shared heteroclinic edge."""


class InvalidMeshError(HclabError, ValueError):
    """A mesh that is not a manifold with boundary."""


class ChannelViolationError(NumericalError):
    """An itinerary step other than +1 or +2 around the cycle."""
