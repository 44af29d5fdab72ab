"""Exception types shared across the package."""


class TlfemError(Exception):
    """Base class for all package errors."""


class ConstructionError(TlfemError):
    """Element basis could not be built (degenerate geometry, singular interpolation matrix)."""


class DomainError(TlfemError):
    """Material coordinates fall outside the element reference domain (strict mode)."""


class InvertedElementError(TlfemError):
    """det F dropped to or below the admissibility floor at a quadrature point.

    Carries enough context to identify the offending element; the time
    stepper treats this as a step-rejection signal.
    """

    def __init__(self, message, body_id=None, element_index=None, qp=None):
        super().__init__(message)
        self.body_id = body_id
        self.element_index = element_index
        self.qp = qp


class StepRejected(TlfemError):
    """A time step could not be completed at the current step size."""


class SolverError(TlfemError):
    """Newton or ALM iteration failed beyond recovery."""


class ScenarioError(TlfemError):
    """Scenario file failed validation."""
