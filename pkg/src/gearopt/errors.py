"""Exception types shared across the toolkit.

The CLI maps these onto its exit-code contract:

    2  parse / validation errors (CycleFormatError, ValidationError)
    3  loss-model fit failures (FitError)
    4  design/control infeasibility (InfeasibleError)
    5  simulation envelope violations (EnvelopeError)
"""


class GearoptError(Exception):
    """Base class for all toolkit errors."""


class CycleFormatError(GearoptError):
    """Malformed CSV input; carries a 1-based line number when known."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class ValidationError(GearoptError):
    """Input violates a documented invariant or precondition."""


class ExtrapolationError(ValidationError):
    """Requested evaluation point lies outside the fitted power range."""


class FitError(GearoptError):
    """Loss-model fit cannot proceed, e.g. too few contour samples."""


class InfeasibleError(GearoptError):
    """No design or control satisfies the constraints; the message names the binding ones."""


class EnvelopeError(GearoptError):
    """A simulated operating point leaves the motor map envelope."""

    def __init__(self, message, step=None):
        if step is not None:
            message = f"step {step}: {message}"
        super().__init__(message)
        self.step = step
