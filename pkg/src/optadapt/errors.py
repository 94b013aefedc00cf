"""Exception types shared across the package."""


class OptAdaptError(Exception):
    """Base class for every error raised by optadapt."""


class SchemaError(OptAdaptError, ValueError):
    """A model, scenario or suite document does not match its schema."""

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")


class ValidationError(OptAdaptError, ValueError):
    """Parsed values violate a model or scenario invariant."""


class DimensionError(OptAdaptError, ValueError):
    """Array shapes disagree with the model dimensions."""


class UnreachableGoalError(OptAdaptError):
    """Inverse kinematics could not reach the requested position."""


class NumericError(OptAdaptError, FloatingPointError):
    """A non-finite value entered a computation that requires finite input."""


class DivergenceError(OptAdaptError):
    """An iterative procedure left its stable region.

    ``step`` names the time step (rollouts, Riccati pass) or outer
    iteration (planner) where it happened.
    """

    def __init__(self, message, step=None):
        self.step = step
        super().__init__(message if step is None else f"{message} (step {step})")
