"""Exception taxonomy shared by all canvas_nav modules."""


class CanvasNavError(Exception):
    """Base class for every error raised by this package."""


class DegenerateInput(CanvasNavError):
    """Geometry too small/empty for the requested operation."""


class FormatError(CanvasNavError):
    """Malformed map file, metadata, or record."""


class ClassError(FormatError):
    """Gray value or class name not declared in the map class table."""


class OutOfBounds(CanvasNavError):
    """Query point or pose lies outside the grid."""


class ContractViolation(CanvasNavError):
    """Caller broke an interface contract (e.g. wrong waypoint count)."""


class InsufficientData(CanvasNavError):
    """Not enough samples to fit the requested model."""


class TokenOutOfRange(CanvasNavError):
    """Waypoint token id outside [0, K)."""


class NoPath(CanvasNavError):
    """Planner could not produce any waypoints, even by fallback."""


class ProtocolError(CanvasNavError):
    """Malformed frame or wrong response shape on the policy wire."""


class PolicyTimeout(CanvasNavError):
    """Remote policy did not answer within the deadline."""


class SchemaError(CanvasNavError):
    """Datapoint JSON failed validation; message names the field path."""

    def __init__(self, field: str, message: str = ""):
        self.field = field
        super().__init__(f"{field}: {message}" if message else field)


class MissingDemo(CanvasNavError):
    """Operation requires a human demonstration that is absent."""


class GenerationFailed(CanvasNavError):
    """Misleading-sketch generator exhausted its noise schedule."""


class CodebookMismatch(CanvasNavError):
    """Codebook K does not match the configured vocabulary size."""


class ConditionMismatch(CanvasNavError):
    """Sketch geometry contradicts its Precise/Misleading label."""

    def __init__(self, message: str, segment_index: int = -1):
        self.segment_index = segment_index
        super().__init__(message)


class SessionAborted(CanvasNavError):
    """Teleop session ended abnormally; partial record preserved."""
