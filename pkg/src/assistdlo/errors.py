"""Exception types raised by the perception, intent, control, and sim layers."""


class AssistDloError(Exception):
    """Base class for all package-specific errors."""


class EmptyMask(AssistDloError):
    """Mask contains no foreground pixels."""


class DegenerateContour(AssistDloError):
    """Too few or degenerate contour sites for a Voronoi diagram."""


class EmptyTrace(AssistDloError):
    """No trace vertex had a valid depth measurement."""


class NoCandidates(AssistDloError):
    """Intent selection called with an empty candidate cloud."""


class DegenerateNeighborhood(AssistDloError):
    """PCA neighborhood is a single repeated point."""


class VerticalTangent(AssistDloError):
    """Tangent has no horizontal component; yaw is undefined."""


class SimDiverged(AssistDloError):
    """Rope simulation produced non-finite particle positions."""


class ConvergenceError(AssistDloError):
    """Shooting iteration failed to meet its residual tolerance."""


class OutOfRange(AssistDloError):
    """Measured projection ratio falls outside the lookup table."""
