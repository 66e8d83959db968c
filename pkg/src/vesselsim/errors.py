"""Exception hierarchy. One class per failure mode so callers can catch precisely."""


class VesselSimError(Exception):
    """Base class for all package errors."""


# ---- phantom -----------------------------------------------------------------


class MalformedImageError(VesselSimError):
    """PGM bytes could not be parsed (bad magic, header, or truncated payload)."""


class EmptyGridError(VesselSimError):
    """Grid has zero cells."""


class InfeasibleSpecError(VesselSimError):
    """Tree generator spec produces channels narrower than one cell."""


class InvalidParamsError(VesselSimError):
    """Numeric parameters outside their documented domain."""


class OutOfBoundsError(VesselSimError):
    """Queried pose lies outside the grid."""


# ---- planner -----------------------------------------------------------------


class NoPathError(VesselSimError):
    """Start and goal lie in disconnected free-space components."""


class BlockedEndpointError(VesselSimError):
    """Start or goal cell is occupied."""


class PathTooShortError(VesselSimError):
    """Centerline arc length is shorter than the rod."""


class ChordInfeasibleError(VesselSimError):
    """No polyline point lies at chord distance L behind the head (path folds back
    tighter than the rod)."""


class EmptyPathError(VesselSimError):
    """Operation requires a non-empty path."""


# ---- control -----------------------------------------------------------------


class AlphaOutOfRangeError(VesselSimError):
    """Authority value outside [0, 0.9]."""


class EmptyBufferError(VesselSimError):
    """Chunk aggregation requested before any chunk was issued."""


class DegenerateCalibrationError(VesselSimError):
    """Grip calibration has override force <= baseline force."""


class AdapterTimeoutError(VesselSimError):
    """External authority adapter unreachable at connect time."""


class MalformedReplyError(VesselSimError):
    """External adapter reply failed schema or bound validation."""


# ---- haptics -----------------------------------------------------------------


class NonPositiveDistanceError(VesselSimError):
    """Repulsive force queried at d <= 0."""


class NonUnitNormalError(VesselSimError):
    """Wall normal is not unit length."""


# ---- sim ---------------------------------------------------------------------


class InvalidDtError(VesselSimError):
    """Non-positive integration step."""


class InfeasibleTrialError(VesselSimError):
    """Trial cannot start (no path, blocked endpoints, or no valid initial pose)."""


# ---- metrics -----------------------------------------------------------------


class IncompleteLogError(VesselSimError):
    """Trial log lacks ticks or a terminal status."""


class TooShortError(VesselSimError):
    """Log too short for the smoothness metric."""


class EmptyGroupError(VesselSimError):
    """Report aggregation over an empty condition group."""


# ---- harness -----------------------------------------------------------------


class ConfigError(VesselSimError):
    """Config file rejected; message carries the offending key path."""


class SchemaVersionMismatchError(VesselSimError):
    """Log or frame schema version not supported."""


class PortBusyError(VesselSimError):
    """Requested service port already bound."""
