"""Exception types shared across the package."""


class StillMotionError(Exception):
    """Base class for all stillmotion errors."""


class ConfigError(StillMotionError, ValueError):
    """A configuration value violates a documented constraint."""


class TrajectoryError(StillMotionError, ValueError):
    """A trajectory is geometrically impossible (crop too large,
    empty start area, or a position outside the source bounds)."""


class OracleError(StillMotionError, ValueError):
    """The verification oracle cannot operate on the given input,
    e.g. a matching region too small to be reliable."""


class DatasetError(StillMotionError):
    """Dataset-level failure: empty source directory, duplicate
    sample id, or a manifest record missing required fields."""


class IntegrityError(DatasetError):
    """Stored data does not match its manifest: checksum mismatch,
    truncated clip file, or unsupported schema version."""


class ProtocolError(StillMotionError):
    """Stream protocol violation: bad magic, version mismatch,
    truncated frame, or an unexpected message type."""
