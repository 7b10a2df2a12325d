"""Exception types shared across the package.

Plain invalid arguments raise ValueError; the classes here mark error
categories that the CLI maps to distinct exit codes.
"""


class RibtomoError(Exception):
    """Base class for package-specific errors."""


class ConfigError(RibtomoError):
    """Malformed or inconsistent run configuration."""


class MissingArtifactError(RibtomoError):
    """An expected input file or directory is absent."""


class GeometryMismatchError(RibtomoError):
    """Two objects built against incompatible acquisition geometries."""


class StateError(RibtomoError):
    """Operation invoked before its prerequisites exist (e.g. missing checkpoints)."""


class LesionPlacementError(RibtomoError):
    """Requested lesions cannot be placed inside the lung volumes."""
