"""Exception hierarchy shared by every module.

The CLI maps each family to an exit code, so new errors should subclass one
of the two branches below rather than ``RadiomapError`` directly.
"""


class RadiomapError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(RadiomapError, ValueError):
    """Input data violates a documented invariant."""


class SceneParseError(ValidationError):
    """A scene file does not follow the JSON schema."""

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")


class DomainError(ValidationError):
    """An argument lies outside the domain of a formula."""


class ConfigurationError(ValidationError):
    """Unknown or malformed array/band-plan configuration."""


class ComputeError(RadiomapError, RuntimeError):
    """A computation could not be completed."""


class GeometryError(ComputeError):
    """Degenerate geometry (flat wedge, coincident points, ...)."""


class SingularityError(GeometryError):
    """A receiver coincides with a radiating element."""


class PlacementError(ComputeError):
    """Synthetic scene generation could not place every building."""

    def __init__(self, requested, achieved):
        self.requested = requested
        self.achieved = achieved
        super().__init__(
            f"placed {achieved} of {requested} buildings without overlap"
        )
