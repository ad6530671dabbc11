"""Exception types shared across the toolkit."""


class DeckInspectError(Exception):
    """Base class for all toolkit errors."""


class InvalidInputError(DeckInspectError, ValueError):
    """An argument is non-finite, out of range, or has the wrong shape."""


class DegenerateGeometryError(InvalidInputError):
    """A gain or frame cannot be built because a displacement is zero."""


class PlanningError(DeckInspectError):
    """The deck cannot be covered with the requested lane geometry."""


class SimulationDivergedError(DeckInspectError):
    """The tracking error kept growing instead of converging."""


class OutOfBoundsError(DeckInspectError, ValueError):
    """A query position lies outside the ground-truth extent."""


class EmptyMapError(DeckInspectError):
    """A condition map was requested from zero records."""


class ConfigError(DeckInspectError):
    """Configuration failed validation.

    ``field`` carries the dotted key path of the offending entry.
    """

    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field
        self.message = message
