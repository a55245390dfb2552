"""Exception hierarchy shared across the package."""


class MorphoptError(Exception):
    """Base class for all package errors."""


class GridIndexError(MorphoptError, ValueError):
    """A grid index lies outside ``[0, GRID_MAX_INDEX]``."""

    def __init__(self, axis: int, index: int):
        self.axis = axis
        self.index = index
        super().__init__(f"index {index} on axis {axis + 1} (theta{axis + 1}) is outside [0, 64]")


class ConfigurationError(MorphoptError, ValueError):
    """Invalid or inconsistent configuration."""


class ProductionStalledError(MorphoptError, RuntimeError):
    """Offspring production exceeded its retry cap."""


class EvaluatorError(MorphoptError, RuntimeError):
    """The fitness rig failed or became unreachable."""


class FilteredDataError(MorphoptError, ValueError):
    """Filtered data was passed where raw samples are required."""
