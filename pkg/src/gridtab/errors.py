"""Exception hierarchy shared across the toolkit."""


class GridTabError(Exception):
    """Base class for all toolkit errors."""


class SchemaError(GridTabError):
    """A JSON document is malformed or carries the wrong schema tag."""


class AnnotationError(GridTabError):
    """A raw annotation cannot be turned into a logical table."""


class LabelError(GridTabError):
    """A grid label cannot be generated for a table."""


class ReconstructionError(GridTabError):
    """Base class for failures of the grid-to-table reconstruction."""


class DegenerateTableError(ReconstructionError):
    """Fewer than two row lines or two column lines survived selection."""


class StructureInconsistencyError(ReconstructionError):
    """The positive edges do not describe a rectangular partition.

    ``component`` holds the offending set of (row, col) unit-cell indices
    in subgrid coordinates.
    """

    def __init__(self, message: str, component=None):
        super().__init__(message)
        self.component = frozenset(component) if component is not None else frozenset()
