"""Exception hierarchy shared across the package."""


class AtlasError(Exception):
    """Base class for errors raised by atlasim."""


class ConfigError(AtlasError, ValueError):
    """Invalid parameters or malformed input files."""


class NumericalError(AtlasError, ArithmeticError):
    """A computation produced non-finite or otherwise unusable numbers."""


class DegenerateLandmarksError(NumericalError):
    """The landmark set of a chart does not span the requested dimension."""

    def __init__(self, chart, rank, d):
        self.chart = chart
        self.rank = rank
        self.d = d
        super().__init__(
            f"degenerate landmarks in chart {chart}: rank {rank} < d={d}"
        )
