"""
Errors raised by the series store and ingestion layer.

Messages are read by the agent as tool feedback, so each one names the
offending value and what would have been accepted instead.
"""


class SeriesError(Exception):
    """Base class for every series-level failure."""


class SeriesValidationError(SeriesError):
    """A TimeSeries violates one of its structural invariants."""


class SeriesParseError(SeriesError):
    """An input file or payload could not be turned into a TimeSeries."""


class EmptySeriesError(SeriesError):
    """Ingestion produced zero rows."""


class DuplicateSeriesError(SeriesError):
    def __init__(self, name):
        self.name = name
        super().__init__(f"series '{name}' is already registered")


class UnknownSeriesError(SeriesError):
    def __init__(self, name, known):
        self.name = name
        self.known = list(known)
        super().__init__(f"unknown series '{name}'; known series: {self.known}")


class UnknownChannelError(SeriesError):
    def __init__(self, series_name, channel, channels):
        self.channel = channel
        self.channels = list(channels)
        super().__init__(
            f"series '{series_name}' has no channel {channel!r}; channels: {self.channels}"
        )


class IndexRangeError(SeriesError):
    """A position or timestamp does not address a point of the series."""


class MissingValuesError(SeriesError):
    def __init__(self, series_name, count):
        self.count = count
        super().__init__(
            f"series '{series_name}' contains {count} missing value(s); "
            f"slice around them before calling this tool"
        )
