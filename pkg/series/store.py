"""
In-memory data model: TimeSeries, SeriesMeta and the named SeriesStore.

A TimeSeries is immutable once built: its arrays are private read-only
copies, and every transformation produces a new series that the store
registers under a derived name.
"""
import dataclasses
import logging
import math
import threading
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from series.exceptions import (
    DuplicateSeriesError,
    IndexRangeError,
    MissingValuesError,
    SeriesValidationError,
    UnknownChannelError,
    UnknownSeriesError,
)

logger = logging.getLogger(__name__)


def _freeze(array):
    array = np.array(array, copy=True)
    array.setflags(write=False)
    return array


def _normalize_index(index):
    index = np.asarray(index)
    if index.dtype.kind == 'f' and np.all(np.isfinite(index)) and np.all(index == np.round(index)):
        index = index.astype(np.int64)
    elif index.dtype.kind in 'iu':
        index = index.astype(np.int64)
    elif index.dtype.kind != 'f':
        raise SeriesValidationError(f'index must be numeric, got dtype {index.dtype}')
    return index


def infer_interval(index):
    """Constant spacing of `index`, or None when it is irregular or too short."""
    if len(index) < 2:
        return None
    steps = np.diff(index)
    if np.all(steps == steps[0]):
        step = steps[0]
        return int(step) if index.dtype.kind == 'i' else float(step)
    return None


@dataclass(frozen=True, eq=False)
class TimeSeries:
    """
    A named d x T numeric matrix over a strictly increasing index.

    Missing cells are NaN. `origin` is (root name, start, end) when the series
    is a positional window of a registered root series, and is used to decide
    whether two observations talk about the same stretch of data.
    """

    name: str
    channels: tuple
    index: np.ndarray
    values: np.ndarray
    interval: object = None
    origin: tuple = None

    def __post_init__(self):
        channels = tuple(str(c) for c in self.channels)
        index = _normalize_index(self.index)
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim == 1:
            values = values.reshape(1, -1)

        if not self.name:
            raise SeriesValidationError('series name must be non-empty')
        if values.ndim != 2:
            raise SeriesValidationError(f"values of '{self.name}' must be a d x T matrix")
        if len(channels) < 1 or values.shape[0] != len(channels):
            raise SeriesValidationError(
                f"'{self.name}' has {values.shape[0]} value row(s) for {len(channels)} channel(s)"
            )
        if len(set(channels)) != len(channels):
            raise SeriesValidationError(f"channel names of '{self.name}' are not unique: {list(channels)}")
        if index.ndim != 1 or len(index) < 1:
            raise SeriesValidationError(f"'{self.name}' needs at least one index entry")
        if values.shape[1] != len(index):
            raise SeriesValidationError(
                f"'{self.name}' has {values.shape[1]} values per channel but {len(index)} index entries"
            )
        if len(index) > 1 and not np.all(np.diff(index) > 0):
            raise SeriesValidationError(f"index of '{self.name}' is not strictly increasing")
        if np.isinf(values).any():
            raise SeriesValidationError(f"'{self.name}' contains infinite values")

        interval = self.interval
        if interval is not None:
            spacing = infer_interval(index)
            if len(index) > 1 and (spacing is None or not math.isclose(spacing, interval)):
                raise SeriesValidationError(
                    f"interval {interval} of '{self.name}' does not match the index spacing"
                )
        else:
            interval = infer_interval(index)

        object.__setattr__(self, 'channels', channels)
        object.__setattr__(self, 'index', _freeze(index))
        object.__setattr__(self, 'values', _freeze(values))
        object.__setattr__(self, 'interval', interval)
        if self.origin is not None:
            root, start, end = self.origin
            object.__setattr__(self, 'origin', (str(root), int(start), int(end)))

    def __eq__(self, other):
        if not isinstance(other, TimeSeries):
            return NotImplemented
        return (
            self.name == other.name
            and self.same_content(other)
            and self.origin == other.origin
        )

    __hash__ = None

    def same_content(self, other):
        """Equality of the data itself, ignoring name and provenance."""
        return (
            self.channels == other.channels
            and self.interval == other.interval
            and np.array_equal(self.index, other.index)
            and np.array_equal(self.values, other.values, equal_nan=True)
        )

    @property
    def length(self):
        return self.values.shape[1]

    @property
    def dim(self):
        return self.values.shape[0]

    @property
    def span(self):
        """(root, start, end) this series covers; a root series covers itself."""
        if self.origin is not None:
            return self.origin
        return (self.name, 0, self.length)

    @property
    def is_positional(self):
        return self.index.dtype.kind == 'i' and np.array_equal(self.index, np.arange(self.length))

    def missing_counts(self):
        return {ch: int(np.isnan(row).sum()) for ch, row in zip(self.channels, self.values)}

    def meta(self):
        return SeriesMeta(
            name=self.name,
            length=self.length,
            dim=self.dim,
            channels=list(self.channels),
            interval=self.interval,
            missing=self.missing_counts(),
        )

    def univariate(self, allow_missing=False):
        """The single channel as a 1-D float array."""
        if self.dim != 1:
            raise SeriesValidationError('x must be 1-D')
        x = self.values[0]
        if not allow_missing:
            missing = int(np.isnan(x).sum())
            if missing:
                raise MissingValuesError(self.name, missing)
        return x

    def channel_position(self, channel):
        if isinstance(channel, (int, np.integer)) and not isinstance(channel, bool):
            if 0 <= channel < self.dim:
                return int(channel)
        elif isinstance(channel, str):
            if channel in self.channels:
                return self.channels.index(channel)
            if channel.lstrip('-').isdigit():
                return self.channel_position(int(channel))
        raise UnknownChannelError(self.name, channel, self.channels)

    def _timestamp_of(self, at):
        if isinstance(at, str):
            text = at.strip()
            if text.lstrip('-').isdigit():
                return int(text)
            try:
                return float(text)
            except ValueError:
                try:
                    return pd.Timestamp(text, tz='UTC').value // 10**9
                except (ValueError, TypeError):
                    raise IndexRangeError(f'cannot interpret {at!r} as an index or timestamp') from None
        if isinstance(at, bool) or not isinstance(at, (int, float, np.integer, np.floating)):
            raise IndexRangeError(f'cannot interpret {at!r} as an index or timestamp')
        return at

    def locate(self, at, mode='at'):
        """
        Resolve an index/timestamp argument to an integer position.

        mode 'at' addresses an existing point, 'start' a window start and
        'end' an exclusive window end (so T itself is valid).

        A bare integer inside the positional range is always a position,
        even when the series also has that value as a timestamp; anything
        else is a timestamp. {"position": n} and {"timestamp": t} force one
        reading, which is the only way to reach a small-integer timestamp.
        """
        upper = self.length if mode == 'end' else self.length - 1
        by = None
        if isinstance(at, dict):
            if len(at) != 1 or next(iter(at)) not in ('position', 'timestamp'):
                raise IndexRangeError(f'expected {{"position": n}} or {{"timestamp": t}}, got {at!r}')
            (by, at), = at.items()
        at = self._timestamp_of(at)
        if by == 'position':
            if float(at).is_integer() and 0 <= at <= upper:
                return int(at)
            raise IndexRangeError(f"position {at!r} is out of range for '{self.name}': valid positions are 0..{upper}")
        if by is None and float(at).is_integer() and 0 <= at <= upper:
            if self.index[min(int(at), self.length - 1)] != at and np.any(self.index == at):
                logger.debug("'%s': %s read as a position, not as the timestamp it also matches", self.name, at)
            return int(at)
        position = int(np.searchsorted(self.index, at, side='left'))
        if position < self.length and self.index[position] == at:
            return position
        if mode == 'end' and self.interval is not None and at == self.index[-1] + self.interval:
            return self.length
        if mode != 'at' and self.index[0] <= at <= self.index[-1]:
            return position
        raise IndexRangeError(
            f"{at!r} is out of range for '{self.name}': valid positions are 0..{upper}, "
            f"valid timestamps are {self.index[0]}..{self.index[-1]}"
        )

    def window(self, start, end):
        """Positional [start, end) window as a new (unnamed-derived) series."""
        if not 0 <= start < end <= self.length:
            raise IndexRangeError(
                f"empty or invalid window [{start}, {end}) for '{self.name}' of length {self.length}"
            )
        root, offset, _ = self.span
        return TimeSeries(
            name=self.name,
            channels=self.channels,
            index=self.index[start:end],
            values=self.values[:, start:end],
            interval=self.interval if end - start > 1 else None,
            origin=(root, offset + start, offset + end),
        )

    def derive(self, values, index=None, channels=None, keep_origin=True):
        """A new series computed from this one, sharing its name as the derivation base."""
        index = self.index if index is None else index
        return TimeSeries(
            name=self.name,
            channels=self.channels if channels is None else channels,
            index=index,
            values=values,
            interval=None,
            origin=self.span if keep_origin else None,
        )


@dataclass
class SeriesMeta:
    name: str
    length: int
    dim: int
    channels: list
    interval: object
    missing: dict = field(default_factory=dict)

    def to_dict(self):
        return dataclasses.asdict(self)


class SeriesStore:
    """
    Named registry of TimeSeries.

    Reads are lock-free; derived insertion takes a lock so concurrent tools
    can never hand out the same derived name twice.
    """

    def __init__(self, series=()):
        self._entries = {}
        self._lock = threading.Lock()
        for item in series:
            self.add(item)

    def __contains__(self, name):
        return name in self._entries

    def __len__(self):
        return len(self._entries)

    def __iter__(self):
        return iter(list(self._entries.values()))

    def names(self):
        return list(self._entries)

    def roots(self):
        """Names of the series that were loaded rather than derived, in load order."""
        return [name for name, item in self._entries.items() if '#' not in name]

    def add(self, series):
        if '#' in series.name:
            raise SeriesValidationError(f"'{series.name}': '#' is reserved for derived series names")
        with self._lock:
            if series.name in self._entries:
                raise DuplicateSeriesError(series.name)
            self._entries[series.name] = series
        logger.debug('Registered series %s (d=%s, T=%s)', series.name, series.dim, series.length)
        return series

    def get(self, name):
        try:
            return self._entries[name]
        except (KeyError, TypeError):
            raise UnknownSeriesError(name, self.names()) from None

    def put_derived(self, series, op):
        """
        Register `series` under `<series.name>#<op>#<k>` and return that name.

        An existing derived entry holding identical data is reused, so calling
        the same processing tool twice yields the same name.
        """
        base = series.name
        with self._lock:
            k = 1
            while True:
                name = f'{base}#{op}#{k}'
                existing = self._entries.get(name)
                if existing is None:
                    self._entries[name] = dataclasses.replace(series, name=name)
                    logger.debug('Derived series %s', name)
                    return name
                if existing.same_content(series) and existing.origin == series.origin:
                    return name
                k += 1

    def fork(self):
        """A new store with the same entries; series are immutable so sharing is safe."""
        clone = SeriesStore()
        clone._entries = dict(self._entries)
        return clone
