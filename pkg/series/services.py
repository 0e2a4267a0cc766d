"""
Series ingestion and store access.
"""
import json
import logging
import math
from pathlib import Path

import numpy as np
import pandas as pd

from series.exceptions import EmptySeriesError, SeriesParseError, SeriesValidationError
from series.store import TimeSeries

logger = logging.getLogger(__name__)


class SeriesService:
    """
    Loading, dumping and addressing time series.

    Files follow two layouts. CSV: header row, first column time, remaining
    columns channels. JSON: {"name": str, "index": [num], "channels": {"<ch>": [num]}}
    with null or NaN for missing cells.
    """

    SUPPORTED_FORMATS = ('csv', 'json')

    @staticmethod
    def _time_to_numbers(column):
        numeric = pd.to_numeric(column, errors='coerce')
        if numeric.notna().all():
            return numeric.to_numpy()
        if numeric.notna().any():
            raise SeriesParseError('time column contains empty or non-numeric entries')
        try:
            stamps = pd.to_datetime(column, utc=True)
        except (ValueError, TypeError) as exc:
            raise SeriesParseError(f'time column is neither numeric nor datetime: {exc}') from exc
        if stamps.isna().any():
            raise SeriesParseError('time column contains empty or unparsable entries')
        seconds = (stamps - pd.Timestamp('1970-01-01', tz='UTC')) // pd.Timedelta(seconds=1)
        return seconds.to_numpy(dtype=np.int64)

    @classmethod
    def from_frame(cls, name, frame):
        """
        Build a TimeSeries from a frame whose first column is time.

        Rows are sorted by time; non-numeric cells become missing.
        """
        if frame.shape[1] < 2:
            raise SeriesParseError(f"'{name}' needs a time column and at least one value column")
        if frame.shape[0] == 0:
            raise EmptySeriesError(f"'{name}' has no rows")

        index = cls._time_to_numbers(frame.iloc[:, 0])
        values = frame.iloc[:, 1:].apply(pd.to_numeric, errors='coerce')
        order = np.argsort(index, kind='stable')
        index = index[order]
        if len(index) > 1 and np.any(np.diff(index) == 0):
            raise SeriesParseError(f"'{name}' has duplicate timestamps")
        matrix = values.to_numpy(dtype=np.float64)[order].T
        try:
            return TimeSeries(
                name=name,
                channels=tuple(str(c) for c in values.columns),
                index=index,
                values=matrix,
            )
        except SeriesValidationError as exc:
            raise SeriesParseError(str(exc)) from exc

    @classmethod
    def from_payload(cls, payload, name=None):
        """Build a TimeSeries from the JSON layout (already decoded)."""
        if not isinstance(payload, dict) or 'index' not in payload or 'channels' not in payload:
            raise SeriesParseError('JSON series must be an object with "index" and "channels"')
        name = name or payload.get('name')
        if not name:
            raise SeriesParseError('JSON series has no "name" and none was given')
        channels = payload['channels']
        if not isinstance(channels, dict) or not channels:
            raise SeriesParseError(f"'{name}': \"channels\" must be a non-empty object")

        columns = {'__time__': payload['index']}
        for channel, column in channels.items():
            if not isinstance(column, list) or len(column) != len(payload['index']):
                raise SeriesParseError(
                    f"'{name}': channel {channel!r} must be a list as long as the index"
                )
            columns[channel] = [np.nan if cell is None else cell for cell in column]
        return cls.from_frame(name, pd.DataFrame(columns))

    @staticmethod
    def to_payload(series):
        index = series.index.tolist()
        return {
            'name': series.name,
            'index': index,
            'channels': {
                channel: [None if math.isnan(v) else v for v in row.tolist()]
                for channel, row in zip(series.channels, series.values)
            },
        }

    @classmethod
    def load_series(cls, path, fmt, name, store=None):
        """
        Read a CSV or JSON file into a TimeSeries and register it when a store is given.
        """
        path = Path(path)
        if fmt not in cls.SUPPORTED_FORMATS:
            raise SeriesParseError(f'unsupported format {fmt!r}; use one of {list(cls.SUPPORTED_FORMATS)}')
        if not path.exists():
            raise SeriesParseError(f'file not found: {path}')

        if fmt == 'csv':
            try:
                frame = pd.read_csv(path, skipinitialspace=True)
            except pd.errors.EmptyDataError as exc:
                raise EmptySeriesError(f'{path} is empty') from exc
            except (pd.errors.ParserError, UnicodeDecodeError) as exc:
                raise SeriesParseError(f'cannot parse {path}: {exc}') from exc
            series = cls.from_frame(name, frame)
        else:
            try:
                payload = json.loads(path.read_text())
            except (json.JSONDecodeError, UnicodeDecodeError) as exc:
                raise SeriesParseError(f'cannot parse {path}: {exc}') from exc
            series = cls.from_payload(payload, name=name)

        if store is not None:
            store.add(series)
        logger.info('Loaded series %s from %s (d=%s, T=%s)', series.name, path, series.dim, series.length)
        return series

    @classmethod
    def dump_series(cls, series, path):
        Path(path).write_text(json.dumps(cls.to_payload(series)))
        return path

    @staticmethod
    def get_series(store, name):
        return store.get(name)

    @staticmethod
    def put_derived(store, series, op):
        return store.put_derived(series, op)

    @staticmethod
    def guess_format(path):
        suffix = Path(path).suffix.lower().lstrip('.')
        return suffix if suffix in SeriesService.SUPPORTED_FORMATS else 'csv'
