"""
Numerical tools: real-valued statistics, records and rolling series.
"""
import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from toolkit.exceptions import ToolError
from toolkit.registry import ToolResult
from toolkit.serializers import (
    AutocorrSerializer,
    DatapointValueSerializer,
    DatarangeValueSerializer,
    QuantileValueSerializer,
    ReturnCalcSerializer,
    RollingStatSerializer,
    SeriesInfoSerializer,
    SummaryStatsSerializer,
    VolatilitySerializer,
)
from toolkit.tools.base import (
    one_series,
    require_finite,
    resolve_window,
    series_result,
    span_of,
    tool,
    univariate,
)

RANGE_STATS = {
    'mean': np.mean,
    'sum': np.sum,
    'max': np.max,
    'min': np.min,
}


def autocorrelation(x, lag):
    centred = x - x.mean()
    denominator = float(np.dot(centred, centred))
    if denominator == 0:
        raise ToolError('autocorrelation is undefined for a constant series')
    return float(np.dot(centred[:x.size - lag], centred[lag:]) / denominator)


def _point(series, x, at):
    position = series.locate(at, mode='at')
    value = x[position]
    if np.isnan(value):
        raise ToolError(f'the value of {series.name} at position {position} is missing')
    return position, float(value)


@tool('series_info', 'num', 'meta', SeriesInfoSerializer,
      'Return basic metadata: length, number of channels, channel names, interval and missing counts.')
def series_info(context, name):
    series = one_series(name)
    return ToolResult(kind='meta', value=series.meta().to_dict(), diagnostics={'span': span_of(series)})


@tool('datapoint_value', 'num', 'real', DatapointValueSerializer,
      'Return the value at a specific position or timestamp.')
def datapoint_value(context, name, at):
    series, x = univariate(name, allow_missing=True)
    position, value = _point(series, x, at)
    return ToolResult(
        kind='real',
        value=value,
        diagnostics={'position': position, 'span': span_of(series, position, position + 1)},
    )


@tool('datarange_value', 'num', 'real', DatarangeValueSerializer,
      'Compute mean, sum, max or min over the window [start, end).')
def datarange_value(context, name, start, end, stat='mean'):
    series, x = univariate(name, allow_missing=True)
    i, j = resolve_window(series, (start, end))
    window = require_finite(series, x[i:j])
    return ToolResult(
        kind='real',
        value=float(RANGE_STATS[stat](window)),
        diagnostics={'stat': stat, 'start': i, 'end': j, 'span': span_of(series, i, j)},
    )


@tool('summary_stats', 'num', 'record', SummaryStatsSerializer,
      'Mean, std, min and max of the series or of a range.')
def summary_stats(context, name, range=None):
    series, x = univariate(name, allow_missing=True)
    i, j = resolve_window(series, range)
    window = require_finite(series, x[i:j])
    if window.size < 2:
        raise ToolError('std needs at least 2 points')
    return ToolResult(
        kind='record',
        value={
            'mean': float(window.mean()),
            'std': float(window.std(ddof=1)),
            'min': float(window.min()),
            'max': float(window.max()),
            'n': int(window.size),
        },
        diagnostics={'start': i, 'end': j, 'span': span_of(series, i, j)},
    )


@tool('return_calc', 'num', 'real', ReturnCalcSerializer,
      'Simple (diff) or percentage (pct) return between two times.')
def return_calc(context, name, t1, t2, kind='pct'):
    series, x = univariate(name, allow_missing=True)
    p1, v1 = _point(series, x, t1)
    p2, v2 = _point(series, x, t2)
    if kind == 'pct':
        if v1 == 0:
            raise ToolError(f'percentage return is undefined: the value at position {p1} is 0')
        value = (v2 - v1) / v1
    else:
        value = v2 - v1
    return ToolResult(
        kind='real',
        value=float(value),
        diagnostics={'kind': kind, 't1': p1, 't2': p2, 'span': span_of(series, min(p1, p2), max(p1, p2) + 1)},
    )


@tool('autocorr', 'num', 'real', AutocorrSerializer,
      'Autocorrelation at a specified lag.')
def autocorr(context, name, lag=1):
    series, x = univariate(name)
    if lag >= x.size:
        raise ToolError(f'lag {lag} must be smaller than the series length {x.size}')
    return ToolResult(
        kind='real',
        value=autocorrelation(x, lag),
        diagnostics={'lag': lag, 'span': span_of(series)},
    )


def rolling(x, stat, window, step=1, q=0.5):
    """Statistic of each window [s, s + window) for s = 0, step, 2*step, ..."""
    windows = sliding_window_view(x, window)[::step]
    if stat == 'mean':
        return windows.mean(axis=1)
    if stat == 'std':
        return windows.std(axis=1, ddof=1)
    return np.quantile(windows, q, axis=1)


@tool('rolling_stat', 'num', 'series', RollingStatSerializer,
      'Rolling mean, std or quantile (q, default 0.5) with window size and step; indexed by window end.')
def rolling_stat(context, name, window, stat='mean', step=1, q=None):
    series, x = univariate(name)
    if window > x.size:
        raise ToolError(f'window {window} is longer than the series ({x.size} points)')
    if stat == 'std' and window < 2:
        raise ToolError('a rolling std needs window >= 2')
    q = 0.5 if q is None else q
    if stat == 'quantile' and not 0.0 < q < 1.0:
        raise ToolError(f'q must lie strictly between 0 and 1, got {q}')
    values = rolling(x, stat, window, step, q)
    ends = np.arange(window - 1, x.size, step)
    derived = series.derive(values, index=series.index[ends], keep_origin=False)
    return series_result(context, derived, 'rolling', stat=stat, window=window, step=step)


@tool('quantile_value', 'num', 'real', QuantileValueSerializer,
      'Empirical quantile at level q (linear interpolation).')
def quantile_value(context, name, q):
    series, x = univariate(name)
    return ToolResult(
        kind='real',
        value=float(np.quantile(x, q)),
        diagnostics={'q': q, 'span': span_of(series)},
    )


@tool('volatility', 'num', 'series', VolatilitySerializer,
      'Windowed volatility: rolling std of first differences, indexed by window end.')
def volatility(context, name, window):
    series, x = univariate(name)
    if window > x.size - 1:
        raise ToolError(f'window {window} needs at least {window + 1} points; {series.name} has {x.size}')
    values = rolling(np.diff(x), 'std', window)
    ends = np.arange(window, x.size)
    derived = series.derive(values, index=series.index[ends], keep_origin=False)
    return series_result(context, derived, 'volatility', window=window)
