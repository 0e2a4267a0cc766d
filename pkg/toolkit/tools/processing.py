"""
Data processing tools: series in, series out, always registered as a derived entry.
"""
import numpy as np
import pandas as pd

from toolkit.exceptions import ToolError
from toolkit.registry import ToolResult
from toolkit.serializers import (
    NormalizeSeriesSerializer,
    ResampleSeriesSerializer,
    SegmentSeriesSerializer,
    SelectChannelSerializer,
    SliceSeriesSerializer,
)
from toolkit.tools.base import (
    one_series,
    resolve_window,
    series_digest,
    series_result,
    span_of,
    store_derived,
    tool,
)


@tool('slice_series', 'proc', 'series', SliceSeriesSerializer,
      'Extract a subsequence by timestamps or positions; start inclusive, end exclusive.')
def slice_series(context, name, start, end):
    series = one_series(name)
    i = series.locate(start, mode='start')
    j = series.locate(end, mode='end')
    if j <= i:
        raise ToolError(f'empty result window [{i}, {j}) on {series.name}')
    return series_result(context, series.window(i, j), 'slice', start=i, end=j)


@tool('segment_series', 'proc', 'series', SegmentSeriesSerializer,
      'Partition a series into k equal segments (the last absorbs the remainder) or into given lengths.')
def segment_series(context, name, k=None, lengths=None):
    series = one_series(name)
    total = series.length
    if k is not None:
        if k > total:
            raise ToolError(f'k={k} exceeds the series length {total}')
        base = total // k
        lengths = [base] * (k - 1) + [total - base * (k - 1)]
    elif sum(lengths) != total:
        raise ToolError(f'lengths sum to {sum(lengths)} but {series.name} has {total} points')

    segments = []
    position = 0
    for length in lengths:
        name_k = store_derived(context, series.window(position, position + length), 'segment')
        digest = series_digest(context.store.get(name_k))
        digest.update({'start': position, 'end': position + length})
        segments.append(digest)
        position += length
    return ToolResult(
        kind='series',
        value=segments,
        diagnostics={
            'boundaries': [[s['start'], s['end']] for s in segments],
            'source': series.name,
            'span': span_of(series),
        },
    )


@tool('resample_series', 'proc', 'series', ResampleSeriesSerializer,
      'Downsample to a coarser interval (a whole multiple of the source interval) with mean, sum or last aggregation.')
def resample_series(context, name, interval, method='mean'):
    series = one_series(name)
    source = series.interval
    if source is None:
        if series.length == 1:
            source = interval
        else:
            raise ToolError(f'{series.name} has irregular spacing and cannot be resampled')
    factor = interval / source
    if factor < 1 - 1e-9:
        raise ToolError(f'upsampling is not supported: interval {interval} is finer than the source interval {source}')
    if abs(factor - round(factor)) > 1e-9:
        raise ToolError(f'interval {interval} must be a whole multiple of the source interval {source}')
    factor = int(round(factor))

    buckets = np.arange(series.length) // factor
    frame = pd.DataFrame(series.values.T, columns=list(series.channels))
    grouped = frame.groupby(buckets)
    if method == 'sum':
        aggregated = grouped.sum(min_count=1)
    elif method == 'last':
        aggregated = grouped.last()
    else:
        aggregated = grouped.mean()
    index = series.index[::factor]
    derived = series.derive(aggregated.to_numpy().T, index=index, keep_origin=False)
    return series_result(context, derived, 'resample', factor=factor, method=method)


@tool('select_channel', 'proc', 'series', SelectChannelSerializer,
      'Extract one channel of a multivariate series by name or position.')
def select_channel(context, name, channel):
    series = one_series(name)
    position = series.channel_position(channel)
    derived = series.derive(
        series.values[position:position + 1],
        channels=(series.channels[position],),
        keep_origin=series.dim == 1,
    )
    return series_result(context, derived, 'channel', channel=series.channels[position])


@tool('normalize_series', 'proc', 'series', NormalizeSeriesSerializer,
      'Normalize values (zscore or minmax) using statistics of the whole series or of a reference window.')
def normalize_series(context, name, method='zscore', ref_window=None):
    series = one_series(name)
    start, end = resolve_window(series, ref_window)
    reference = series.values[:, start:end]
    if method == 'zscore':
        if reference.shape[1] < 2:
            raise ToolError('zscore needs at least 2 reference points')
        center = np.nanmean(reference, axis=1, keepdims=True)
        scale = np.nanstd(reference, axis=1, ddof=1, keepdims=True)
    else:
        center = np.nanmin(reference, axis=1, keepdims=True)
        scale = np.nanmax(reference, axis=1, keepdims=True) - center
    if not np.all(np.isfinite(scale)) or np.any(scale == 0):
        raise ToolError(f'cannot {method}-normalize {series.name}: the reference values are constant')
    derived = series.derive((series.values - center) / scale)
    return series_result(context, derived, 'normalize', method=method, reference=[start, end])
