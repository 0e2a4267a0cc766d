"""
Shared plumbing for tool implementations: the @tool decorator that
collects built-in ToolSpecs, argument helpers and series digests.
"""
import numpy as np
from django.conf import settings

from series.exceptions import MissingValuesError
from toolkit.exceptions import ToolError
from toolkit.registry import ToolResult, ToolSpec

BUILTIN_TOOLS = []


def tool(name, family, output_kind, serializer_class, description):
    """Register the decorated function as a built-in tool, in declaration order."""

    def decorator(func):
        BUILTIN_TOOLS.append(
            ToolSpec(
                name=name,
                family=family,
                output_kind=output_kind,
                description=description,
                serializer_class=serializer_class,
                func=func,
            )
        )
        return func

    return decorator


def setting(key):
    return settings.TSAGENT[key]


def one_series(refs, param='name'):
    if len(refs) != 1:
        raise ToolError(f'{param} must name exactly one series, got {[s.name for s in refs]}')
    return refs[0]


def univariate(refs, allow_missing=False):
    """(series, 1-D values) for a single-channel argument; anything else is 'x must be 1-D'."""
    if len(refs) != 1 or refs[0].dim != 1:
        raise ToolError('x must be 1-D')
    series = refs[0]
    return series, series.univariate(allow_missing=allow_missing)


def require_finite(series, x):
    missing = int(np.isnan(x).sum())
    if missing:
        raise MissingValuesError(series.name, missing)
    return x


def resolve_window(series, bounds):
    """Positional [start, end) for optional window bounds; None means the whole series."""
    if bounds is None:
        return 0, series.length
    start = series.locate(bounds[0], mode='start')
    end = series.locate(bounds[1], mode='end')
    if end <= start:
        raise ToolError(f'empty window [{start}, {end}) on {series.name}')
    return start, end


def span_of(series, start=0, end=None):
    """The (root, start, end) stretch that positions [start, end) of `series` cover."""
    end = series.length if end is None else end
    root, offset, _ = series.span
    return [root, offset + start, offset + end]


def root_length(context, series):
    """Length of the root series `series` is a window of; None when the root is not in the store."""
    root = series.span[0]
    if root == series.name:
        return series.length
    if root in context.store:
        return context.store.get(root).length
    return None


def _stats(row):
    finite = row[~np.isnan(row)]
    if finite.size == 0:
        return {'mean': None, 'std': None, 'min': None, 'max': None}
    return {
        'mean': float(finite.mean()),
        'std': float(finite.std(ddof=1)) if finite.size > 1 else None,
        'min': float(finite.min()),
        'max': float(finite.max()),
    }


def series_digest(series, preview=None):
    """Self-contained summary of a stored series, used as the value of series observations."""
    preview = setting('OBSERVATION_PREVIEW') if preview is None else preview
    digest = {
        'name': series.name,
        'length': series.length,
        'channels': list(series.channels),
        'span': list(series.span) if series.origin is not None else None,
    }
    if series.dim == 1:
        row = series.values[0]
        digest.update(_stats(row))
        digest['first'] = row[:preview].tolist()
        digest['last'] = row[-preview:].tolist()
    else:
        digest['per_channel'] = {
            channel: _stats(row) for channel, row in zip(series.channels, series.values)
        }
    return digest


def store_derived(context, series, op):
    return context.store.put_derived(series, op)


def series_result(context, derived, op, **diagnostics):
    name = store_derived(context, derived, op)
    stored = context.store.get(name)
    return ToolResult(kind='series', value=series_digest(stored), diagnostics=diagnostics)
