"""
Text form of observations for prompts.

Scalars, categories and index sets are shown verbatim; series are shown as
a one-line digest so a long derived series never floods the context.
"""
import json


def _number(value):
    if isinstance(value, bool) or value is None:
        return json.dumps(value)
    if isinstance(value, float):
        return f'{value:.6g}'
    return str(value)


def _compact(value):
    return json.dumps(value, ensure_ascii=False, separators=(', ', ': '), default=str)


def _digest_line(digest):
    name = digest.get('name')
    parts = [f"{name}: length={digest.get('length')}"]
    if 'start' in digest and 'end' in digest:
        parts.append(f"positions [{digest['start']}, {digest['end']})")
    if 'per_channel' in digest:
        channels = ', '.join(digest.get('channels', []))
        parts.append(f'channels=[{channels}]')
        for channel, stats in digest['per_channel'].items():
            parts.append(f"{channel}: mean={_number(stats.get('mean'))} std={_number(stats.get('std'))}")
        return ', '.join(parts)
    for key in ('mean', 'std', 'min', 'max'):
        parts.append(f'{key}={_number(digest.get(key))}')
    first = ', '.join(_number(v) for v in digest.get('first', []))
    last = ', '.join(_number(v) for v in digest.get('last', []))
    parts.append(f'first=[{first}]')
    parts.append(f'last=[{last}]')
    return ', '.join(parts)


def _index_set(observation):
    text = json.dumps(observation.value)
    anomalies = observation.diagnostics.get('anomalies') or observation.diagnostics.get('spikes')
    if anomalies:
        kinds = sorted({item['type'] for item in anomalies})
        text += f" (types: {', '.join(kinds)})"
    return text


def render_observation(observation):
    kind = observation.kind
    value = observation.value
    if kind == 'error':
        return observation.error
    if kind == 'real':
        return _number(value)
    if kind == 'category':
        details = {k: observation.diagnostics[k] for k in ('period', 'p_value', 'strength')
                   if observation.diagnostics.get(k) is not None}
        if details:
            return f"{value} ({', '.join(f'{k}={_number(v)}' for k, v in details.items())})"
        return str(value)
    if kind == 'index-set':
        return _index_set(observation)
    if kind == 'record':
        return ', '.join(
            f'{key}={_number(item) if not isinstance(item, (list, dict)) else _compact(item)}'
            for key, item in value.items()
        )
    if kind == 'series':
        if isinstance(value, list):
            return '\n'.join(_digest_line(digest) for digest in value)
        return _digest_line(value)
    return _compact(value)
