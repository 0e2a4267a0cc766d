"""
Typed tool registry: ToolSpec, ToolCall, Observation and dispatch.

`dispatch` is the only way the agent touches data. It validates the
arguments with the tool's serializer, runs the tool and wraps whatever
happens (including failures) in an Observation.
"""
import copy
import itertools
import json
import logging
import math
import threading
from dataclasses import dataclass, field

import numpy as np
from rest_framework.fields import empty

from series.exceptions import SeriesError
from toolkit.exceptions import RegistryError, ToolError
from toolkit.serializers import flatten_errors, semantic_type

logger = logging.getLogger(__name__)

FAMILIES = ('proc', 'det', 'num', 'rel', 'custom')

OUTPUT_KINDS = ('series', 'real', 'category', 'index-set', 'relation', 'record', 'meta', 'error')

FAMILY_KINDS = {
    'proc': {'series'},
    'det': {'category', 'index-set'},
    'num': {'real', 'record', 'series', 'meta'},
    'rel': {'real', 'category', 'relation', 'record'},
    'custom': set(OUTPUT_KINDS) - {'error'},
}


@dataclass(frozen=True)
class ParameterSpec:
    name: str
    type: str
    required: bool
    default: object = None

    def to_dict(self):
        data = {'name': self.name, 'type': self.type, 'required': self.required}
        if not self.required and self.default is not None:
            data['default'] = self.default
        return data

    def render(self):
        text = f'{self.name}: {self.type}'
        if not self.required:
            text += f' = {self.default!r}' if self.default is not None else ' (optional)'
        return text


@dataclass(frozen=True)
class ToolSpec:
    """
    Declaration of one callable tool.

    `serializer_class` validates arguments and, through its field order,
    defines the parameter list. `func(context, **validated_args)` returns a
    ToolResult.
    """

    name: str
    family: str
    output_kind: str
    description: str
    serializer_class: type
    func: object
    pipeline: dict = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise RegistryError(f'{self.name}: unknown family {self.family!r}')
        if self.output_kind not in FAMILY_KINDS[self.family]:
            raise RegistryError(
                f'{self.name}: output kind {self.output_kind!r} does not fit family {self.family!r}'
            )
        if not self.description.strip():
            raise RegistryError(f'{self.name}: description must be non-empty')
        names = [p.name for p in self.parameters]
        if len(names) != len(set(names)):
            raise RegistryError(f'{self.name}: parameter names are not unique')

    @property
    def parameters(self):
        if self.pipeline is not None:
            return [
                ParameterSpec(p['name'], p.get('type', 'value'), p.get('required', True), p.get('default'))
                for p in self.pipeline.get('parameters', [])
            ]
        params = []
        for name, fld in self.serializer_class().fields.items():
            default = None if fld.default is empty else fld.default
            params.append(ParameterSpec(name, semantic_type(fld), fld.required, default))
        return params

    def usage(self):
        return f"{self.name}({', '.join(p.render() for p in self.parameters)})"

    def to_catalog_entry(self):
        return {
            'name': self.name,
            'family': self.family,
            'description': self.description,
            'output_kind': self.output_kind,
            'parameters': [p.to_dict() for p in self.parameters],
        }


@dataclass(frozen=True)
class ToolCall:
    tool: str
    args: dict = field(default_factory=dict)

    def to_dict(self):
        return {'tool': self.tool, 'args': to_jsonable(self.args)}

    @classmethod
    def from_dict(cls, data):
        return cls(tool=data['tool'], args=dict(data.get('args') or {}))


@dataclass(frozen=True)
class ToolResult:
    kind: str
    value: object
    diagnostics: dict = field(default_factory=dict)


@dataclass(frozen=True)
class Observation:
    """
    Typed output of one dispatched call.

    `children` holds the observations of sub-calls made by a pipeline tool,
    each carrying its own source and seq.
    """

    kind: str
    value: object
    source: ToolCall
    seq: int
    diagnostics: dict = field(default_factory=dict)
    error: str = None
    children: tuple = ()

    @property
    def is_error(self):
        return self.kind == 'error'

    def to_dict(self):
        return {
            'seq': self.seq,
            'kind': self.kind,
            'value': to_jsonable(self.value),
            'diagnostics': to_jsonable(self.diagnostics),
            'error': self.error,
            'source': self.source.to_dict(),
            'children': [child.to_dict() for child in self.children],
        }

    @classmethod
    def from_dict(cls, data):
        return cls(
            kind=data['kind'],
            value=data['value'],
            source=ToolCall.from_dict(data['source']),
            seq=data['seq'],
            diagnostics=data.get('diagnostics') or {},
            error=data.get('error'),
            children=tuple(cls.from_dict(child) for child in data.get('children', [])),
        )

    def fingerprint(self):
        return json.dumps(self.to_dict(), sort_keys=True)


def to_jsonable(value):
    """Recursively convert numpy scalars/arrays and tuples into JSON-safe values."""
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return to_jsonable(value.tolist())
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return None if math.isnan(value) or math.isinf(value) else value
    if hasattr(value, 'name') and hasattr(value, 'span'):
        return value.name
    return value


@dataclass
class ToolContext:
    """What a tool may use besides its arguments."""

    store: object
    registry: 'ToolRegistry'
    backend: object = None
    parent_call: ToolCall = None
    children: list = field(default_factory=list)


class ToolRegistry:
    """
    Ordered collection of ToolSpecs plus the per-run observation counter.

    Runs work on a `fork()` so tools synthesized during one run never leak
    into another, and sequence numbers restart per run.
    """

    def __init__(self, specs=()):
        self._specs = {}
        self._seq = itertools.count(1)
        self._lock = threading.Lock()
        for spec in specs:
            self.register(spec)

    def register(self, spec):
        if spec.name in self._specs:
            raise RegistryError(f"tool '{spec.name}' is already registered")
        self._specs[spec.name] = spec
        return spec

    def __contains__(self, name):
        return name in self._specs

    def __len__(self):
        return len(self._specs)

    def get(self, name):
        return self._specs.get(name)

    def names(self):
        return list(self._specs)

    def specs(self):
        return list(self._specs.values())

    def catalog(self):
        return [spec.to_catalog_entry() for spec in self._specs.values()]

    def catalog_json(self, indent=2):
        return json.dumps(self.catalog(), indent=indent)

    def fork(self):
        return ToolRegistry(self._specs.values())

    def next_seq(self):
        with self._lock:
            return next(self._seq)

    def bind_arguments(self, tool, arguments, series_names=()):
        """
        Turn parsed Action Input into an argument dict.

        A dict is returned as is. For a positional list, values naming a
        stored series go to the series parameters in order (the last series
        parameter takes any surplus as a list) and the remaining values fill
        the other parameters in declaration order.
        """
        if isinstance(arguments, dict):
            return dict(arguments)
        spec = self.get(tool)
        values = list(arguments or [])
        if spec is None:
            return {f'arg{i}': v for i, v in enumerate(values, start=1)}

        params = spec.parameters
        series_params = [p.name for p in params if p.type == 'series']
        other_params = [p.name for p in params if p.type != 'series']
        known = set(series_names)
        series_values = [v for v in values if isinstance(v, str) and v in known]
        if not series_values or not series_params:
            names = [p.name for p in params]
            args = dict(zip(names, values))
            surplus = values[len(names):]
        else:
            args = {}
            for i, param in enumerate(series_params):
                if i == len(series_params) - 1 and len(series_values) > len(series_params):
                    args[param] = series_values[i:]
                elif i < len(series_values):
                    args[param] = series_values[i]
            others = [v for v in values if not (isinstance(v, str) and v in known)]
            args.update(zip(other_params, others))
            surplus = others[len(other_params):]
        for i, value in enumerate(surplus, start=1):
            args[f'extra_{i}'] = value
        return args

    def error_observation(self, call, message, spec=None, children=()):
        diagnostics = {}
        text = f'Error when calling {call.tool}: {message}'
        if spec is not None:
            diagnostics['usage'] = spec.usage()
            diagnostics['parameters'] = [p.to_dict() for p in spec.parameters]
            text += f'. The correct usage: {spec.usage()}'
        else:
            diagnostics['registered_tools'] = self.names()
        return Observation(
            kind='error',
            value=None,
            source=call,
            seq=self.next_seq(),
            diagnostics=diagnostics,
            error=text,
            children=tuple(children),
        )

    def dispatch(self, call, store, backend=None):
        """Validate, execute and wrap one ToolCall. Never raises."""
        spec = self.get(call.tool)
        if spec is None:
            logger.info('Dispatch of unregistered tool %r', call.tool)
            return self.error_observation(
                call, f"unknown tool '{call.tool}'; registered tools: {self.names()}"
            )

        context = ToolContext(store=store, registry=self, backend=backend, parent_call=call)
        try:
            serializer = spec.serializer_class(data=copy.deepcopy(call.args), context={'store': store})
            if not serializer.is_valid():
                return self.error_observation(call, flatten_errors(serializer.errors), spec)
            result = spec.func(context, **serializer.validated_data)
        except (ToolError, SeriesError) as exc:
            logger.info('Tool %s failed: %s', call.tool, exc)
            return self.error_observation(call, str(exc), spec, context.children)
        except Exception as exc:  # noqa: BLE001
            logger.exception("Tool %s raised unexpectedly", call.tool)
            return self.error_observation(
                call, f"{type(exc).__name__}: {exc}", spec, context.children
            )

        if result.kind not in FAMILY_KINDS[spec.family]:
            return self.error_observation(
                call, f'tool produced {result.kind!r}, which family {spec.family!r} cannot emit', spec
            )
        seq = self.next_seq()
        logger.debug('Tool %s -> %s (seq %s)', call.tool, result.kind, seq)
        return Observation(
            kind=result.kind,
            value=to_jsonable(result.value),
            source=call,
            seq=seq,
            diagnostics=to_jsonable(result.diagnostics),
            children=tuple(context.children),
        )

