"""
Declarative tool pipelines.

A pipeline document names existing tools and how to chain them:

    {"name": "smoothed_volatility",
     "description": "...",
     "parameters": [{"name": "name", "type": "series"},
                    {"name": "window", "type": "int", "default": 10}],
     "steps": [{"tool": "volatility", "args": {"name": "$input", "window": "$window"}},
               {"tool": "rolling_stat", "args": {"name": "$prev", "window": "$window"}}]}

`$input` is the first series parameter, `$prev` the previous step's result
(its stored name for series results) and `$<param>` any declared
parameter. Registered pipelines dispatch every step through the registry,
so each step lands in the evidence log as its own observation.
"""
import json
import logging
import re

from rest_framework import serializers

from toolkit.exceptions import PipelineError
from toolkit.registry import ToolCall, ToolResult, ToolSpec
from toolkit.serializers import (
    PipelineSerializer,
    SeriesRefField,
    ToolArgumentsSerializer,
    flatten_errors,
)

logger = logging.getLogger(__name__)

PLACEHOLDER = re.compile(r'^\$([A-Za-z_][A-Za-z0-9_]*)$')
DEFAULT_PARAMETERS = [{'name': 'name', 'type': 'series', 'required': True}]
RESERVED_TOOLS = {'custom_operator'}


def extract_document(text):
    """The JSON object in a model reply, tolerating code fences and chatter around it."""
    start, end = text.find('{'), text.rfind('}')
    if start < 0 or end <= start:
        raise PipelineError('the pipeline reply holds no JSON object')
    try:
        return json.loads(text[start:end + 1])
    except ValueError as exc:
        raise PipelineError(f'the pipeline reply is not valid JSON: {exc}') from exc


def _placeholders(value):
    if isinstance(value, str):
        match = PLACEHOLDER.match(value)
        return [match.group(1)] if match else []
    if isinstance(value, (list, tuple)):
        return [name for item in value for name in _placeholders(item)]
    if isinstance(value, dict):
        return [name for item in value.values() for name in _placeholders(item)]
    return []


def validate_pipeline(document, registry):
    """Check a pipeline document against the registry; returns the cleaned document."""
    serializer = PipelineSerializer(data=document)
    if not serializer.is_valid():
        raise PipelineError(f'invalid pipeline: {flatten_errors(serializer.errors)}')
    doc = json.loads(json.dumps(serializer.validated_data))
    if not doc['parameters']:
        doc['parameters'] = [dict(p) for p in DEFAULT_PARAMETERS]
    if doc['name'] in registry:
        raise PipelineError(f"a tool named '{doc['name']}' is already registered")

    parameters = {p['name'] for p in doc['parameters']}
    if not any(p['type'] == 'series' for p in doc['parameters']):
        raise PipelineError('a pipeline needs at least one parameter of type series')

    previous_kind = None
    for position, step in enumerate(doc['steps'], start=1):
        tool = step['tool']
        if tool in RESERVED_TOOLS:
            raise PipelineError(f'step {position}: {tool} cannot be used inside a pipeline')
        spec = registry.get(tool)
        if spec is None:
            raise PipelineError(f"step {position}: unknown tool '{tool}'; registered tools: {registry.names()}")
        accepted = {p.name for p in spec.parameters}
        unknown = sorted(set(step['args']) - accepted)
        if unknown:
            raise PipelineError(f'step {position}: {tool} does not accept {unknown}; accepted: {sorted(accepted)}')
        for name in _placeholders(step['args']):
            if name == 'prev' and position == 1:
                raise PipelineError('step 1: $prev has no previous step')
            if name == 'prev' and previous_kind not in ('series', 'real'):
                raise PipelineError(f'step {position}: $prev cannot carry a {previous_kind} result')
            if name not in parameters | {'input', 'prev'}:
                raise PipelineError(f'step {position}: ${name} is not a declared parameter')
        previous_kind = spec.output_kind
    doc['output_kind'] = previous_kind
    return doc


def pipeline_serializer(doc):
    """A ToolArgumentsSerializer subclass whose fields are the pipeline's parameters."""
    fields = {}
    for param in doc['parameters']:
        options = {'required': param.get('required', True)}
        if 'default' in param:
            options = {'required': False, 'default': param['default']}
        if param['type'] == 'series':
            fields[param['name']] = SeriesRefField(**options)
        else:
            fields[param['name']] = serializers.JSONField(**options)
    class_name = ''.join(part.title() for part in doc['name'].split('_')) + 'Serializer'
    return type(class_name, (ToolArgumentsSerializer,), fields)


class PipelineRunner:
    """Callable used as the func of a registered pipeline ToolSpec."""

    def __init__(self, doc):
        self.doc = doc
        self.series_params = [p['name'] for p in doc['parameters'] if p['type'] == 'series']

    def _substitute(self, value, bound, previous):
        if isinstance(value, str):
            match = PLACEHOLDER.match(value)
            if not match:
                return value
            key = match.group(1)
            if key == 'prev':
                return previous
            if key == 'input':
                return bound[self.series_params[0]]
            return bound.get(key)
        if isinstance(value, list):
            return [self._substitute(item, bound, previous) for item in value]
        if isinstance(value, dict):
            return {k: self._substitute(v, bound, previous) for k, v in value.items()}
        return value

    @staticmethod
    def _carry(observation):
        if observation.kind == 'series':
            value = observation.value
            if isinstance(value, list):
                return [item['name'] for item in value]
            return value['name']
        return observation.value

    def __call__(self, context, **arguments):
        bound = {}
        for key, value in arguments.items():
            if key in self.series_params:
                names = [series.name for series in value]
                bound[key] = names[0] if len(names) == 1 else names
            else:
                bound[key] = value

        previous = None
        last = None
        for position, step in enumerate(self.doc['steps'], start=1):
            args = self._substitute(step['args'], bound, previous)
            # Unset optional parameters fall back to the step tool's own defaults.
            call = ToolCall(step['tool'], {k: v for k, v in args.items() if v is not None})
            last = context.registry.dispatch(call, context.store, context.backend)
            context.children.append(last)
            if last.is_error:
                raise PipelineError(f"step {position} ({step['tool']}) failed: {last.error}")
            previous = self._carry(last)

        return ToolResult(
            kind=last.kind,
            value=last.value,
            diagnostics={
                'pipeline': self.doc['name'],
                'steps': [child.seq for child in context.children],
                **{k: v for k, v in last.diagnostics.items() if k not in ('pipeline', 'steps')},
            },
        )


def register_pipeline(registry, document):
    """Validate `document` and register it as a custom-family tool; returns the ToolSpec."""
    doc = validate_pipeline(document, registry)
    spec = ToolSpec(
        name=doc['name'],
        family='custom',
        output_kind=doc['output_kind'],
        description=doc['description'],
        serializer_class=pipeline_serializer(doc),
        func=PipelineRunner(doc),
        pipeline=doc,
    )
    registry.register(spec)
    logger.info('Registered pipeline %s with %d step(s)', spec.name, len(doc['steps']))
    return spec
