"""
Predicates, bindings and the coverage state of a run.

A predicate is bound by an observation when the observation's tool is in
the predicate's binding rule and its extractor yields a value. Bindings
carry a subject (which stretch of data they talk about) so that
contradictions are only looked for between bindings about the same thing.
"""
import dataclasses
import json
from dataclasses import dataclass, field

DOMAINS = ('boolean', 'label', 'numeric', 'segment', 'profile', 'any')
CONTRADICTION_DOMAINS = ('boolean', 'label', 'segment')
ANY_TOOL = '*'
SEGMENTS = ('beginning', 'middle', 'end')
SERIES_ARGS = ('name', 'name1', 'name2')

UNBOUND = object()


def _record_field(key):
    def extract(observation, roots):
        if observation.kind == 'record' and isinstance(observation.value, dict) and key in observation.value:
            return observation.value[key]
        return UNBOUND

    return extract


def _category(observation, roots):
    return observation.value if observation.kind == 'category' else UNBOUND


def _period(observation, roots):
    if observation.kind != 'category' or 'period' not in observation.diagnostics:
        return UNBOUND
    period = observation.diagnostics['period']
    return 'none' if period is None else period


def _has_anomaly(observation, roots):
    if observation.kind != 'index-set':
        return UNBOUND
    return bool(observation.value)


def segment_of(position, length):
    """beginning/middle/end by thirds of [0, length)."""
    third = min(2, max(0, position) * 3 // max(length, 1))
    return SEGMENTS[third]


def _anomaly_segment(observation, roots):
    """
    Thirds of the root series the anomaly falls in.

    Positions on a window are shifted by the window's offset and measured
    against the root's length. A window whose root length is unknown binds
    nothing.
    """
    if observation.kind != 'index-set' or not observation.value:
        return UNBOUND
    diagnostics = observation.diagnostics
    position = diagnostics.get('most_severe')
    if position is None:
        position = observation.value[0]
    length = diagnostics.get('length')
    span = diagnostics.get('span')
    if diagnostics.get('root_length'):
        offset = span[1] if span else 0
        return segment_of(offset + position, diagnostics['root_length'])
    if not length or (span and (span[1] != 0 or span[2] != length)):
        return UNBOUND
    return segment_of(position, length)


def _value(observation, roots):
    if observation.kind in ('real', 'record', 'relation', 'category'):
        return observation.value
    return UNBOUND


def _segment_profile(position):
    def extract(observation, roots):
        if (
            observation.kind != 'series'
            or not isinstance(observation.value, list)
            or 'boundaries' not in observation.diagnostics
            or len(roots) <= position
        ):
            return UNBOUND
        span = observation.diagnostics.get('span') or [None]
        if span[0] != roots[position]:
            return UNBOUND
        return [segment.get('mean') for segment in observation.value]

    return extract


def _mentions(position):
    def extract(observation, roots):
        if len(roots) <= position:
            return UNBOUND
        return observation.source.tool if roots[position] in subject_roots(observation) else UNBOUND

    return extract


def _any(observation, roots):
    return observation.source.tool


EXTRACTORS = {
    'category': _category,
    'decision': _record_field('decision'),
    'p_value': _record_field('p_value'),
    'best_lag': _record_field('best_lag'),
    'period': _period,
    'has_anomaly': _has_anomaly,
    'anomaly_segment': _anomaly_segment,
    'value': _value,
    'first_segment_profile': _segment_profile(0),
    'second_segment_profile': _segment_profile(1),
    'first_series': _mentions(0),
    'second_series': _mentions(1),
    'any': _any,
}


@dataclass(frozen=True)
class Predicate:
    name: str
    domain: str
    tools: tuple
    extract: str

    def accepts(self, observation):
        if observation.is_error:
            return False
        return ANY_TOOL in self.tools or observation.source.tool in self.tools

    def bind(self, observation, roots):
        if not self.accepts(observation):
            return UNBOUND
        return EXTRACTORS[self.extract](observation, roots)

    def describe(self):
        tools = 'any tool' if ANY_TOOL in self.tools else ' or '.join(self.tools)
        return f'{self.name} (verified by {tools})'

    def to_dict(self):
        return {'name': self.name, 'domain': self.domain, 'tools': list(self.tools), 'extract': self.extract}

    @classmethod
    def from_dict(cls, data):
        return cls(data['name'], data['domain'], tuple(data['tools']), data['extract'])


def subject_of(observation):
    """(root, start, end) for a single-series observation, a tuple of those for a relation."""
    diagnostics = observation.diagnostics or {}
    if diagnostics.get('span'):
        return tuple(diagnostics['span'])
    if diagnostics.get('spans'):
        return tuple(tuple(span) for span in diagnostics['spans'])
    return None


def subject_roots(observation):
    subject = subject_of(observation)
    if subject is None:
        return ()
    if subject and isinstance(subject[0], tuple):
        return tuple(part[0] for part in subject)
    return (subject[0],)


def _params(observation):
    args = {k: v for k, v in observation.source.args.items() if k not in SERIES_ARGS}
    return json.dumps(args, sort_keys=True, default=str)


def _is_strict_superset(outer, inner):
    if not (outer and inner and len(outer) == 3 and len(inner) == 3) or isinstance(outer[0], tuple):
        return False
    return outer[0] == inner[0] and outer[1] <= inner[1] and outer[2] >= inner[2] and outer != inner


@dataclass(frozen=True)
class Binding:
    predicate: str
    domain: str
    value: object
    subject: tuple
    seq: int
    tool: str
    params: str

    def to_dict(self):
        return {
            'predicate': self.predicate,
            'domain': self.domain,
            'value': self.value,
            'subject': _listify(self.subject),
            'seq': self.seq,
            'tool': self.tool,
            'params': self.params,
        }

    @classmethod
    def from_dict(cls, data):
        return cls(
            predicate=data['predicate'],
            domain=data['domain'],
            value=data['value'],
            subject=_tupleify(data['subject']),
            seq=data['seq'],
            tool=data['tool'],
            params=data['params'],
        )


def _listify(value):
    if isinstance(value, tuple):
        return [_listify(item) for item in value]
    return value


def _tupleify(value):
    if isinstance(value, list):
        return tuple(_tupleify(item) for item in value)
    return value


@dataclass(frozen=True)
class Contradiction:
    first: Binding
    second: Binding
    resolved_by: Binding = None

    @property
    def predicate(self):
        return self.first.predicate

    @property
    def resolved(self):
        return self.resolved_by is not None

    def is_confirmed_by(self, binding):
        if binding.predicate != self.predicate or binding.seq <= self.second.seq:
            return False
        if binding.value not in (self.first.value, self.second.value):
            return False
        if _is_strict_superset(binding.subject, self.first.subject):
            return True
        return binding.subject == self.first.subject and binding.params not in (self.first.params, self.second.params)

    def render(self):
        return (
            f'Contradiction on {self.predicate}: entry {self.first.seq} ({self.first.tool}) gave '
            f'{self.first.value!r} but entry {self.second.seq} ({self.second.tool}) gave {self.second.value!r} '
            'for the same data. Rerun with different parameters or on a wider window to settle it.'
        )

    def to_dict(self):
        return {
            'predicate': self.predicate,
            'entries': [self.first.seq, self.second.seq],
            'values': [self.first.value, self.second.value],
            'resolved_by': self.resolved_by.seq if self.resolved_by else None,
        }


def find_contradictions(bindings):
    """Every pair of same-subject bindings that disagree, with the later binding that settled it, if any."""
    found = []
    seen = []
    for binding in sorted(bindings, key=lambda item: item.seq):
        if binding.domain not in CONTRADICTION_DOMAINS:
            continue
        settled = set()
        for position, item in enumerate(found):
            if not item.resolved and item.is_confirmed_by(binding):
                found[position] = dataclasses.replace(item, resolved_by=binding)
                settled.update({item.first.seq, item.second.seq})
        for earlier in seen:
            if (
                earlier.predicate == binding.predicate
                and earlier.subject == binding.subject
                and earlier.value != binding.value
                and earlier.seq not in settled
            ):
                found.append(Contradiction(first=earlier, second=binding))
        seen.append(binding)
    return found


def extract_bindings(observation, intent, roots):
    """Bindings one observation contributes to the intent's required predicates."""
    if observation.is_error:
        return ()
    bindings = []
    for predicate in intent.required:
        value = predicate.bind(observation, roots)
        if value is UNBOUND:
            continue
        bindings.append(Binding(
            predicate=predicate.name,
            domain=predicate.domain,
            value=value,
            subject=subject_of(observation),
            seq=observation.seq,
            tool=observation.source.tool,
            params=_params(observation),
        ))
    return tuple(bindings)


@dataclass(frozen=True)
class CoverageState:
    """Covered predicates (latest bound value) and the remaining gap set, in the intent's order."""

    intent: object
    roots: tuple = ()
    bindings: tuple = field(default=())

    @classmethod
    def initial(cls, intent, roots=()):
        return cls(intent=intent, roots=tuple(roots))

    @property
    def covered(self):
        latest = {}
        for binding in sorted(self.bindings, key=lambda item: item.seq):
            latest[binding.predicate] = binding.value
        return {p.name: latest[p.name] for p in self.intent.required if p.name in latest}

    @property
    def gaps(self):
        covered = self.covered
        return tuple(p.name for p in self.intent.required if p.name not in covered)

    def with_bindings(self, bindings):
        if not bindings:
            return self
        return dataclasses.replace(self, bindings=self.bindings + tuple(bindings))

    def contradictions(self):
        return find_contradictions(self.bindings)

    def unresolved_contradictions(self):
        return [item for item in self.contradictions() if not item.resolved]


def bind_predicates(observation, intent, state):
    return state.with_bindings(extract_bindings(observation, intent, state.roots))
