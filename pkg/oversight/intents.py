"""
Question intent detection.

The rule table (rules/intents.json by default) is an ordered list of
classes, each with keyword patterns, an answer schema and the predicates
the evidence log must cover. The first class whose pattern matches wins;
a class with no patterns matches everything and closes the table.

Two things in the question text override the class schema: lettered
option lines ("A) beginning") make it multiple choice over those options,
and a |...| output template makes it a template schema.
"""
import json
import logging
import re
import string
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

from django.conf import settings

from oversight.exceptions import IntentRuleError
from oversight.predicates import ANY_TOOL, Predicate
from oversight.serializers import IntentRuleSerializer
from toolkit.serializers import flatten_errors

logger = logging.getLogger(__name__)

UNDECIDABLE = 'UNDECIDABLE'
FALLBACK_TASK = 'generic'

OPTION_LINE = re.compile(r'^\s*\(?([A-H])[).:]\s+(.+?)\s*$', re.MULTILINE)
TEMPLATE = re.compile(r'\|([^|\n]+)\|')
SLOT = re.compile(r'\(select (all that apply|one) from ([^)]*)\)', re.IGNORECASE)
NUMBER = re.compile(r'[-+]?(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][-+]?\d+)?')
LETTER_ONLY = re.compile(r'^(?:option\s+)?\(?([a-h])\)?[.):]?$')
LETTER_LEAD = re.compile(r'^(?:option\s+)?\(?([a-h])[).:]\s*(.*)$')


def normalize_text(text):
    text = (text or '').casefold().replace('|', ' ')
    text = ' '.join(text.split())
    return text.rstrip('.').strip()


def _contains_word(text, word):
    return re.search(rf'(?<![\w-]){re.escape(word)}(?![\w-])', text) is not None


def template_pattern(template):
    """Regex over normalized text for a |...| template and its option slots."""
    template = normalize_text(template)
    parts = []
    position = 0
    for slot in SLOT.finditer(template):
        parts.append(re.escape(template[position:slot.start()]))
        choices = [normalize_text(c) for c in slot.group(2).split(',') if c.strip()]
        choice = '(?:' + '|'.join(re.escape(c) for c in choices) + ')'
        if slot.group(1).lower() == 'one':
            parts.append(choice)
        else:
            parts.append(rf'{choice}(?:(?:\s*,\s*(?:and\s+)?|\s+and\s+){choice})*')
        position = slot.end()
    parts.append(re.escape(template[position:]))
    return ''.join(parts)


@dataclass(frozen=True)
class AnswerSchema:
    """
    Shape the final answer must have.

    `options` holds (letter, text) pairs for mcq, `labels` the allowed
    categories, `pattern` a regex for template answers.
    """

    type: str
    options: tuple = ()
    labels: tuple = ()
    tolerance: float = None
    pattern: str = None
    template: str = None

    def describe(self):
        if self.type == 'mcq':
            listed = ', '.join(f'{letter}) {text}' for letter, text in self.options)
            return f'one of {listed}; answer with the letter or the option text'
        if self.type == 'categorical':
            return f"one of: {', '.join(self.labels)}"
        if self.type == 'numeric':
            return 'a number'
        if self.type == 'template':
            return f'text following the template |{self.template or self.pattern}|'
        return 'free text'

    def resolve(self, answer):
        """Canonical form of an in-schema answer (letter, label, number or normalized text), else None."""
        text = (answer or '').strip()
        if self.type == 'mcq':
            return self._resolve_option(text)
        if self.type == 'categorical':
            found = self._labels_in(text)
            return found[0] if len(found) == 1 else None
        if self.type == 'numeric':
            match = NUMBER.search(text)
            return float(match.group()) if match else None
        normalized = normalize_text(text)
        if self.type == 'template':
            match = re.search(self.pattern, normalized)
            return match.group(0) if match else None
        return normalized or None

    def check(self, answer):
        """None when the answer fits the schema, otherwise the violation as text."""
        text = (answer or '').strip()
        if not text:
            return 'the answer is empty'
        if self.resolve(text) is not None:
            return None
        if self.type == 'mcq':
            letters = ', '.join(letter for letter, _ in self.options)
            chosen = LETTER_ONLY.match(normalize_text(text.splitlines()[0]))
            if chosen:
                return f'{chosen.group(1).upper()} is not one of the options {letters}'
            return f'the answer must name exactly one of the options {letters}'
        if self.type == 'categorical':
            return f"the answer must contain exactly one of: {', '.join(self.labels)}"
        if self.type == 'numeric':
            return 'the answer must contain a number'
        if self.type == 'template':
            return f'the answer does not follow the template |{self.template or self.pattern}|'
        return 'the answer is empty'

    def _resolve_option(self, text):
        if not text:
            return None
        line = normalize_text(text.splitlines()[0])
        letters = {letter.lower(): letter for letter, _ in self.options}
        for letter, option in self.options:
            if line == normalize_text(option):
                return letter
        match = LETTER_ONLY.match(line) or LETTER_LEAD.match(line)
        if match:
            return letters.get(match.group(1))
        named = [letter for letter, option in self.options if _contains_word(line, normalize_text(option))]
        return named[0] if len(named) == 1 else None

    def _labels_in(self, text):
        text = normalize_text(text).replace('-', '')
        return [label for label in self.labels if _contains_word(text, label.casefold().replace('-', ''))]

    def to_dict(self):
        data = {'type': self.type}
        if self.options:
            data['options'] = [list(option) for option in self.options]
        if self.labels:
            data['labels'] = list(self.labels)
        if self.tolerance is not None:
            data['tolerance'] = self.tolerance
        if self.pattern is not None:
            data['pattern'] = self.pattern
        if self.template is not None:
            data['template'] = self.template
        return data

    @classmethod
    def from_dict(cls, data):
        return cls(
            type=data['type'],
            options=tuple(tuple(option) for option in data.get('options', ())),
            labels=tuple(data.get('labels', ())),
            tolerance=data.get('tolerance'),
            pattern=data.get('pattern'),
            template=data.get('template'),
        )


@dataclass(frozen=True)
class QuestionIntent:
    task: str
    schema: AnswerSchema
    required: tuple

    def predicate(self, name):
        return next((p for p in self.required if p.name == name), None)

    def to_dict(self):
        return {
            'task': self.task,
            'schema': self.schema.to_dict(),
            'required': [p.to_dict() for p in self.required],
        }

    @classmethod
    def from_dict(cls, data):
        return cls(
            task=data['task'],
            schema=AnswerSchema.from_dict(data['schema']),
            required=tuple(Predicate.from_dict(p) for p in data['required']),
        )


@dataclass(frozen=True)
class IntentRule:
    task: str
    patterns: tuple
    schema: AnswerSchema
    required: tuple

    def matches(self, question):
        return not self.patterns or any(re.search(p, question, re.IGNORECASE) for p in self.patterns)


def _schema_from_rule(data):
    options = tuple(zip(string.ascii_uppercase, data.get('options') or ()))
    return AnswerSchema(
        type=data['type'],
        options=options,
        labels=tuple(data.get('labels') or ()),
        tolerance=data.get('tolerance'),
        pattern=data.get('pattern'),
    )


def parse_intent_rules(document, tool_names=None):
    """Validate a rule table document; tool names, when given, bound what binding rules may name."""
    if not isinstance(document, list) or not document:
        raise IntentRuleError('the intent rule table must be a non-empty list')
    rules = []
    for position, item in enumerate(document, start=1):
        serializer = IntentRuleSerializer(data=item)
        if not serializer.is_valid():
            raise IntentRuleError(f'rule {position}: {flatten_errors(serializer.errors)}')
        data = serializer.validated_data
        predicates = []
        for spec in data['required']:
            unknown = [t for t in spec['tools'] if t != ANY_TOOL and tool_names is not None and t not in tool_names]
            if unknown:
                raise IntentRuleError(f"rule {data['task']}: predicate {spec['name']} names unknown tools {unknown}")
            predicates.append(Predicate(spec['name'], spec['domain'], tuple(spec['tools']), spec['extract']))
        rules.append(IntentRule(
            task=data['task'],
            patterns=tuple(data['patterns']),
            schema=_schema_from_rule(data['schema']),
            required=tuple(predicates),
        ))
    if rules[-1].patterns:
        raise IntentRuleError('the last rule must have no patterns so that detection is total')
    return tuple(rules)


@lru_cache(maxsize=8)
def _load(path):
    from toolkit.tools import build_registry

    try:
        document = json.loads(Path(path).read_text(encoding='utf-8'))
    except (OSError, ValueError) as exc:
        raise IntentRuleError(f'cannot read intent rules from {path}: {exc}') from exc
    rules = parse_intent_rules(document, set(build_registry().names()))
    logger.debug('Loaded %d intent classes from %s', len(rules), path)
    return rules


def load_intent_rules(path=None):
    return _load(str(path or settings.TSAGENT['INTENT_RULES_PATH']))


def question_options(question):
    """Lettered option lines of a multiple-choice question, in order."""
    options = OPTION_LINE.findall(question)
    letters = [letter for letter, _ in options]
    if len(options) < 2 or len(set(letters)) != len(letters):
        return ()
    return tuple((letter, text.strip()) for letter, text in options)


def detect_question_intents(question, rules=None):
    """Pure function of the question text: the first matching class, with schema overrides applied."""
    rules = load_intent_rules() if rules is None else rules
    rule = next(rule for rule in rules if rule.matches(question))
    schema = rule.schema

    options = question_options(question)
    template = TEMPLATE.search(question)
    if options:
        schema = AnswerSchema(type='mcq', options=options)
    elif template:
        schema = AnswerSchema(
            type='template',
            pattern=template_pattern(template.group(1)),
            template=template.group(1).strip(),
        )
    return QuestionIntent(task=rule.task, schema=schema, required=rule.required)
