"""
Benchmark questions and their JSONL files.

One question per line:

    {"id": "trend-7-0",
     "category": "trend",
     "question": "...",
     "series": [{"name": "series", "payload": {"index": [...], "channels": {...}}}
                | {"name": "series", "file": "data/x.csv", "format": "csv"}],
     "options": ["beginning", "middle", "end"],      # mcq only
     "answer": "middle",
     "provenance": {"kind": "synthetic", "seed": 700021, "params": {...}}
                   | {"kind": "external", "source": "..."}}

File references resolve relative to the JSONL file.
"""
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from rest_framework import serializers

from harness.exceptions import DatasetError
from series.exceptions import SeriesError
from series.services import SeriesService
from series.store import SeriesStore
from toolkit.serializers import flatten_errors

logger = logging.getLogger(__name__)


class SeriesRefSerializer(serializers.Serializer):
    name = serializers.CharField()
    payload = serializers.JSONField(required=False)
    file = serializers.CharField(required=False)
    format = serializers.ChoiceField(choices=SeriesService.SUPPORTED_FORMATS, required=False)

    def validate(self, attrs):
        if ('payload' in attrs) == ('file' in attrs):
            raise serializers.ValidationError('a series gives exactly one of payload or file')
        return attrs


class ProvenanceSerializer(serializers.Serializer):
    kind = serializers.ChoiceField(choices=('synthetic', 'external'))
    seed = serializers.IntegerField(required=False)
    params = serializers.JSONField(required=False)
    source = serializers.CharField(required=False)

    def validate(self, attrs):
        if attrs['kind'] == 'synthetic' and 'seed' not in attrs:
            raise serializers.ValidationError('synthetic provenance needs the generator seed')
        return attrs


class BenchQuestionSerializer(serializers.Serializer):
    id = serializers.CharField()
    category = serializers.CharField()
    question = serializers.CharField(trim_whitespace=False)
    series = serializers.ListField(child=SeriesRefSerializer(), allow_empty=False)
    options = serializers.ListField(child=serializers.CharField(), required=False, default=list)
    answer = serializers.CharField(trim_whitespace=False)
    provenance = ProvenanceSerializer(required=False, default=None, allow_null=True)

    def validate(self, attrs):
        if attrs['options'] and attrs['answer'] not in attrs['options']:
            raise serializers.ValidationError(
                f"answer {attrs['answer']!r} is not one of the options {attrs['options']}"
            )
        return attrs


@dataclass(frozen=True)
class BenchQuestion:
    id: str
    category: str
    question: str
    series: tuple
    answer: str
    options: tuple = ()
    provenance: dict = field(default=None, compare=False)
    base_dir: str = field(default=None, compare=False)

    @property
    def series_names(self):
        return [ref['name'] for ref in self.series]

    def to_dict(self):
        data = {
            'id': self.id,
            'category': self.category,
            'question': self.question,
            'series': [dict(ref) for ref in self.series],
            'answer': self.answer,
        }
        if self.options:
            data['options'] = list(self.options)
        if self.provenance is not None:
            data['provenance'] = self.provenance
        return data

    @classmethod
    def from_dict(cls, data, base_dir=None):
        serializer = BenchQuestionSerializer(data=data)
        if not serializer.is_valid():
            raise DatasetError(f"question {data.get('id', '?')}: {flatten_errors(serializer.errors)}")
        valid = serializer.validated_data
        return cls(
            id=valid['id'],
            category=valid['category'],
            question=valid['question'],
            series=tuple(dict(ref) for ref in valid['series']),
            answer=valid['answer'],
            options=tuple(valid['options']),
            provenance=dict(valid['provenance']) if valid['provenance'] else None,
            base_dir=str(base_dir) if base_dir else None,
        )

    def load_series(self, ref):
        if 'payload' in ref:
            return SeriesService.from_payload(ref['payload'], name=ref['name'])
        path = Path(ref['file'])
        if not path.is_absolute() and self.base_dir:
            path = Path(self.base_dir) / path
        fmt = ref.get('format') or SeriesService.guess_format(path)
        return SeriesService.load_series(path, fmt, ref['name'])

    def build_store(self, withhold_series=False):
        """
        A fresh store holding the question's series.

        With `withhold_series` every series is replaced by a single-point
        zero placeholder under the same name, so the agent sees the names
        but none of the data.
        """
        store = SeriesStore()
        try:
            for ref in self.series:
                if withhold_series:
                    placeholder = {'index': [0], 'channels': {'value': [0.0]}}
                    store.add(SeriesService.from_payload(placeholder, name=ref['name']))
                else:
                    store.add(self.load_series(ref))
        except SeriesError as exc:
            raise DatasetError(f'question {self.id}: {exc}') from exc
        return store


def series_payload(values, index=None):
    values = np.asarray(values, dtype=float)
    index = list(range(values.size)) if index is None else list(index)
    return {'index': index, 'channels': {'value': values.tolist()}}


def load_dataset(path):
    """Questions of a JSONL file, in file order; blank lines are skipped."""
    path = Path(path)
    try:
        lines = path.read_text(encoding='utf-8').splitlines()
    except OSError as exc:
        raise DatasetError(f'cannot read dataset {path}: {exc}') from exc
    questions = []
    for number, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            data = json.loads(line)
        except ValueError as exc:
            raise DatasetError(f'{path}:{number}: not valid JSON: {exc}') from exc
        questions.append(BenchQuestion.from_dict(data, base_dir=path.parent))
    ids = [q.id for q in questions]
    if len(ids) != len(set(ids)):
        raise DatasetError(f'{path}: question ids are not unique')
    logger.info('Loaded %d question(s) from %s', len(questions), path)
    return questions


def dump_dataset(questions, path=None):
    """JSONL text of `questions`; also written to `path` when given."""
    text = ''.join(json.dumps(q.to_dict(), sort_keys=True) + '\n' for q in questions)
    if path is not None:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(text, encoding='utf-8')
    return text
