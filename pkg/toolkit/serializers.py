"""
Argument serializers for every tool.

Each tool declares one Serializer; its field order is the positional order
used when the model passes a bare comma list, and its fields are what the
JSON catalog shows the model.
"""
from rest_framework import serializers

from series.exceptions import UnknownSeriesError


class SeriesRefField(serializers.Field):
    """
    One series name or a list of names, resolved against the run's store.

    Always yields a list of TimeSeries; tools decide how many they accept.
    """

    semantic_type = 'series'
    default_error_messages = {
        'invalid': 'expected a series name or a list of series names, got {value!r}',
    }

    def to_internal_value(self, data):
        names = [data] if isinstance(data, str) else data
        if (
            not isinstance(names, (list, tuple))
            or not names
            or not all(isinstance(item, str) and item.strip() for item in names)
        ):
            self.fail('invalid', value=data)
        store = self.context.get('store')
        names = [item.strip() for item in names]
        if store is None:
            return names
        try:
            return [store.get(item) for item in names]
        except UnknownSeriesError as exc:
            raise serializers.ValidationError(str(exc))

    def to_representation(self, value):
        return [getattr(item, 'name', item) for item in value]


class PositionField(serializers.Field):
    """
    An integer position or a timestamp (number or ISO date string).

    Bare integers inside the series' positional range are positions;
    {"position": n} or {"timestamp": t} force one reading.
    """

    semantic_type = 'index or timestamp (in-range integers are positions; {"timestamp": t} forces a timestamp)'
    default_error_messages = {
        'invalid': 'expected an integer position, a timestamp, {{"position": n}} or {{"timestamp": t}}, got {value!r}',
    }

    def to_internal_value(self, data):
        if isinstance(data, dict):
            if len(data) != 1 or next(iter(data)) not in ('position', 'timestamp'):
                self.fail('invalid', value=data)
            (by, at), = data.items()
            if isinstance(at, dict):
                self.fail('invalid', value=data)
            return {by: self.to_internal_value(at)}
        if isinstance(data, bool) or not isinstance(data, (int, float, str)):
            self.fail('invalid', value=data)
        if isinstance(data, str) and not data.strip():
            self.fail('invalid', value=data)
        return data

    def to_representation(self, value):
        return value


class RangeField(serializers.Field):
    """A [start, end) window given as a two-element list, an object or "start:end"."""

    semantic_type = 'range [start, end)'
    default_error_messages = {
        'invalid': 'expected [start, end], {{"start": .., "end": ..}} or "start:end", got {value!r}',
    }

    def to_internal_value(self, data):
        if isinstance(data, dict) and set(data) == {'start', 'end'}:
            bounds = (data['start'], data['end'])
        elif isinstance(data, (list, tuple)) and len(data) == 2:
            bounds = tuple(data)
        elif isinstance(data, str) and data.count(':') == 1:
            bounds = tuple(part.strip() for part in data.split(':'))
        else:
            self.fail('invalid', value=data)
        position = PositionField()
        return tuple(position.to_internal_value(bound) for bound in bounds)

    def to_representation(self, value):
        return list(value)


SEMANTIC_TYPES = {
    serializers.IntegerField: 'int',
    serializers.FloatField: 'real',
    serializers.CharField: 'text',
    serializers.ListField: 'list',
    serializers.DictField: 'object',
}


def semantic_type(field):
    """Short type label shown to the model for a serializer field."""
    if hasattr(field, 'semantic_type'):
        return field.semantic_type
    if isinstance(field, serializers.ChoiceField):
        return 'one of ' + '|'.join(str(choice) for choice in field.choices)
    for field_class, label in SEMANTIC_TYPES.items():
        if isinstance(field, field_class):
            return label
    return 'value'


def flatten_errors(errors, prefix=''):
    """Turn DRF's nested error dict into one readable line."""
    parts = []
    if isinstance(errors, dict):
        for key, value in errors.items():
            label = '' if key == 'non_field_errors' else f'{prefix}{key}'
            parts.append(flatten_errors(value, prefix=f'{label}: ' if label else ''))
    elif isinstance(errors, (list, tuple)):
        parts.extend(flatten_errors(item, prefix) for item in errors)
    else:
        return f'{prefix}{errors}'
    return '; '.join(part for part in parts if part)


class ToolArgumentsSerializer(serializers.Serializer):
    """Base for tool arguments: rejects names the tool does not declare."""

    def validate(self, attrs):
        unknown = sorted(set(self.initial_data) - set(self.fields))
        if unknown:
            raise serializers.ValidationError(
                f'unexpected argument(s) {unknown}; accepted: {list(self.fields)}'
            )
        return attrs


# Processing

class SliceSeriesSerializer(ToolArgumentsSerializer):
    name = SeriesRefField()
    start = PositionField()
    end = PositionField()


class SegmentSeriesSerializer(ToolArgumentsSerializer):
    name = SeriesRefField()
    k = serializers.IntegerField(min_value=1, required=False)
    lengths = serializers.ListField(child=serializers.IntegerField(min_value=1), required=False, allow_empty=False)

    def validate(self, attrs):
        attrs = super().validate(attrs)
        if ('k' in attrs) == ('lengths' in attrs):
            raise serializers.ValidationError('give exactly one of k or lengths')
        return attrs


class ResampleSeriesSerializer(ToolArgumentsSerializer):
    name = SeriesRefField()
    interval = serializers.FloatField()
    method = serializers.ChoiceField(choices=['mean', 'sum', 'last'], default='mean')


class SelectChannelSerializer(ToolArgumentsSerializer):
    name = SeriesRefField()
    channel = serializers.CharField()


class NormalizeSeriesSerializer(ToolArgumentsSerializer):
    name = SeriesRefField()
    method = serializers.ChoiceField(choices=['zscore', 'minmax'], default='zscore')
    ref_window = RangeField(required=False, allow_null=True)


# Detection

class TrendClassifierSerializer(ToolArgumentsSerializer):
    name = SeriesRefField()
    window = RangeField(required=False, allow_null=True)
    alpha = serializers.FloatField(min_value=0.0, max_value=1.0, required=False, allow_null=True)


class AnomalyClassifierSerializer(ToolArgumentsSerializer):
    name = SeriesRefField()
    threshold = serializers.FloatField(min_value=0.0, required=False, allow_null=True)
    window = serializers.IntegerField(min_value=3, required=False, allow_null=True)


class SeasonalityDetectorSerializer(ToolArgumentsSerializer):
    name = SeriesRefField()
    max_period = serializers.IntegerField(min_value=2, required=False, allow_null=True)


class ChangePointDetectorSerializer(ToolArgumentsSerializer):
    name = SeriesRefField()
    penalty = serializers.FloatField(min_value=0.0, required=False, allow_null=True)
    n_cp = serializers.IntegerField(min_value=1, required=False, allow_null=True)

    def validate(self, attrs):
        attrs = super().validate(attrs)
        if attrs.get('penalty') is not None and attrs.get('n_cp') is not None:
            raise serializers.ValidationError('give either penalty or n_cp, not both')
        return attrs


class NoiseProfileSerializer(ToolArgumentsSerializer):
    name = SeriesRefField()
    window = RangeField(required=False, allow_null=True)


class StationarityTestSerializer(ToolArgumentsSerializer):
    name = SeriesRefField()
    test = serializers.CharField(default='adf')


class SpikeDetectorSerializer(ToolArgumentsSerializer):
    name = SeriesRefField()
    threshold = serializers.FloatField(min_value=0.0, required=False, allow_null=True)
    min_sep = serializers.IntegerField(min_value=1, default=1)


# Numerical

class SeriesInfoSerializer(ToolArgumentsSerializer):
    name = SeriesRefField()


class DatapointValueSerializer(ToolArgumentsSerializer):
    name = SeriesRefField()
    at = PositionField()


class DatarangeValueSerializer(ToolArgumentsSerializer):
    name = SeriesRefField()
    start = PositionField()
    end = PositionField()
    stat = serializers.ChoiceField(choices=['mean', 'sum', 'max', 'min'], default='mean')


class SummaryStatsSerializer(ToolArgumentsSerializer):
    name = SeriesRefField()
    range = RangeField(required=False, allow_null=True)


class ReturnCalcSerializer(ToolArgumentsSerializer):
    name = SeriesRefField()
    t1 = PositionField()
    t2 = PositionField()
    kind = serializers.ChoiceField(choices=['pct', 'diff'], default='pct')


class AutocorrSerializer(ToolArgumentsSerializer):
    name = SeriesRefField()
    lag = serializers.IntegerField(min_value=0, default=1)


class RollingStatSerializer(ToolArgumentsSerializer):
    name = SeriesRefField()
    stat = serializers.ChoiceField(choices=['mean', 'std', 'quantile'], default='mean')
    window = serializers.IntegerField()
    step = serializers.IntegerField(min_value=1, default=1)
    q = serializers.FloatField(required=False, allow_null=True)

    def validate_window(self, value):
        if value < 1:
            raise serializers.ValidationError('window must be at least 1')
        return value


class QuantileValueSerializer(ToolArgumentsSerializer):
    name = SeriesRefField()
    q = serializers.FloatField()

    def validate_q(self, value):
        if not 0.0 < value < 1.0:
            raise serializers.ValidationError(f'q must lie strictly between 0 and 1, got {value}')
        return value


class VolatilitySerializer(ToolArgumentsSerializer):
    name = SeriesRefField()
    window = serializers.IntegerField(min_value=2)


# Relations

class CorrRelationSerializer(ToolArgumentsSerializer):
    name1 = SeriesRefField()
    name2 = SeriesRefField()
    lag = serializers.IntegerField(default=0)
    method = serializers.ChoiceField(choices=['pearson', 'spearman'], default='pearson')


class CrossCorrelationSerializer(ToolArgumentsSerializer):
    name1 = SeriesRefField()
    name2 = SeriesRefField()
    max_lag = serializers.IntegerField(min_value=0, default=10)


class PairSerializer(ToolArgumentsSerializer):
    name1 = SeriesRefField()
    name2 = SeriesRefField()


class ShapeSimilaritySerializer(PairSerializer):
    norm = serializers.ChoiceField(choices=['zscore'], default='zscore')


class GrangerCausalitySerializer(PairSerializer):
    maxlag = serializers.IntegerField(min_value=1, default=1)


# Custom operator synthesis

class CustomOperatorSerializer(ToolArgumentsSerializer):
    prompt = serializers.CharField()


class PipelineStepSerializer(serializers.Serializer):
    tool = serializers.CharField()
    args = serializers.DictField(default=dict)


class PipelineParameterSerializer(serializers.Serializer):
    name = serializers.RegexField(r'^[A-Za-z_][A-Za-z0-9_]*$')
    type = serializers.CharField(default='value')
    required = serializers.BooleanField(default=True)
    default = serializers.JSONField(required=False)


class PipelineSerializer(serializers.Serializer):
    """The declarative pipeline document the model emits for custom_operator."""

    name = serializers.RegexField(r'^[a-z][a-z0-9_]*$')
    description = serializers.CharField()
    parameters = PipelineParameterSerializer(many=True, default=list)
    steps = PipelineStepSerializer(many=True, allow_empty=False)
