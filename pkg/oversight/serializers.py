"""
Validation of the intent rule table.
"""
import re

from rest_framework import serializers

from oversight.predicates import DOMAINS, EXTRACTORS

SCHEMA_TYPES = ('mcq', 'categorical', 'numeric', 'template', 'free_text')


class RegexField(serializers.CharField):
    def to_internal_value(self, data):
        value = super().to_internal_value(data)
        try:
            re.compile(value)
        except re.error as exc:
            raise serializers.ValidationError(f'invalid regular expression {value!r}: {exc}')
        return value


class AnswerSchemaSerializer(serializers.Serializer):
    type = serializers.ChoiceField(choices=SCHEMA_TYPES)
    options = serializers.ListField(child=serializers.CharField(), required=False, default=list)
    labels = serializers.ListField(child=serializers.CharField(), required=False, default=list)
    tolerance = serializers.FloatField(min_value=0.0, required=False, allow_null=True, default=None)
    pattern = RegexField(required=False, allow_null=True, default=None)

    def validate(self, attrs):
        if attrs['type'] == 'mcq' and not attrs['options']:
            raise serializers.ValidationError('an mcq schema needs options')
        if attrs['type'] == 'categorical' and not attrs['labels']:
            raise serializers.ValidationError('a categorical schema needs labels')
        if attrs['type'] == 'template' and not attrs['pattern']:
            raise serializers.ValidationError('a template schema needs a pattern')
        return attrs


class PredicateSpecSerializer(serializers.Serializer):
    name = serializers.RegexField(r'^[A-Za-z_][A-Za-z0-9_]*$')
    domain = serializers.ChoiceField(choices=DOMAINS)
    tools = serializers.ListField(child=serializers.CharField(), allow_empty=False)
    extract = serializers.ChoiceField(choices=sorted(EXTRACTORS))


class IntentRuleSerializer(serializers.Serializer):
    task = serializers.RegexField(r'^[A-Za-z_][A-Za-z0-9_]*$')
    patterns = serializers.ListField(child=RegexField(), required=False, default=list)
    schema = AnswerSchemaSerializer()
    required = serializers.ListField(child=PredicateSpecSerializer(), allow_empty=False)

    def validate_required(self, value):
        names = [item['name'] for item in value]
        if len(names) != len(set(names)):
            raise serializers.ValidationError('predicate names must be unique within a class')
        return value
