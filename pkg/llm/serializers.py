"""
Validation of backend configurations and scripted fixture files.
"""
from rest_framework import serializers

BACKEND_KINDS = ('http', 'scripted')


class MatchSerializer(serializers.Serializer):
    ordinal = serializers.IntegerField(min_value=1, required=False)
    contains = serializers.CharField(required=False, trim_whitespace=False)

    def validate(self, attrs):
        if len(attrs) != 1:
            raise serializers.ValidationError('a match gives exactly one of ordinal or contains')
        return attrs


class ScriptedEntrySerializer(serializers.Serializer):
    match = MatchSerializer(required=False, allow_null=True, default=None)
    response = serializers.CharField(trim_whitespace=False)
    repeat = serializers.BooleanField(default=False)


class ScriptedEntryField(serializers.Field):
    """A fixture entry: a bare response string, or an object with match/response/repeat."""

    default_error_messages = {
        'invalid': 'a fixture entry is a string or an object, got {value!r}',
    }

    def to_internal_value(self, data):
        if isinstance(data, str):
            return {'match': None, 'response': data, 'repeat': False}
        if not isinstance(data, dict):
            self.fail('invalid', value=data)
        entry = ScriptedEntrySerializer(data=data)
        entry.is_valid(raise_exception=True)
        return dict(entry.validated_data)

    def to_representation(self, value):
        return value


class ScriptedFixtureSerializer(serializers.Serializer):
    entries = serializers.ListField(child=ScriptedEntryField(), allow_empty=False)


class BackendConfigSerializer(serializers.Serializer):
    """
    http needs endpoint, model and auth (the name of the environment
    variable holding the key); scripted needs a fixture path or inline
    entries.
    """

    kind = serializers.ChoiceField(choices=BACKEND_KINDS)
    endpoint = serializers.URLField(required=False, allow_null=True)
    model = serializers.CharField(required=False, allow_null=True)
    auth = serializers.CharField(required=False, allow_null=True)
    temperature = serializers.FloatField(min_value=0.0, max_value=2.0, default=0.0)
    max_retries = serializers.IntegerField(min_value=0, default=4)
    timeout = serializers.FloatField(min_value=0.1, default=60.0)
    fixture = serializers.CharField(required=False, allow_null=True)
    entries = serializers.ListField(child=ScriptedEntryField(), required=False, allow_null=True)

    HTTP_FIELDS = ('endpoint', 'model', 'auth')
    SCRIPTED_FIELDS = ('fixture', 'entries')

    def validate(self, attrs):
        if attrs['kind'] == 'http':
            missing = [name for name in self.HTTP_FIELDS if not attrs.get(name)]
            if missing:
                raise serializers.ValidationError(f'http backend needs {", ".join(missing)}')
            stray = [name for name in self.SCRIPTED_FIELDS if attrs.get(name)]
            if stray:
                raise serializers.ValidationError(f'http backend does not take {", ".join(stray)}')
        else:
            given = [name for name in self.SCRIPTED_FIELDS if attrs.get(name)]
            if len(given) != 1:
                raise serializers.ValidationError('scripted backend needs exactly one of fixture or entries')
        return attrs
