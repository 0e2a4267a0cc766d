"""
Chat backends: the OpenAI-compatible HTTP client and the scripted fixture
player used by tests, benchmarks and the case-study replay.

A backend instance serves one run. Both the reasoner and the critic talk to
the same instance.
"""
import json
import logging
import os
from dataclasses import dataclass, field
from pathlib import Path

import openai
from django.conf import settings
from tenacity import (
    Retrying,
    before_sleep_log,
    retry_if_exception_type,
    stop_after_attempt,
    wait_exponential,
)

from llm.exceptions import (
    FixtureExhaustedError,
    LLMAuthError,
    LLMConfigError,
    LLMTransportError,
    NoMatchingResponseError,
)
from llm.serializers import BackendConfigSerializer, ScriptedFixtureSerializer
from toolkit.serializers import flatten_errors

logger = logging.getLogger(__name__)

ROLES = ('system', 'user', 'assistant')

RETRYABLE_ERRORS = (
    openai.APIConnectionError,
    openai.APITimeoutError,
    openai.RateLimitError,
    openai.InternalServerError,
)


@dataclass(frozen=True)
class ChatMessage:
    role: str
    content: str

    def __post_init__(self):
        if self.role not in ROLES:
            raise LLMConfigError(f'unknown chat role {self.role!r}')
        if not isinstance(self.content, str) or not self.content:
            raise LLMConfigError('chat message content must be non-empty text')

    def to_dict(self):
        return {'role': self.role, 'content': self.content}


@dataclass(frozen=True)
class BackendConfig:
    kind: str
    endpoint: str = None
    model: str = None
    auth: str = None
    temperature: float = 0.0
    max_retries: int = 4
    timeout: float = 60.0
    fixture: str = None
    entries: list = field(default=None, compare=False)

    @classmethod
    def from_data(cls, data):
        serializer = BackendConfigSerializer(data=data)
        if not serializer.is_valid():
            raise LLMConfigError(flatten_errors(serializer.errors))
        return cls(**serializer.validated_data)

    @classmethod
    def from_settings(cls, **overrides):
        """Build from TSAGENT['LLM'], with non-None overrides (e.g. CLI flags) on top."""
        llm = settings.TSAGENT['LLM']
        data = {
            'kind': llm['KIND'],
            'endpoint': llm['ENDPOINT'],
            'model': llm['MODEL'],
            'auth': llm['AUTH_ENV'],
            'temperature': llm['TEMPERATURE'],
            'max_retries': llm['MAX_RETRIES'],
            'timeout': llm['TIMEOUT'],
        }
        data.update({key: value for key, value in overrides.items() if value is not None})
        if data['kind'] == 'scripted':
            for key in BackendConfigSerializer.HTTP_FIELDS:
                data.pop(key, None)
        return cls.from_data(data)


class LLMBackend:
    """complete(messages) -> text; raises LLMError subclasses on hard failure."""

    kind = None

    def complete(self, messages):
        raise NotImplementedError


class HttpBackend(LLMBackend):
    kind = 'http'

    def __init__(self, config):
        self.config = config
        api_key = os.environ.get(config.auth, '').strip()
        if not api_key:
            raise LLMAuthError(f'no API key found: set the {config.auth} environment variable')
        # Retries are handled by tenacity so every attempt is logged.
        self.client = openai.OpenAI(
            api_key=api_key,
            base_url=config.endpoint,
            timeout=config.timeout,
            max_retries=0,
        )

    def _create(self, messages):
        response = self.client.chat.completions.create(
            model=self.config.model,
            messages=[message.to_dict() for message in messages],
            temperature=self.config.temperature,
        )
        return response.choices[0].message.content or ''

    def complete(self, messages):
        retrying = Retrying(
            stop=stop_after_attempt(self.config.max_retries + 1),
            wait=wait_exponential(multiplier=0.5, max=8),
            retry=retry_if_exception_type(RETRYABLE_ERRORS),
            before_sleep=before_sleep_log(logger, logging.WARNING),
            reraise=True,
        )
        try:
            return retrying(self._create, messages)
        except openai.AuthenticationError as exc:
            raise LLMAuthError(
                f'authentication failed at {self.config.endpoint}; check the {self.config.auth} environment variable'
            ) from exc
        except RETRYABLE_ERRORS as exc:
            raise LLMTransportError(
                f'{self.config.endpoint} failed after {self.config.max_retries + 1} attempt(s): {exc}'
            ) from exc
        except openai.APIError as exc:
            raise LLMTransportError(f'{self.config.endpoint} rejected the request: {exc}') from exc


class ScriptedBackend(LLMBackend):
    """
    Plays back fixture entries.

    Each call takes the first entry, in file order, that is still available
    and whose match accepts the call: no match always accepts, `ordinal`
    accepts the n-th call (1-based) and `contains` accepts when the last
    message holds the text. Entries are consumed unless `repeat` is set.
    """

    kind = 'scripted'

    def __init__(self, entries):
        serializer = ScriptedFixtureSerializer(data={'entries': list(entries)})
        if not serializer.is_valid():
            raise LLMConfigError(f'invalid scripted fixture: {flatten_errors(serializer.errors)}')
        self.entries = serializer.validated_data['entries']
        self.used = [False] * len(self.entries)
        self.calls = 0

    @classmethod
    def from_file(cls, path):
        path = Path(path)
        try:
            data = json.loads(path.read_text(encoding='utf-8'))
        except (OSError, ValueError) as exc:
            raise LLMConfigError(f'cannot read scripted fixture {path}: {exc}') from exc
        if isinstance(data, dict):
            data = data.get('entries', [])
        return cls(data)

    @staticmethod
    def _accepts(match, ordinal, text):
        if not match:
            return True
        if 'ordinal' in match:
            return match['ordinal'] == ordinal
        return match['contains'] in text

    def complete(self, messages):
        self.calls += 1
        text = messages[-1].content if messages else ''
        for position, entry in enumerate(self.entries):
            if self.used[position]:
                continue
            if self._accepts(entry['match'], self.calls, text):
                if not entry['repeat']:
                    self.used[position] = True
                return entry['response']
        if all(used or entry['repeat'] for used, entry in zip(self.used, self.entries)):
            raise FixtureExhaustedError(self.calls)
        raise NoMatchingResponseError(self.calls)


def build_backend(config):
    """A fresh backend for one run (scripted cursors are never shared)."""
    if isinstance(config, LLMBackend):
        return config
    if config.kind == 'http':
        return HttpBackend(config)
    if config.entries:
        return ScriptedBackend(config.entries)
    return ScriptedBackend.from_file(config.fixture)


def complete(backend, messages):
    """Send `messages` (ChatMessage list) and return the reply text."""
    backend = build_backend(backend)
    logger.debug('LLM call (%s) with %d message(s)', backend.kind, len(messages))
    return backend.complete(messages)
