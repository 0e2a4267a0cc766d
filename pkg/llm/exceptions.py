"""
Errors raised by LLM backends.

Anything deriving from LLMError is a hard backend failure: the agent stops
the run with a transport error instead of retrying the turn.
"""


class LLMError(Exception):
    """Base class for backend failures."""


class LLMConfigError(LLMError):
    """The backend configuration is incomplete or inconsistent."""


class LLMAuthError(LLMError):
    """The endpoint rejected the credentials, or none were found."""


class LLMTransportError(LLMError):
    """The endpoint could not be reached or kept failing after retries."""


class ScriptedFixtureError(LLMError):
    """A scripted fixture could not answer a request."""


class FixtureExhaustedError(ScriptedFixtureError):
    def __init__(self, calls):
        self.calls = calls
        super().__init__(f'scripted fixture exhausted after {calls} call(s)')


class NoMatchingResponseError(ScriptedFixtureError):
    def __init__(self, calls):
        self.calls = calls
        super().__init__(f'no scripted response matches call {calls}')
