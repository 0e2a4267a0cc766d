"""
Errors raised by the agent loop.

A run that ends without an accepted answer is not an exception: it is an
AgentResult with a failure outcome. Only a backend that cannot be reached
aborts a run.
"""


class AgentError(Exception):
    """Base class for agent failures."""


class AgentTransportError(AgentError):
    """The reasoner backend failed hard; the run was aborted."""


class TraceFormatError(AgentError):
    """A serialized trace does not follow the trace schema."""
