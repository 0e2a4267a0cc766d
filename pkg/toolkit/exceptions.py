"""
Errors raised inside tool implementations.

`ToolRegistry.dispatch` converts every one of them into an error
Observation, so they never reach the agent loop as exceptions.
"""


class ToolError(Exception):
    """A tool was called with arguments it cannot work with."""


class RegistryError(Exception):
    """Misconfiguration of the registry itself (duplicate or malformed ToolSpec)."""


class PipelineError(ToolError):
    """A synthesized pipeline does not parse or does not validate."""
