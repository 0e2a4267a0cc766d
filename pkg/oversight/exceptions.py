"""
Errors raised while loading intent rules.

Critic and gate never raise on model output: problems there become
feedback text or rejection reasons.
"""


class OversightError(Exception):
    """Base class for oversight configuration failures."""


class IntentRuleError(OversightError):
    """The intent rule table is malformed or names unknown tools."""
