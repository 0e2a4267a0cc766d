"""
Built-in tools. Importing the family modules fills BUILTIN_TOOLS in catalog order.
"""
from toolkit.registry import ToolRegistry
# Listed in catalog order.
from toolkit.tools import processing, detection, numerical, relations, custom  # noqa: F401, I001
from toolkit.tools.base import BUILTIN_TOOLS


def build_registry():
    """A fresh registry holding every built-in tool."""
    return ToolRegistry(BUILTIN_TOOLS)
