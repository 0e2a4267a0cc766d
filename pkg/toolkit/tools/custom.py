"""
custom_operator: asks the model for a declarative pipeline over the
registered tools and registers it for the rest of the run.
"""
import logging

from llm.exceptions import LLMError
from llm.prompts import render_pipeline_prompt
from toolkit.exceptions import ToolError
from toolkit.pipelines import extract_document, register_pipeline
from toolkit.registry import ToolResult
from toolkit.serializers import CustomOperatorSerializer
from toolkit.tools.base import tool

logger = logging.getLogger(__name__)


@tool('custom_operator', 'custom', 'meta', CustomOperatorSerializer,
      'Describe a new analysis in words; it is built from the other tools and registered under a new name.')
def custom_operator(context, prompt):
    if context.backend is None:
        raise ToolError('custom_operator needs an LLM backend to synthesize a pipeline')
    messages = render_pipeline_prompt(context.registry.catalog(), prompt)
    try:
        reply = context.backend.complete(messages)
    except LLMError as exc:
        raise ToolError(f'pipeline synthesis failed: {exc}') from exc
    spec = register_pipeline(context.registry, extract_document(reply))
    return ToolResult(
        kind='meta',
        value={
            'registered': spec.name,
            'usage': spec.usage(),
            'output_kind': spec.output_kind,
            'steps': [step['tool'] for step in spec.pipeline['steps']],
        },
        diagnostics={'pipeline': spec.pipeline},
    )
