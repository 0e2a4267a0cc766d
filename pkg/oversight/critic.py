"""
Step-wise critic.

Deterministic checks always run: dispatch errors are relayed with the
tool's parameter list, contradictions raised by this step are flagged and
the remaining gap set is listed. When a backend is given the model's own
critique is appended; a failing backend only costs that second part.
"""
import json
import logging

from django.conf import settings

from llm.backends import complete
from llm.exceptions import LLMError
from llm.prompts import render_critic_prompt

logger = logging.getLogger(__name__)

SUFFICIENT = 'All required predicates are covered; the evidence is sufficient to answer.'


def _step_seqs(observation):
    seqs = {observation.seq}
    for child in observation.children:
        seqs |= _step_seqs(child)
    return seqs


def deterministic_review(step, log, intent):
    notes = []
    observation = step.observation
    if observation is None:
        if step.diagnostic:
            notes.append(f'Could not parse the last turn: {step.diagnostic}. '
                         'Reply with Thought:, Action: and Action Input:, or with Final Answer:.')
        return notes

    if observation.is_error:
        notes.append(observation.error)
        diagnostics = observation.diagnostics
        if 'parameters' in diagnostics:
            notes.append(f"Parameters of {observation.source.tool}: {json.dumps(diagnostics['parameters'])}")
        elif 'registered_tools' in diagnostics:
            notes.append(f"Registered tools: {', '.join(diagnostics['registered_tools'])}")

    state = log.coverage(intent)
    seqs = _step_seqs(observation)
    unresolved = state.unresolved_contradictions()
    for contradiction in unresolved:
        if contradiction.second.seq in seqs or contradiction.first.seq in seqs:
            notes.append(contradiction.render())

    if state.gaps:
        missing = ', '.join(intent.predicate(name).describe() for name in state.gaps)
        notes.append(f'Evidence still missing for: {missing}.')
    elif unresolved:
        notes.append('All required predicates are covered, but contradictions remain unresolved.')
    else:
        notes.append(SUFFICIENT)
    return notes


def llm_review(step, log, intent, backend):
    try:
        reply = complete(backend, render_critic_prompt(step, log, intent)).strip()
    except LLMError as exc:
        logger.warning('Critic model call failed, keeping the deterministic review only: %s', exc)
        return None
    return reply or None


def critic_review(step, log, intent, backend=None, use_llm=None):
    """Feedback text for an executed step."""
    notes = deterministic_review(step, log, intent)
    use_llm = settings.TSAGENT['CRITIC_USE_LLM'] if use_llm is None else use_llm
    if backend is not None and use_llm and step.observation is not None:
        critique = llm_review(step, log, intent, backend)
        if critique:
            notes.append(f'Critic: {critique}')
    return '\n'.join(notes)
