"""
Prompt rendering for the reasoner, the critic and pipeline synthesis.

Templates live in prompt_templates/ and are filled by plain slot
replacement, so any braces in tool descriptions pass through untouched.
"""
import json
from functools import lru_cache
from pathlib import Path

from agent.rendering import render_observation
from llm.backends import ChatMessage

TEMPLATE_DIR = Path(__file__).resolve().parent / 'prompt_templates'

EMPTY = '(empty)'
NONE = '(none)'


@lru_cache(maxsize=None)
def load_template(name):
    return (TEMPLATE_DIR / f'{name}.txt').read_text(encoding='utf-8').rstrip('\n')


def fill(template, **slots):
    for key, value in slots.items():
        template = template.replace('{' + key + '}', value)
    return template


def render_tool_descs(catalog):
    """One compact JSON object per tool, in registry order."""
    return '\n'.join(json.dumps(entry, ensure_ascii=False) for entry in catalog)


def format_action(step):
    lines = [f'Thought: {step.thought}']
    if step.action is not None:
        lines.append(f'Action: {step.action.tool}')
        lines.append(f'Action Input: {step.action_input}')
    elif step.final_answer is not None:
        lines.append(f'Final Answer: {step.final_answer}')
    return lines


def format_step(step):
    """The Thought/Action/Action Input/Observation/Feedback block of one trace step."""
    lines = format_action(step)
    if step.observation is not None:
        lines.append(f'Observation: {render_observation(step.observation)}')
    if step.feedback:
        lines.append(f'Feedback: {step.feedback}')
    return '\n'.join(lines)


def render_reasoner_prompt(catalog, question, trace):
    text = fill(
        load_template('reasoner'),
        tool_descs=render_tool_descs(catalog),
        tool_names=', '.join(entry['name'] for entry in catalog),
        query=question,
    )
    blocks = [format_step(step) for step in trace.steps]
    if blocks:
        text = '\n\n'.join([text] + blocks)
    return [ChatMessage('user', text)]


def render_log(log):
    if not len(log):
        return EMPTY
    lines = []
    for entry in log:
        observation = entry.observation
        args = json.dumps(observation.source.args, sort_keys=True, ensure_ascii=False)
        lines.append(f'[{observation.seq}] {observation.source.tool} {args} -> {render_observation(observation)}')
    return '\n'.join(lines)


def render_critic_prompt(step, log, intent):
    gaps = log.coverage(intent).gaps
    body = '\n'.join([
        f'Question intent: {intent.task} (answer schema: {intent.schema.describe()})',
        f'Required predicates: {", ".join(p.name for p in intent.required) or NONE}',
        f'Gap set: {", ".join(gaps) if gaps else NONE}',
        'Current step:',
        '\n'.join(format_action(step)),
        f'Current observation: {render_observation(step.observation) if step.observation else NONE}',
        'Evidence log:',
        render_log(log),
    ])
    return [ChatMessage('system', load_template('critic')), ChatMessage('user', body)]


def render_pipeline_prompt(catalog, request):
    text = fill(load_template('pipeline'), tool_descs=render_tool_descs(catalog), request=request)
    return [ChatMessage('user', text)]
