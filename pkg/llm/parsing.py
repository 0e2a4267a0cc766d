"""
Parser for ReAct-formatted model output.

A turn is either an action (Thought, Action, Action Input), a final answer
(anything containing "Final Answer:") or malformed. Markers may share a
line, as in "Action: slice_series, Action Input: {a, 0, 10}".
"""
import json
import re
from dataclasses import dataclass, field

FINAL_MARKER = re.compile(r'Final\s+Answer\s*:', re.IGNORECASE)
THOUGHT_MARKER = re.compile(r'Thought\s*:', re.IGNORECASE)
ACTION_MARKER = re.compile(r'Action\s*:', re.IGNORECASE)
INPUT_MARKER = re.compile(r'Action\s+Input\s*:', re.IGNORECASE)
# A model sometimes goes on to invent its own observation.
STOP_MARKER = re.compile(r'\n?\s*(Observation|Feedback)\s*:', re.IGNORECASE)

ACTION = 'action'
FINAL_ANSWER = 'final_answer'
MALFORMED = 'malformed'


@dataclass(frozen=True)
class ActionDraft:
    tool: str
    action_input: str
    arguments: object = field(default=None, compare=False)


@dataclass(frozen=True)
class ParsedTurn:
    variant: str
    thought: str = ''
    action: ActionDraft = None
    final_answer: str = None
    diagnostic: str = None
    raw: str = field(default='', compare=False)

    @property
    def is_malformed(self):
        return self.variant == MALFORMED


def _clean(text):
    return text.strip().strip('`').strip()


def _strip_quotes(text):
    text = text.strip()
    if len(text) >= 2 and text[0] == text[-1] and text[0] in '\'"':
        return text[1:-1]
    return text


def _split_top_level(text):
    """Split on commas that are not inside quotes or brackets."""
    parts, depth, quote, current = [], 0, None, []
    for char in text:
        if quote:
            current.append(char)
            if char == quote:
                quote = None
            continue
        if char in '\'"':
            quote = char
        elif char in '[({':
            depth += 1
        elif char in '])}':
            depth -= 1
        elif char == ',' and depth == 0:
            parts.append(''.join(current))
            current = []
            continue
        current.append(char)
    parts.append(''.join(current))
    return [part.strip() for part in parts if part.strip()]


def _scalar(text):
    text = _strip_quotes(text)
    try:
        return json.loads(text)
    except ValueError:
        return text


def parse_action_input(text):
    """
    JSON object or list as is; otherwise a brace/bracket wrapped or bare
    comma list of positional values ("key=value" items make it a dict).
    """
    text = _clean(text)
    if re.match(r"json\s*[\[{]", text):
        text = text[4:].strip()
    try:
        value = json.loads(text)
    except ValueError:
        value = None
    if isinstance(value, (dict, list)):
        return value
    if text[:1] in '{[(' and text[-1:] in '}])':
        text = text[1:-1]
    items = _split_top_level(text)
    if items and all(re.match(r'^[A-Za-z_]\w*\s*=', item) for item in items):
        return {
            key.strip(): _scalar(value)
            for key, value in (item.split('=', 1) for item in items)
        }
    return [_scalar(item) for item in items]


def _malformed(text, thought, reason):
    return ParsedTurn(variant=MALFORMED, thought=thought, diagnostic=reason, raw=text)


def parse_turn(text):
    text = text or ''
    final = FINAL_MARKER.search(text)
    thought_match = THOUGHT_MARKER.search(text)

    if final:
        thought = ''
        if thought_match and thought_match.start() < final.start():
            thought = text[thought_match.end():final.start()].strip()
        answer = text[final.end():].strip()
        if not answer:
            return _malformed(text, thought, 'empty Final Answer:')
        return ParsedTurn(variant=FINAL_ANSWER, thought=thought, final_answer=answer, raw=text)

    if not thought_match:
        return _malformed(text, '', 'missing Thought:')
    action_match = ACTION_MARKER.search(text, thought_match.end())
    if not action_match:
        return _malformed(text, text[thought_match.end():].strip(), 'missing Action:')
    thought = text[thought_match.end():action_match.start()].strip()
    input_match = INPUT_MARKER.search(text, action_match.end())
    if not input_match:
        return _malformed(text, thought, 'missing Action Input:')

    tool = text[action_match.end():input_match.start()].strip().strip('`').rstrip(',;').strip()
    if not tool or not re.fullmatch(r'[A-Za-z_][A-Za-z0-9_]*', tool):
        return _malformed(text, thought, f'Action must name one tool, got {tool!r}')
    action_input = text[input_match.end():]
    stop = STOP_MARKER.search(action_input)
    if stop:
        action_input = action_input[:stop.start()]
    action_input = action_input.strip()
    return ParsedTurn(
        variant=ACTION,
        thought=thought,
        action=ActionDraft(tool=tool, action_input=action_input, arguments=parse_action_input(action_input)),
        raw=text,
    )


def format_turn(turn):
    """Inverse of parse_turn for well-formed turns."""
    if turn.variant == FINAL_ANSWER:
        prefix = f'Thought: {turn.thought}\n' if turn.thought else ''
        return f'{prefix}Final Answer: {turn.final_answer}'
    if turn.variant == ACTION:
        return (
            f'Thought: {turn.thought}\n'
            f'Action: {turn.action.tool}\n'
            f'Action Input: {turn.action.action_input}'
        )
    return turn.raw
