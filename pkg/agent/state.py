"""
Run state: steps, the reasoning trace, the evidence log and the result.
"""
from dataclasses import dataclass, field

from oversight.gate import GateDecision, GateReason
from oversight.intents import QuestionIntent
from oversight.predicates import Binding, CoverageState, bind_predicates, extract_bindings
from toolkit.registry import Observation, ToolCall

ANSWER = 'answer'
FAILURE = 'failure'


@dataclass
class Step:
    """
    One Thought/Action/Observation/Feedback cycle.

    A final-answer step has no action; a malformed step has neither action
    nor final answer and carries the parser diagnostic.
    """

    k: int
    thought: str = ''
    action: ToolCall = None
    action_input: str = ''
    observation: Observation = None
    feedback: str = None
    final_answer: str = None
    gate: GateDecision = None
    diagnostic: str = None

    def to_dict(self):
        return {
            'k': self.k,
            'thought': self.thought,
            'action': self.action.to_dict() if self.action else None,
            'action_input': self.action_input,
            'observation': self.observation.to_dict() if self.observation else None,
            'feedback': self.feedback,
            'final_answer': self.final_answer,
            'gate': self.gate.to_dict() if self.gate else None,
            'diagnostic': self.diagnostic,
        }

    @classmethod
    def from_dict(cls, data):
        return cls(
            k=data['k'],
            thought=data.get('thought', ''),
            action=ToolCall.from_dict(data['action']) if data.get('action') else None,
            action_input=data.get('action_input', ''),
            observation=Observation.from_dict(data['observation']) if data.get('observation') else None,
            feedback=data.get('feedback'),
            final_answer=data.get('final_answer'),
            gate=GateDecision.from_dict(data['gate']) if data.get('gate') else None,
            diagnostic=data.get('diagnostic'),
        )


@dataclass
class ReasoningTrace:
    question: str
    steps: list = field(default_factory=list)

    def next_k(self):
        return len(self.steps) + 1

    def append(self, step):
        if step.k != self.next_k():
            raise ValueError(f'step {step.k} does not follow step {len(self.steps)}')
        self.steps.append(step)
        return step

    def __len__(self):
        return len(self.steps)


@dataclass(frozen=True)
class LogEntry:
    observation: Observation
    bindings: tuple = ()

    def to_dict(self):
        return {
            'observation': self.observation.to_dict(),
            'bindings': [binding.to_dict() for binding in self.bindings],
        }


def _flatten(observation):
    """Sub-calls of a pipeline come before the pipeline's own observation."""
    entries = []
    for child in observation.children:
        entries.extend(_flatten(child))
    entries.append(observation)
    return entries


class EvidenceLog:
    """
    Append-only record of every observation of a run.

    Each entry keeps the predicate bindings it produced for the run's intent.
    """

    def __init__(self, intent=None, roots=()):
        self.intent = intent
        self.roots = tuple(roots)
        self._entries = []

    def __iter__(self):
        return iter(tuple(self._entries))

    def __len__(self):
        return len(self._entries)

    @property
    def entries(self):
        return tuple(self._entries)

    def append(self, observation):
        """Log an observation (and its pipeline children); returns the new entries."""
        added = []
        for item in _flatten(observation):
            bindings = extract_bindings(item, self.intent, self.roots) if self.intent else ()
            entry = LogEntry(observation=item, bindings=bindings)
            self._entries.append(entry)
            added.append(entry)
        return added

    def coverage(self, intent=None):
        intent = intent or self.intent
        if intent is self.intent:
            bindings = [b for entry in self._entries for b in entry.bindings]
            return CoverageState.initial(intent, self.roots).with_bindings(bindings)
        state = CoverageState.initial(intent, self.roots)
        for entry in self._entries:
            state = bind_predicates(entry.observation, intent, state)
        return state

    def fingerprints(self):
        return [entry.observation.fingerprint() for entry in self._entries]

    def to_list(self):
        return [entry.to_dict() for entry in self._entries]

    @classmethod
    def from_list(cls, data, intent=None, roots=()):
        log = cls(intent=intent, roots=roots)
        for item in data:
            log._entries.append(LogEntry(
                observation=Observation.from_dict(item['observation']),
                bindings=tuple(Binding.from_dict(b) for b in item.get('bindings', [])),
            ))
        return log


@dataclass
class AgentResult:
    outcome: str
    trace: ReasoningTrace
    log: EvidenceLog
    intent: QuestionIntent
    answer: str = None
    reasons: tuple = ()
    gate_rounds: int = 0
    llm_calls: int = 0
    gate_decisions: list = field(default_factory=list)
    budget: int = None

    @property
    def succeeded(self):
        return self.outcome == ANSWER

    @property
    def steps_used(self):
        return len(self.trace)

    def render_reasons(self):
        return '; '.join(reason.render() for reason in self.reasons)


def reasons_from_list(data):
    return tuple(GateReason.from_dict(item) for item in data)
