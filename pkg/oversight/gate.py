"""
Final quality gate.

An answer is accepted when it fits the intent's answer schema, every
required predicate is covered by the evidence log and no contradiction in
the log is left unresolved. Rejections carry typed reasons that the agent
feeds back to the reasoner.
"""
import logging
from dataclasses import dataclass, field

from oversight.intents import UNDECIDABLE

logger = logging.getLogger(__name__)

ACCEPT = 'accept'
REJECT = 'reject'

MISSING_PREDICATE = 'missing_predicate'
SCHEMA_VIOLATION = 'schema_violation'
CONTRADICTION = 'contradiction'
MALFORMED_OUTPUT = 'malformed_output'
NO_ANSWER = 'no_answer'

REASON_TYPES = (MISSING_PREDICATE, SCHEMA_VIOLATION, CONTRADICTION, MALFORMED_OUTPUT, NO_ANSWER)


@dataclass(frozen=True)
class GateReason:
    type: str
    predicate: str = None
    detail: str = ''
    entries: tuple = ()

    def render(self):
        if self.type == MISSING_PREDICATE:
            return f'missing evidence for {self.predicate}' + (f' ({self.detail})' if self.detail else '')
        if self.type == CONTRADICTION:
            first, second = self.entries
            return f'unresolved contradiction on {self.predicate} between entries {first} and {second}: {self.detail}'
        if self.type == SCHEMA_VIOLATION:
            return f'schema violation: {self.detail}'
        if self.type == MALFORMED_OUTPUT:
            return f'malformed output: {self.detail}'
        return f'no answer: {self.detail}'

    def to_dict(self):
        return {'type': self.type, 'predicate': self.predicate, 'detail': self.detail, 'entries': list(self.entries)}

    @classmethod
    def from_dict(cls, data):
        return cls(
            type=data['type'],
            predicate=data.get('predicate'),
            detail=data.get('detail', ''),
            entries=tuple(data.get('entries') or ()),
        )


@dataclass(frozen=True)
class GateDecision:
    verdict: str
    reasons: tuple = ()
    covered: dict = field(default_factory=dict)
    gaps: tuple = ()
    undecidable: bool = False

    @property
    def accepted(self):
        return self.verdict == ACCEPT

    def feedback(self):
        return 'The final answer was rejected: ' + '; '.join(reason.render() for reason in self.reasons) + '.'

    def to_dict(self):
        return {
            'verdict': self.verdict,
            'reasons': [reason.to_dict() for reason in self.reasons],
            'covered': self.covered,
            'gaps': list(self.gaps),
            'undecidable': self.undecidable,
        }

    @classmethod
    def from_dict(cls, data):
        return cls(
            verdict=data['verdict'],
            reasons=tuple(GateReason.from_dict(r) for r in data.get('reasons', [])),
            covered=dict(data.get('covered') or {}),
            gaps=tuple(data.get('gaps') or ()),
            undecidable=data.get('undecidable', False),
        )


def _evidence_reasons(state, intent):
    reasons = []
    for name in state.gaps:
        predicate = intent.predicate(name)
        reasons.append(GateReason(MISSING_PREDICATE, predicate=name, detail=predicate.describe()))
    for contradiction in state.unresolved_contradictions():
        reasons.append(GateReason(
            CONTRADICTION,
            predicate=contradiction.predicate,
            detail=f'{contradiction.first.value!r} vs {contradiction.second.value!r}',
            entries=(contradiction.first.seq, contradiction.second.seq),
        ))
    return reasons


def evidence_reasons(log, intent):
    """Missing-predicate and contradiction reasons for the log as it stands."""
    return _evidence_reasons(log.coverage(intent), intent)


def is_undecidable(answer):
    return (answer or '').strip().strip('|').strip().rstrip('.').upper() == UNDECIDABLE


def quality_gate(question, log, intent, answer):
    state = log.coverage(intent)
    undecidable = is_undecidable(answer)
    reasons = []
    if undecidable:
        reasons.extend(_evidence_reasons(state, intent)[:len(state.gaps)])
        if not state.unresolved_contradictions():
            reasons.append(GateReason(
                SCHEMA_VIOLATION,
                detail=f'{UNDECIDABLE} is only accepted while a logged contradiction stays unresolved',
            ))
    else:
        violation = intent.schema.check(answer)
        if violation:
            reasons.append(GateReason(SCHEMA_VIOLATION, detail=violation))
        reasons.extend(_evidence_reasons(state, intent))

    decision = GateDecision(
        verdict=REJECT if reasons else ACCEPT,
        reasons=tuple(reasons),
        covered=state.covered,
        gaps=state.gaps,
        undecidable=undecidable,
    )
    logger.info('Gate %s for %s (%d reason(s))', decision.verdict, intent.task, len(reasons))
    return decision
