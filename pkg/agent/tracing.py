"""
Trace documents: the JSON form of an AgentResult.

Schema (version 1):

    {"schema_version": 1,
     "question": str,
     "intent": {"task", "schema", "required"},
     "outcome": "answer" | "failure",
     "answer": str | null,
     "reasons": [GateReason],
     "gate_rounds": int, "llm_calls": int, "steps_used": int, "budget": int,
     "steps": [Step],
     "log": {"roots": [str], "entries": [{"observation", "bindings"}]},
     "gate_decisions": [GateDecision]}

Documents hold no timestamps, so the same run always serializes to the
same bytes.
"""
import json
from pathlib import Path

from agent.exceptions import TraceFormatError
from agent.state import ANSWER, AgentResult, EvidenceLog, ReasoningTrace, Step, reasons_from_list
from oversight.gate import GateDecision
from oversight.intents import QuestionIntent

SCHEMA_VERSION = 1


def serialize_trace(result):
    return {
        'schema_version': SCHEMA_VERSION,
        'question': result.trace.question,
        'intent': result.intent.to_dict(),
        'outcome': result.outcome,
        'answer': result.answer,
        'reasons': [reason.to_dict() for reason in result.reasons],
        'gate_rounds': result.gate_rounds,
        'llm_calls': result.llm_calls,
        'steps_used': result.steps_used,
        'budget': result.budget,
        'steps': [step.to_dict() for step in result.trace.steps],
        'log': {'roots': list(result.log.roots), 'entries': result.log.to_list()},
        'gate_decisions': [decision.to_dict() for decision in result.gate_decisions],
    }


def dumps_trace(result):
    return json.dumps(serialize_trace(result), sort_keys=True, indent=2, ensure_ascii=False)


def write_trace(result, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps_trace(result) + '\n', encoding='utf-8')
    return path


def load_trace(document):
    """AgentResult from a trace document (dict, JSON text or file path)."""
    if isinstance(document, Path) or (isinstance(document, str) and not document.lstrip().startswith('{')):
        document = Path(document).read_text(encoding='utf-8')
    if isinstance(document, str):
        try:
            document = json.loads(document)
        except ValueError as exc:
            raise TraceFormatError(f'the trace is not valid JSON: {exc}') from exc
    if document.get('schema_version') != SCHEMA_VERSION:
        raise TraceFormatError(
            f"unsupported trace schema version {document.get('schema_version')!r}; expected {SCHEMA_VERSION}"
        )
    try:
        intent = QuestionIntent.from_dict(document['intent'])
        trace = ReasoningTrace(document['question'])
        for item in document['steps']:
            trace.append(Step.from_dict(item))
        log = EvidenceLog.from_list(document['log']['entries'], intent=intent, roots=document['log']['roots'])
        return AgentResult(
            outcome=document['outcome'],
            answer=document.get('answer'),
            reasons=reasons_from_list(document.get('reasons', [])),
            trace=trace,
            log=log,
            intent=intent,
            gate_rounds=document['gate_rounds'],
            llm_calls=document.get('llm_calls', 0),
            gate_decisions=[GateDecision.from_dict(d) for d in document.get('gate_decisions', [])],
            budget=document.get('budget'),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise TraceFormatError(f'malformed trace document: {exc}') from exc


def check_grounding(document):
    """
    Structural audit of a trace document; returns the problems found.

    An accepted answer must come from a final step whose gate decision
    accepted it, with an empty gap set, and every predicate that decision
    calls covered must be bound by some log entry.
    """
    problems = []
    steps = document.get('steps', [])
    k_values = [step['k'] for step in steps]
    if k_values != list(range(1, len(steps) + 1)):
        problems.append(f'step numbers are not contiguous from 1: {k_values}')
    if document.get('outcome') != ANSWER:
        if not document.get('reasons'):
            problems.append('a failure carries no reasons')
        return problems

    final = steps[-1] if steps else None
    if not final or final.get('final_answer') != document.get('answer'):
        problems.append('the answer does not come from the last step')
        return problems
    gate = final.get('gate')
    if gate is None:
        problems.append('the accepted answer has no gate decision')
        return problems
    if gate['verdict'] != 'accept':
        problems.append(f"the last gate decision is {gate['verdict']}")
    if gate.get('gaps'):
        problems.append(f"accepted with open gaps {gate['gaps']}")

    bound = {
        binding['predicate']
        for entry in document.get('log', {}).get('entries', [])
        for binding in entry.get('bindings', [])
    }
    for predicate in gate.get('covered', {}):
        if predicate not in bound:
            problems.append(f'{predicate} is reported covered but no log entry binds it')
    required = {p['name'] for p in document['intent']['required']}
    missing = sorted(required - bound)
    if missing:
        problems.append(f'required predicates never bound: {missing}')
    if not gate.get('undecidable'):
        intent = QuestionIntent.from_dict(document['intent'])
        violation = intent.schema.check(document.get('answer'))
        if violation:
            problems.append(f'the answer violates the schema: {violation}')
    return problems


def render_trace(result):
    """Human-readable form of a run: header, one block per step, outcome."""
    from llm.prompts import format_step

    lines = [
        f'Question: {result.trace.question}',
        f'Intent: {result.intent.task} (answer schema: {result.intent.schema.describe()})',
        f"Required: {', '.join(p.name for p in result.intent.required)}",
        '',
    ]
    for step in result.trace.steps:
        lines.append(f'--- Step {step.k} ---')
        lines.append(format_step(step))
        if step.diagnostic:
            lines.append(f'Malformed: {step.diagnostic}')
        if step.gate is not None:
            lines.append(f'Gate: {step.gate.verdict}')
        lines.append('')
    if result.succeeded:
        lines.append(f'Answer: {result.answer}')
    else:
        lines.append(f'Agent failure: {result.render_reasons()}')
    lines.append(
        f'{result.steps_used} step(s) of {result.budget}, '
        f'{result.gate_rounds} gate round(s), {result.llm_calls} LLM call(s)'
    )
    return '\n'.join(lines)
