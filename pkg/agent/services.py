"""
The think-act-observe loop.

Each turn the reasoner sees the tool catalog, the question and the trace
so far. Tool calls are dispatched through the run's registry, logged and
reviewed by the critic; final answers go through the quality gate, and a
rejection is fed back as the step's feedback so the run continues with the
evidence it already has.
"""
import logging

from django.conf import settings

from agent.exceptions import AgentError, AgentTransportError
from agent.state import ANSWER, FAILURE, AgentResult, EvidenceLog, ReasoningTrace, Step
from llm.backends import LLMBackend, build_backend
from llm.exceptions import LLMError
from llm.parsing import FINAL_ANSWER, parse_turn
from llm.prompts import render_reasoner_prompt
from oversight.critic import critic_review
from oversight.gate import MALFORMED_OUTPUT, MISSING_PREDICATE, NO_ANSWER, GateReason, evidence_reasons, quality_gate
from oversight.intents import detect_question_intents
from toolkit.registry import ToolCall
from toolkit.tools import build_registry

logger = logging.getLogger(__name__)


class CountingBackend(LLMBackend):
    """Wraps a backend and counts the calls made through it."""

    def __init__(self, inner):
        self.inner = inner
        self.kind = inner.kind
        self.calls = 0

    def complete(self, messages):
        self.calls += 1
        return self.inner.complete(messages)


class StepAllowance(LLMBackend):
    """
    The backend handle tools get for one step.

    Calls go through the run's counting backend, so they count towards the
    run's total, and at most `limit` of them are allowed.
    """

    def __init__(self, inner, limit=1):
        self.inner = inner
        self.kind = inner.kind
        self.limit = limit
        self.calls = 0

    def complete(self, messages):
        if self.calls >= self.limit:
            raise LLMError(f'tools may make at most {self.limit} LLM call(s) per step')
        self.calls += 1
        return self.inner.complete(messages)


class AgentRunner:
    """
    One agent run over a private fork of the store and registry.

    Tools registered during the run (custom pipelines) and derived series
    stay inside the run.
    """

    def __init__(self, question, store, backend, budget=None, registry=None, critic_llm=None,
                 gate_enabled=True, rules=None):
        options = settings.TSAGENT
        self.question = question
        self.budget = options['DEFAULT_BUDGET'] if budget is None else budget
        if self.budget < 1:
            raise AgentError(f'the step budget must be at least 1, got {self.budget}')
        if not question or not question.strip():
            raise AgentError('the question is empty')
        if not len(store):
            raise AgentError('the series store is empty')
        self.store = store.fork()
        self.registry = (registry or build_registry()).fork()
        try:
            self.backend = CountingBackend(build_backend(backend))
        except LLMError as exc:
            raise AgentTransportError(str(exc)) from exc
        self.critic_llm = options['CRITIC_USE_LLM'] if critic_llm is None else critic_llm
        self.gate_enabled = gate_enabled
        self.malformed_limit = options['MALFORMED_TURN_LIMIT']
        self.intent = detect_question_intents(question, rules)
        self.trace = ReasoningTrace(question)
        self.log = EvidenceLog(self.intent, self.store.roots())
        self.gate_rounds = 0
        self.gate_decisions = []

    def _result(self, outcome, answer=None, reasons=()):
        logger.info(
            'Run finished: %s after %d step(s), %d gate round(s), %d LLM call(s)',
            outcome, len(self.trace), self.gate_rounds, self.backend.calls,
        )
        return AgentResult(
            outcome=outcome,
            answer=answer,
            reasons=tuple(reasons),
            trace=self.trace,
            log=self.log,
            intent=self.intent,
            gate_rounds=self.gate_rounds,
            llm_calls=self.backend.calls,
            gate_decisions=self.gate_decisions,
            budget=self.budget,
        )

    def _think(self):
        messages = render_reasoner_prompt(self.registry.catalog(), self.question, self.trace)
        try:
            return self.backend.complete(messages)
        except LLMError as exc:
            logger.error('Reasoner backend failed: %s', exc)
            raise AgentTransportError(str(exc)) from exc

    def execute_step(self, turn, k):
        """
        Dispatch the turn's action, log the observation and attach the critic's feedback.

        A step makes at most one LLM call besides the reasoner's: a tool that
        used the model (pipeline synthesis) leaves the critic to its
        deterministic checks.
        """
        draft = turn.action
        args = self.registry.bind_arguments(draft.tool, draft.arguments, self.store.names())
        call = ToolCall(draft.tool, args)
        allowance = StepAllowance(self.backend)
        observation = self.registry.dispatch(call, self.store, allowance)
        self.log.append(observation)
        step = Step(k=k, thought=turn.thought, action=call, action_input=draft.action_input, observation=observation)
        critic_llm = self.critic_llm and not allowance.calls
        step.feedback = critic_review(
            step, self.log, self.intent,
            backend=self.backend if critic_llm else None,
            use_llm=critic_llm,
        )
        return step

    def _answer(self, turn, k):
        step = Step(k=k, thought=turn.thought, final_answer=turn.final_answer)
        if not self.gate_enabled:
            self.trace.append(step)
            return self._result(ANSWER, answer=turn.final_answer)
        decision = quality_gate(self.question, self.log, self.intent, turn.final_answer)
        self.gate_rounds += 1
        self.gate_decisions.append(decision)
        step.gate = decision
        if decision.accepted:
            self.trace.append(step)
            return self._result(ANSWER, answer=turn.final_answer)
        step.feedback = decision.feedback()
        self.trace.append(step)
        return None

    def run(self):
        streak = 0
        last_rejection = None
        logger.info('Run started: intent %s, budget %d', self.intent.task, self.budget)
        for k in range(1, self.budget + 1):
            turn = parse_turn(self._think())

            if turn.is_malformed:
                streak += 1
                step = Step(k=k, thought=turn.thought, diagnostic=turn.diagnostic)
                step.feedback = critic_review(step, self.log, self.intent)
                self.trace.append(step)
                if streak >= self.malformed_limit:
                    reasons = [GateReason(
                        MALFORMED_OUTPUT,
                        detail=f'{streak} malformed turns in a row, the last one: {turn.diagnostic}',
                    )]
                    reasons += [r for r in evidence_reasons(self.log, self.intent) if r.type == MISSING_PREDICATE]
                    return self._result(FAILURE, reasons=reasons)
                continue
            streak = 0

            if turn.variant == FINAL_ANSWER:
                result = self._answer(turn, k)
                if result is not None:
                    return result
                last_rejection = self.trace.steps[-1].gate
                continue

            self.trace.append(self.execute_step(turn, k))

        reasons = evidence_reasons(self.log, self.intent)
        if not reasons and last_rejection is not None:
            reasons = list(last_rejection.reasons)
        if not reasons:
            reasons = [GateReason(NO_ANSWER, detail=f'the step budget of {self.budget} ran out without an answer')]
        return self._result(FAILURE, reasons=reasons)


def run_agent(question, store, backend, budget=None, **options):
    """Run the agent on `question` over `store`; returns an AgentResult."""
    return AgentRunner(question, store, backend, budget=budget, **options).run()


def record_run(result, question=None, backend_kind='', user=None, error=''):
    """Store a finished run (or a run aborted by the backend when `result` is None) as an AgentRun."""
    from agent.models import AgentRun
    from agent.tracing import serialize_trace

    owner = user if user is not None and user.is_authenticated else None
    if result is None:
        return AgentRun.objects.create(
            question=question,
            status=AgentRun.Status.ERRORED,
            error=error,
            backend_kind=backend_kind,
            created_by=owner,
        )
    return AgentRun.objects.create(
        question=result.trace.question,
        intent_task=result.intent.task,
        status=AgentRun.Status.ANSWERED if result.succeeded else AgentRun.Status.FAILED,
        answer=result.answer or '',
        reasons=[reason.to_dict() for reason in result.reasons],
        gate_rounds=result.gate_rounds,
        steps_used=result.steps_used,
        budget=result.budget,
        backend_kind=backend_kind,
        trace=serialize_trace(result),
        created_by=owner,
    )
