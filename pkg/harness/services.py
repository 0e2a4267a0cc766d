"""
Benchmark runs: every question goes through a fresh agent run, its answer
is scored against the reference and its trace written out; the report
aggregates accuracy per category.
"""
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

from django.conf import settings

from agent.exceptions import AgentError, AgentTransportError
from agent.services import run_agent
from agent.tracing import check_grounding, serialize_trace, write_trace
from harness.exceptions import DatasetError, HarnessError
from harness.policies import policy_backend
from harness.scoring import score_answer
from oversight.gate import REJECT

logger = logging.getLogger(__name__)

OUTCOME_ANSWER = 'answer'
OUTCOME_FAILURE = 'failure'
OUTCOME_ERRORED = 'errored'


@dataclass
class QuestionRecord:
    id: str
    category: str
    outcome: str
    truth: str
    answer: str = None
    correct: bool = False
    gate_rounds: int = 0
    steps_used: int = 0
    first_verdict: str = None
    reasons: list = field(default_factory=list)
    error: str = ''
    trace_file: str = None
    grounding: list = field(default_factory=list)

    def to_dict(self):
        return asdict(self)


@dataclass
class BenchReport:
    records: list
    label: str = ''

    @property
    def n_questions(self):
        return len(self.records)

    @property
    def accuracy(self):
        if not self.records:
            return 0.0
        return sum(record.correct for record in self.records) / len(self.records)

    def by_category(self):
        table = {}
        for record in self.records:
            row = table.setdefault(record.category, {'n': 0, 'correct': 0, 'errored': 0})
            row['n'] += 1
            row['correct'] += int(record.correct)
            row['errored'] += int(record.outcome == OUTCOME_ERRORED)
        for row in table.values():
            row['accuracy'] = row['correct'] / row['n']
        return dict(sorted(table.items()))

    def first_proposals(self):
        """How the first proposed answer of each gated question fared."""
        verdicts = [record.first_verdict for record in self.records if record.first_verdict]
        return {
            'proposed': len(verdicts),
            'rejected': sum(verdict == REJECT for verdict in verdicts),
        }

    def to_dict(self):
        return {
            'label': self.label,
            'n_questions': self.n_questions,
            'accuracy': self.accuracy,
            'categories': self.by_category(),
            'first_proposals': self.first_proposals(),
            'questions': [record.to_dict() for record in self.records],
        }

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    def render_table(self):
        """One column per category plus Overall; accuracy as a percentage."""
        categories = self.by_category()
        headers = list(categories) + ['Overall']
        cells = [f"{row['accuracy'] * 100:.1f}" for row in categories.values()]
        cells.append(f'{self.accuracy * 100:.1f}')
        counts = [str(row['n']) for row in categories.values()] + [str(self.n_questions)]
        widths = [max(len(h), len(c), len(n)) for h, c, n in zip(headers, cells, counts)]
        label = self.label or 'accuracy'
        first = max(len(label), len('n'))
        lines = [
            ' | '.join([''.ljust(first)] + [h.rjust(w) for h, w in zip(headers, widths)]),
            '-+-'.join(['-' * first] + ['-' * w for w in widths]),
            ' | '.join([label.ljust(first)] + [c.rjust(w) for c, w in zip(cells, widths)]),
            ' | '.join(['n'.ljust(first)] + [n.rjust(w) for n, w in zip(counts, widths)]),
        ]
        return '\n'.join(lines)

    def write(self, out_dir):
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / 'report.json').write_text(self.to_json() + '\n', encoding='utf-8')
        (out_dir / 'report.txt').write_text(self.render_table() + '\n', encoding='utf-8')
        return out_dir


def run_question(question, backend=None, policy=None, budget=None, out_dir=None, withhold_series=False,
                 critic_llm=None):
    """Run and score one question; backend errors are recorded, never raised."""
    record = QuestionRecord(id=question.id, category=question.category, outcome=OUTCOME_ERRORED,
                            truth=question.answer)
    try:
        store = question.build_store(withhold_series=withhold_series)
        config = policy_backend(policy, question) if policy else backend
        result = run_agent(question.question, store, config, budget=budget, critic_llm=critic_llm)
    except (AgentTransportError, AgentError, DatasetError) as exc:
        logger.warning('Question %s errored: %s', question.id, exc)
        record.error = str(exc)
        return record

    document = serialize_trace(result)
    record.outcome = OUTCOME_ANSWER if result.succeeded else OUTCOME_FAILURE
    record.answer = result.answer
    record.correct = result.succeeded and score_answer(question, result.answer, intent=result.intent)
    record.gate_rounds = result.gate_rounds
    record.steps_used = result.steps_used
    record.first_verdict = result.gate_decisions[0].verdict if result.gate_decisions else None
    record.reasons = [reason.to_dict() for reason in result.reasons]
    record.grounding = check_grounding(document)
    if out_dir is not None:
        path = write_trace(result, Path(out_dir) / 'traces' / f'{question.id}.json')
        record.trace_file = str(path)
    logger.debug('Question %s: %s (correct=%s)', question.id, record.outcome, record.correct)
    return record


def run_benchmark(questions, backend=None, policy=None, budget=None, parallelism=None, out_dir=None,
                  withhold_series=False, critic_llm=None, label=None):
    """
    Run every question and return a BenchReport in question order.

    Give either a backend configuration (shared settings, one fresh backend
    per question) or a policy name for scripted runs.
    """
    if (backend is None) == (policy is None):
        raise HarnessError('give exactly one of a backend or a policy')
    if backend is not None and not hasattr(backend, 'kind'):
        raise HarnessError(f'not a backend configuration: {backend!r}')
    if parallelism is None:
        scripted = policy is not None or backend.kind == 'scripted'
        parallelism = 1 if scripted else settings.TSAGENT['BENCH_PARALLELISM']
    parallelism = max(1, int(parallelism))

    def work(question):
        return run_question(
            question, backend=backend, policy=policy, budget=budget, out_dir=out_dir,
            withhold_series=withhold_series, critic_llm=critic_llm,
        )

    logger.info('Benchmark started: %d question(s), parallelism %d', len(questions), parallelism)
    if parallelism == 1:
        records = [work(question) for question in questions]
    else:
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            records = list(pool.map(work, questions))

    report = BenchReport(records=records, label=label or '')
    if out_dir is not None:
        report.write(out_dir)
    logger.info('Benchmark finished: accuracy %.3f over %d question(s)', report.accuracy, report.n_questions)
    return report


def record_benchmark(report, seed=None, user=None):
    """Store a report as a BenchmarkRun."""
    from harness.models import BenchmarkRun

    owner = user if user is not None and user.is_authenticated else None
    return BenchmarkRun.objects.create(
        label=report.label,
        seed=seed,
        accuracy=report.accuracy,
        n_questions=report.n_questions,
        report=report.to_dict(),
        created_by=owner,
    )
