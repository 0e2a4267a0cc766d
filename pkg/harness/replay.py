"""
Replay of the solar-panel case study against a scripted fixture.

The run is checked in five stages, in order:

1. the first step passes both panels to anomaly_classifier and fails with
   "x must be 1-D";
2. the feedback on that step shows the tool's correct usage and parameters;
3. per-panel anomaly calls succeed and flag only a few positions;
4. both panels are segmented into four weeks with a mean per week, and the
   low weeks are the cloudy ones;
5. the accepted answer follows the question's template and names the
   right weeks.
"""
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

from agent.services import run_agent
from harness.generators import CLOUDY_RATIO, WEEKS, case_study_question
from harness.scoring import score_answer
from llm.backends import BackendConfig

logger = logging.getLogger(__name__)

FIXTURE_PATH = Path(__file__).resolve().parent / 'fixtures' / 'cloudy_case_study.json'
SPARSE_FRACTION = 0.05
PREMATURE_ANSWER = (
    'Thought: Solar panel 2 has a spike, so it had the worse weather.\n'
    'Final Answer: The second panel was cloudier because of the anomaly at hour 388.'
)


@dataclass(frozen=True)
class StageResult:
    number: int
    name: str
    passed: bool
    detail: str = ''

    def to_dict(self):
        return {'number': self.number, 'name': self.name, 'passed': self.passed, 'detail': self.detail}


@dataclass
class ReplayReport:
    stages: list
    result: object = field(default=None, repr=False)

    @property
    def passed(self):
        return all(stage.passed for stage in self.stages)

    @property
    def failed_stage(self):
        return next((stage.number for stage in self.stages if not stage.passed), None)

    def render(self):
        lines = [f"Stage {s.number} {s.name}: {'ok' if s.passed else 'FAILED'}"
                 + (f' ({s.detail})' if s.detail else '') for s in self.stages]
        lines.append('Replay passed' if self.passed else f'Replay failed at stage {self.failed_stage}')
        return '\n'.join(lines)


def load_fixture_entries(path=None):
    data = json.loads(Path(path or FIXTURE_PATH).read_text(encoding='utf-8'))
    return list(data['entries'] if isinstance(data, dict) else data)


def with_premature_answer(entries):
    """The entries with an unformatted final answer played just before the formatted one."""
    entries = list(entries)
    return entries[:-1] + [PREMATURE_ANSWER] + entries[-1:]


def _tool_steps(result, tool):
    return [step for step in result.trace.steps if step.action is not None and step.action.tool == tool]


def _named(step):
    return step.action.args.get('name')


def stage_wrong_call(result, question):
    steps = result.trace.steps
    first = steps[0] if steps else None
    if first is None or first.action is None or first.action.tool != 'anomaly_classifier':
        return False, 'the first step is not an anomaly_classifier call'
    if first.observation is None or not first.observation.is_error:
        return False, 'the multi-series call did not fail'
    if 'x must be 1-D' not in first.observation.error:
        return False, f'unexpected error: {first.observation.error}'
    return True, ''


def stage_usage_feedback(result, question):
    feedback = result.trace.steps[0].feedback or ''
    missing = [text for text in ('The correct usage', 'Parameters of anomaly_classifier') if text not in feedback]
    if missing:
        return False, f"feedback lacks {', '.join(missing)}"
    return True, ''


def stage_sparse_anomalies(result, question):
    calls = [step for step in _tool_steps(result, 'anomaly_classifier') if not step.observation.is_error]
    checked = {_named(step) for step in calls}
    missing = [name for name in question.series_names if name not in checked]
    if missing:
        return False, f'no successful anomaly call on {", ".join(missing)}'
    for step in calls:
        flagged = len(step.observation.value)
        length = step.observation.diagnostics['length']
        if flagged >= SPARSE_FRACTION * length:
            return False, f'{_named(step)}: {flagged} of {length} positions flagged'
    return True, ''


def stage_weekly_segments(result, question):
    expected = question.provenance['params']
    truth = {question.series_names[0]: expected['first_weeks'], question.series_names[1]: expected['second_weeks']}
    steps = {_named(step): step for step in _tool_steps(result, 'segment_series') if not step.observation.is_error}
    for name in question.series_names:
        step = steps.get(name)
        if step is None:
            return False, f'{name} was not segmented'
        means = [segment.get('mean') for segment in step.observation.value]
        if len(means) != WEEKS or any(mean is None for mean in means):
            return False, f'{name}: expected {WEEKS} segments with a mean, got {len(means)}'
        low = [week for week, mean in enumerate(means) if mean < CLOUDY_RATIO * max(means)]
        if low != truth[name]:
            return False, f'{name}: low weeks {low}, expected {truth[name]}'
    return True, ''


def stage_formatted_answer(result, question):
    if not result.succeeded:
        return False, f'the run failed: {result.render_reasons()}'
    violation = result.intent.schema.check(result.answer)
    if violation:
        return False, violation
    if not score_answer(question, result.answer, intent=result.intent):
        return False, 'the answer names the wrong weeks'
    return True, ''


STAGES = (
    ('wrong multi-series call', stage_wrong_call),
    ('usage feedback', stage_usage_feedback),
    ('sparse per-series anomalies', stage_sparse_anomalies),
    ('weekly segmentation', stage_weekly_segments),
    ('formatted answer', stage_formatted_answer),
)


def replay_case_study(fixture=None, gate_enabled=True, premature_answer=False, budget=None):
    """
    Run the case study and check its stages; checking stops at the first
    failed stage.
    """
    question = case_study_question()
    entries = load_fixture_entries(fixture)
    if premature_answer:
        entries = with_premature_answer(entries)
    backend = BackendConfig.from_data({'kind': 'scripted', 'entries': entries})
    result = run_agent(
        question.question,
        question.build_store(),
        backend,
        budget=budget,
        critic_llm=True,
        gate_enabled=gate_enabled,
    )
    stages = []
    for number, (name, check) in enumerate(STAGES, start=1):
        passed, detail = check(result, question)
        stages.append(StageResult(number, name, passed, detail))
        if not passed:
            logger.warning('Case study replay failed at stage %d (%s): %s', number, name, detail)
            break
    return ReplayReport(stages=stages, result=result)
