import json
import tempfile
from pathlib import Path

import numpy as np
from django.conf import settings
from django.contrib.auth import get_user_model
from django.test import SimpleTestCase, TestCase
from rest_framework import status
from rest_framework.test import APITestCase

from agent.exceptions import AgentError, AgentTransportError, TraceFormatError
from agent.models import AgentRun
from agent.rendering import render_observation
from agent.services import AgentRunner, CountingBackend, StepAllowance, record_run, run_agent
from agent.state import ANSWER, FAILURE, ReasoningTrace, Step
from agent.tracing import check_grounding, dumps_trace, load_trace, render_trace, serialize_trace, write_trace
from llm.backends import BackendConfig, ScriptedBackend
from llm.exceptions import LLMError
from oversight.gate import MALFORMED_OUTPUT, MISSING_PREDICATE
from series.store import SeriesStore, TimeSeries
from toolkit.registry import Observation, ToolCall

QUESTION = 'Is series a trending upward? Answer with up, down or flat.'
CRITIC = {'match': {'contains': 'Current observation:'}, 'response': 'Sensible step.', 'repeat': True}
TREND_CALL = 'Thought: check the trend\nAction: trend_classifier\nAction Input: {"name": "a"}'
STATS_CALL = 'Thought: and the level\nAction: summary_stats\nAction Input: a'
ANSWER_UP = 'Thought: I now know the final answer\nFinal Answer: up'


def rising(length=60):
    t = np.arange(length, dtype=float)
    return 0.5 * t + np.sin(t)


def make_store(values=None):
    values = rising() if values is None else np.asarray(values, dtype=float)
    store = SeriesStore()
    store.add(TimeSeries(name='a', channels=('value',), index=np.arange(values.size), values=values.reshape(1, -1)))
    return store


def scripted(*entries):
    return BackendConfig.from_data({'kind': 'scripted', 'entries': list(entries)})


def payload(values=None):
    values = rising() if values is None else values
    return {'name': 'a', 'index': list(range(len(values))), 'channels': {'value': [float(v) for v in values]}}


class AgentRunnerTests(SimpleTestCase):
    def test_answer_after_two_tool_calls(self):
        result = run_agent(QUESTION, make_store(), scripted(TREND_CALL, STATS_CALL, ANSWER_UP), critic_llm=False)
        self.assertEqual(result.outcome, ANSWER)
        self.assertEqual(result.answer, 'up')
        self.assertEqual(len(result.trace), 3)
        self.assertEqual(result.gate_rounds, 1)
        self.assertEqual(result.llm_calls, 3)
        self.assertEqual(result.intent.task, 'trend_direction')
        self.assertEqual([step.action.tool for step in result.trace.steps[:2]], ['trend_classifier', 'summary_stats'])
        self.assertEqual(result.trace.steps[0].observation.value, 'up')
        self.assertTrue(result.trace.steps[2].gate.accepted)

    def test_critic_model_reviews_every_tool_step(self):
        result = run_agent(QUESTION, make_store(), scripted(CRITIC, TREND_CALL, STATS_CALL, ANSWER_UP),
                           critic_llm=True)
        self.assertEqual(result.llm_calls, 5)
        self.assertTrue(result.trace.steps[0].feedback.endswith('Critic: Sensible step.'))
        self.assertTrue(result.trace.steps[0].feedback.startswith(
            'All required predicates are covered; the evidence is sufficient to answer.'))

    def test_rejected_answer_then_evidence(self):
        result = run_agent(QUESTION, make_store(), scripted(ANSWER_UP, TREND_CALL, ANSWER_UP), critic_llm=False)
        self.assertEqual(result.outcome, ANSWER)
        self.assertEqual(result.gate_rounds, 2)
        first = result.trace.steps[0]
        self.assertFalse(first.gate.accepted)
        self.assertTrue(first.feedback.startswith(
            'The final answer was rejected: missing evidence for trend_direction'))
        self.assertEqual([d.verdict for d in result.gate_decisions], ['reject', 'accept'])

    def test_pipeline_synthesis_shares_the_step_allowance(self):
        document = {
            'name': 'smoothed_volatility',
            'description': 'Rolling mean of windowed volatility.',
            'parameters': [{'name': 'name', 'type': 'series'}],
            'steps': [
                {'tool': 'volatility', 'args': {'name': '$input', 'window': 5}},
                {'tool': 'rolling_stat', 'args': {'name': '$prev', 'stat': 'mean', 'window': 5}},
            ],
        }
        synthesis = {'match': {'contains': 'You build new analysis tools'}, 'response': json.dumps(document)}
        custom_call = ('Thought: build a smoother first\nAction: custom_operator\n'
                       'Action Input: {"prompt": "rolling mean of volatility"}')
        result = run_agent(QUESTION, make_store(), scripted(CRITIC, synthesis, custom_call, TREND_CALL, ANSWER_UP),
                           budget=3, critic_llm=True)
        self.assertEqual(result.outcome, ANSWER)
        self.assertEqual(result.trace.steps[0].observation.value['registered'], 'smoothed_volatility')
        self.assertNotIn('Critic:', result.trace.steps[0].feedback)
        self.assertTrue(result.trace.steps[1].feedback.endswith('Critic: Sensible step.'))
        self.assertEqual(result.llm_calls, 5)
        self.assertLessEqual(result.llm_calls, 2 * result.budget + result.gate_rounds)

    def test_step_allowance_caps_tool_calls(self):
        counting = CountingBackend(ScriptedBackend(['first', 'second']))
        allowance = StepAllowance(counting)
        self.assertEqual(allowance.complete([]), 'first')
        with self.assertRaisesMessage(LLMError, 'at most 1 LLM call(s) per step'):
            allowance.complete([])
        self.assertEqual(counting.calls, 1)

    def test_budget_of_one_reports_every_required_predicate(self):
        result = run_agent(QUESTION, make_store(), scripted(ANSWER_UP), budget=1, critic_llm=False)
        self.assertEqual(result.outcome, FAILURE)
        self.assertIsNone(result.answer)
        self.assertEqual([(r.type, r.predicate) for r in result.reasons], [(MISSING_PREDICATE, 'trend_direction')])

    def test_budget_runs_out_on_tool_calls(self):
        result = run_agent(QUESTION, make_store(), scripted(TREND_CALL, STATS_CALL), budget=2, critic_llm=False)
        self.assertEqual(result.outcome, FAILURE)
        self.assertEqual(result.reasons[0].type, 'no_answer')
        self.assertEqual(result.steps_used, 2)

    def test_malformed_turn_limit(self):
        result = run_agent(QUESTION, make_store(), scripted('I think', 'it is', 'going up'), critic_llm=False)
        self.assertEqual(result.outcome, FAILURE)
        self.assertEqual(len(result.trace), 3)
        self.assertEqual([r.type for r in result.reasons], [MALFORMED_OUTPUT, MISSING_PREDICATE])
        self.assertEqual(result.trace.steps[0].diagnostic, 'missing Thought:')
        self.assertTrue(result.trace.steps[0].feedback.startswith('Could not parse the last turn'))

    def test_malformed_streak_resets(self):
        result = run_agent(QUESTION, make_store(), scripted('x', 'y', TREND_CALL, 'z', ANSWER_UP), critic_llm=False)
        self.assertEqual(result.outcome, ANSWER)
        self.assertEqual(len(result.trace), 5)

    def test_bad_tool_call_is_an_error_observation(self):
        bad = 'Thought: try\nAction: frobnicate\nAction Input: a'
        result = run_agent(QUESTION, make_store(), scripted(bad, TREND_CALL, ANSWER_UP), critic_llm=False)
        first = result.trace.steps[0]
        self.assertTrue(first.observation.is_error)
        self.assertIn("unknown tool 'frobnicate'", first.feedback)
        self.assertIn('Registered tools: slice_series', first.feedback)
        self.assertEqual(result.outcome, ANSWER)

    def test_backend_failure_aborts_the_run(self):
        with self.assertRaises(AgentTransportError):
            run_agent(QUESTION, make_store(), scripted(TREND_CALL), critic_llm=False)

    def test_invalid_runs(self):
        with self.assertRaises(AgentError):
            AgentRunner(QUESTION, make_store(), scripted(ANSWER_UP), budget=0)
        with self.assertRaises(AgentError):
            AgentRunner('  ', make_store(), scripted(ANSWER_UP))
        with self.assertRaises(AgentError):
            AgentRunner(QUESTION, SeriesStore(), scripted(ANSWER_UP))

    def test_derived_series_stay_in_the_run(self):
        store = make_store()
        segment = 'Thought: split\nAction: segment_series\nAction Input: {a, 2}'
        result = run_agent(QUESTION, store, scripted(segment, TREND_CALL, ANSWER_UP), critic_llm=False)
        self.assertEqual(len(result.trace.steps[0].observation.value), 2)
        self.assertEqual(store.names(), ['a'])

    def test_same_fixture_same_trace(self):
        first = run_agent(QUESTION, make_store(), scripted(TREND_CALL, ANSWER_UP), critic_llm=False)
        second = run_agent(QUESTION, make_store(), scripted(TREND_CALL, ANSWER_UP), critic_llm=False)
        self.assertEqual(dumps_trace(first), dumps_trace(second))


class TraceTests(SimpleTestCase):
    def setUp(self):
        self.result = run_agent(QUESTION, make_store(), scripted(ANSWER_UP, TREND_CALL, ANSWER_UP), critic_llm=False)

    def test_round_trip(self):
        text = dumps_trace(self.result)
        self.assertEqual(dumps_trace(load_trace(text)), text)

    def test_file_round_trip(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = write_trace(self.result, Path(tmp) / 'nested' / 'run.json')
            loaded = load_trace(str(path))
        self.assertEqual(loaded.answer, 'up')
        self.assertEqual(loaded.gate_rounds, 2)

    def test_successful_run_is_grounded(self):
        self.assertEqual(check_grounding(serialize_trace(self.result)), [])

    def test_tampered_answer(self):
        document = serialize_trace(self.result)
        document['answer'] = 'down'
        self.assertEqual(check_grounding(document), ['the answer does not come from the last step'])

    def test_tampered_bindings(self):
        document = serialize_trace(self.result)
        for entry in document['log']['entries']:
            entry['bindings'] = []
        problems = check_grounding(document)
        self.assertIn('trend_direction is reported covered but no log entry binds it', problems)
        self.assertIn("required predicates never bound: ['trend_direction']", problems)

    def test_failure_needs_reasons(self):
        document = serialize_trace(run_agent(QUESTION, make_store(), scripted(ANSWER_UP), budget=1, critic_llm=False))
        self.assertEqual(check_grounding(document), [])
        document['reasons'] = []
        self.assertEqual(check_grounding(document), ['a failure carries no reasons'])

    def test_unknown_schema_version(self):
        document = serialize_trace(self.result)
        document['schema_version'] = 99
        with self.assertRaisesMessage(TraceFormatError, 'unsupported trace schema version 99'):
            load_trace(document)

    def test_render(self):
        text = render_trace(self.result)
        self.assertIn('--- Step 2 ---\nThought: check the trend\nAction: trend_classifier', text)
        self.assertIn('Gate: reject', text)
        self.assertIn('Answer: up', text)

    def test_step_numbers_must_follow(self):
        trace = ReasoningTrace(QUESTION)
        with self.assertRaises(ValueError):
            trace.append(Step(k=2))


class RenderObservationTests(SimpleTestCase):
    def obs(self, kind, value, **diagnostics):
        return Observation(kind=kind, value=value, source=ToolCall('t', {}), seq=1, diagnostics=diagnostics)

    def test_kinds(self):
        self.assertEqual(render_observation(self.obs('real', 0.123456789)), '0.123457')
        self.assertEqual(render_observation(self.obs('category', 'strong', period=24)), 'strong (period=24)')
        self.assertEqual(render_observation(self.obs('category', 'flat')), 'flat')
        self.assertEqual(
            render_observation(self.obs('index-set', [5], anomalies=[{'type': 'spike'}])), '[5] (types: spike)')
        self.assertEqual(render_observation(self.obs('record', {'p_value': 0.01, 'decision': 'yes'})),
                         'p_value=0.01, decision=yes')
        self.assertEqual(render_observation(self.obs('relation', [1, 2])), '[1, 2]')

    def test_error(self):
        error = Observation(kind='error', value=None, source=ToolCall('t', {}), seq=1, error='Error when calling t')
        self.assertEqual(render_observation(error), 'Error when calling t')

    def test_series_digest(self):
        digest = {'name': 'a#slice1', 'length': 3, 'mean': 2.0, 'std': 1.0, 'min': 1.0, 'max': 3.0,
                  'first': [1.0, 2.0, 3.0], 'last': [1.0, 2.0, 3.0]}
        self.assertEqual(
            render_observation(self.obs('series', digest)),
            'a#slice1: length=3, mean=2, std=1, min=1, max=3, first=[1, 2, 3], last=[1, 2, 3]',
        )


class TraceExportSignalTests(TestCase):
    def test_export_on_save(self):
        result = run_agent(QUESTION, make_store(), scripted(TREND_CALL, ANSWER_UP), critic_llm=False)
        with tempfile.TemporaryDirectory() as tmp:
            options = dict(settings.TSAGENT, TRACE_EXPORT_ON_SAVE=True, TRACE_DIR=tmp)
            with self.settings(TSAGENT=options):
                run = record_run(result, backend_kind='scripted')
            exported = json.loads((Path(tmp) / f'agent-run-{run.pk}.json').read_text())
        self.assertEqual(exported['answer'], 'up')

    def test_no_export_by_default(self):
        result = run_agent(QUESTION, make_store(), scripted(TREND_CALL, ANSWER_UP), critic_llm=False)
        with tempfile.TemporaryDirectory() as tmp:
            options = dict(settings.TSAGENT, TRACE_EXPORT_ON_SAVE=False, TRACE_DIR=tmp)
            with self.settings(TSAGENT=options):
                record_run(result)
            self.assertEqual(list(Path(tmp).iterdir()), [])

    def test_errored_run_record(self):
        run = record_run(None, question=QUESTION, backend_kind='http', error='connection refused')
        self.assertEqual(run.status, AgentRun.Status.ERRORED)
        self.assertIsNone(run.trace)


class AgentRunAPITests(APITestCase):
    def setUp(self):
        self.user = get_user_model().objects.create_user(username='analyst', password='secret-pass')
        self.client.force_authenticate(self.user)

    def post(self, entries, **extra):
        data = {
            'question': QUESTION,
            'series': [payload()],
            'backend': {'kind': 'scripted', 'entries': entries},
            'critic_llm': False,
        }
        data.update(extra)
        return self.client.post('/api/runs/', data, format='json')

    def test_run_and_fetch(self):
        response = self.post([TREND_CALL, ANSWER_UP])
        self.assertEqual(response.status_code, status.HTTP_201_CREATED)
        self.assertTrue(response.data['success'])
        run = response.data['run']
        self.assertEqual((run['status'], run['answer'], run['gate_rounds'], run['steps_used']),
                         ('ANSWERED', 'up', 1, 2))
        self.assertEqual(run['intent_task'], 'trend_direction')
        self.assertEqual(run['created_by'], 'analyst')

        trace = self.client.get(f"/api/runs/{run['id']}/trace/")
        self.assertEqual(trace.status_code, status.HTTP_200_OK)
        self.assertEqual(trace.data['trace']['answer'], 'up')
        self.assertEqual(check_grounding(trace.data['trace']), [])

        listing = self.client.get('/api/runs/')
        self.assertTrue(listing.data['success'])
        self.assertEqual(listing.data['count'], 1)

    def test_failed_run_is_stored(self):
        response = self.post([ANSWER_UP], budget=1)
        self.assertEqual(response.status_code, status.HTTP_201_CREATED)
        self.assertEqual(response.data['run']['status'], 'FAILED')
        self.assertEqual(response.data['run']['reasons'][0]['predicate'], 'trend_direction')

    def test_backend_failure(self):
        response = self.post([TREND_CALL])
        self.assertEqual(response.status_code, status.HTTP_502_BAD_GATEWAY)
        self.assertFalse(response.data['success'])
        self.assertEqual(AgentRun.objects.get().status, AgentRun.Status.ERRORED)

    def test_invalid_series(self):
        response = self.post([ANSWER_UP], series=[{'name': 'a', 'index': [0, 1], 'channels': {'value': [1.0]}}])
        self.assertEqual(response.status_code, status.HTTP_400_BAD_REQUEST)
        self.assertIn('series', response.data)

    def test_invalid_budget(self):
        response = self.post([ANSWER_UP], budget=0)
        self.assertEqual(response.status_code, status.HTTP_400_BAD_REQUEST)

    def test_runs_are_private(self):
        run_id = self.post([TREND_CALL, ANSWER_UP]).data['run']['id']
        other = get_user_model().objects.create_user(username='other', password='secret-pass')
        self.client.force_authenticate(other)
        self.assertEqual(self.client.get(f'/api/runs/{run_id}/').status_code, status.HTTP_404_NOT_FOUND)
        staff = get_user_model().objects.create_user(username='staff', password='secret-pass', is_staff=True)
        self.client.force_authenticate(staff)
        self.assertEqual(self.client.get(f'/api/runs/{run_id}/').status_code, status.HTTP_200_OK)

    def test_authentication_required(self):
        self.client.force_authenticate(None)
        response = self.client.get('/api/runs/')
        self.assertIn(response.status_code, (status.HTTP_401_UNAUTHORIZED, status.HTTP_403_FORBIDDEN))
