import io
import json
import math
import tempfile
from pathlib import Path

import numpy as np
from django.contrib.auth import get_user_model
from django.test import SimpleTestCase, TestCase
from rest_framework import status
from rest_framework.test import APITestCase

from agent.services import run_agent
from agent.tracing import check_grounding, serialize_trace
from harness.cli import cli
from harness.datasets import BenchQuestion, dump_dataset, load_dataset, series_payload
from harness.exceptions import DatasetError, HarnessError, UnknownCategoryError
from harness.generators import (
    CATEGORIES, CLOUDY_QUESTION, HOURS_PER_WEEK, WEEKS, case_study_question, cloudy_answer, cloudy_weeks_of,
    generate_synthetic, regenerate, solar_series,
)
from harness.models import BenchmarkRun
from harness.policies import (
    CATEGORY_CALLS, EVIDENCE_FREE, IDEAL, action, critic_entry, final_answer, format_answer, policy_backend,
)
from harness.replay import replay_case_study
from harness.scoring import score_answer
from harness.services import BenchReport, record_benchmark, run_benchmark
from llm.backends import BackendConfig
from oversight.intents import UNDECIDABLE
from series.store import SeriesStore
from toolkit.tests import make_series

TREND_CALL = 'Thought: check the trend\nAction: trend_classifier\nAction Input: {"name": "a"}'
ANSWER_UP = 'Thought: I now know the final answer\nFinal Answer: up'
QUESTION = 'Is series a trending upward? Answer with up, down or flat.'
STRICT_TREND = action('check again at a stricter level', 'trend_classifier', name='a', alpha=0.01)
LOOSE_TREND = action('settle it at the usual level', 'trend_classifier', name='a', alpha=0.05)


def borderline_ramp(scale, sign, level=0.0):
    """40 points whose slope has t = 2.3 on 38 df: significant at 0.05, not at 0.01."""
    t = np.arange(40.0)
    standard_error = scale * ((40 / 38) / 5330) ** 0.5
    return level + sign * 2.3 * standard_error * t + scale * np.tile([1.0, -1.0, -1.0, 1.0], 10)


def run_cli(*argv):
    stdout, stderr = io.StringIO(), io.StringIO()
    code = cli(list(argv), stdout=stdout, stderr=stderr)
    return code, stdout.getvalue(), stderr.getvalue()


class GeneratorTests(SimpleTestCase):
    def test_same_seed_same_questions(self):
        for category in CATEGORIES:
            first = generate_synthetic(category, 2, seed=5)
            second = generate_synthetic(category, 2, seed=5)
            self.assertEqual(dump_dataset(first), dump_dataset(second), category)

    def test_regenerate_is_bit_exact(self):
        for category in CATEGORIES:
            question = generate_synthetic(category, 1, seed=11)[0]
            rebuilt = regenerate(question)
            self.assertEqual(rebuilt, question, category)
            self.assertEqual(rebuilt.provenance, question.provenance)

    def test_ids_and_seeds(self):
        questions = generate_synthetic('trend', 3, seed=2)
        self.assertEqual([q.id for q in questions], ['trend-2-0', 'trend-2-1', 'trend-2-2'])
        self.assertEqual([q.provenance['seed'] for q in questions], [200006, 200007, 200008])

    def test_unknown_category(self):
        with self.assertRaises(UnknownCategoryError):
            generate_synthetic('weather', 1, seed=0)

    def test_choice_answers_are_options(self):
        for category in CATEGORIES:
            for question in generate_synthetic(category, 3, seed=1):
                if question.options:
                    self.assertIn(question.answer, question.options)
                    self.assertIn('Options:', question.question)

    def test_cloudy_weeks_are_recoverable(self):
        rng = np.random.default_rng(4)
        x = solar_series(rng, [0, 2])
        self.assertEqual(x.size, WEEKS * HOURS_PER_WEEK)
        self.assertEqual(cloudy_weeks_of(x), [0, 2])
        self.assertEqual(
            cloudy_answer([0], [1, 3]),
            'the first time series has cloudy periods for the first week, '
            'whereas the second time series are cloudy for the second and fourth week.',
        )

    def test_case_study_question(self):
        question = case_study_question()
        self.assertEqual(question.question, CLOUDY_QUESTION)
        self.assertEqual(question.series_names, ['Solar panel 1', 'Solar panel 2'])
        self.assertEqual(question.provenance['params']['second_weeks'], [1, 3])


class DatasetTests(SimpleTestCase):
    def test_dump_and_load(self):
        questions = generate_synthetic('similarity_choice', 2, seed=3)
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / 'data' / 'set.jsonl'
            dump_dataset(questions, path)
            loaded = load_dataset(path)
        self.assertEqual(loaded, questions)
        self.assertEqual(loaded[0].provenance, questions[0].provenance)

    def test_file_references_resolve_next_to_the_dataset(self):
        with tempfile.TemporaryDirectory() as tmp:
            Path(tmp, 'a.csv').write_text('time,value\n0,1\n1,2\n2,3\n')
            line = {'id': 'q1', 'category': 'trend', 'question': QUESTION, 'answer': 'up',
                    'series': [{'name': 'a', 'file': 'a.csv'}]}
            Path(tmp, 'set.jsonl').write_text(json.dumps(line) + '\n\n')
            question = load_dataset(Path(tmp, 'set.jsonl'))[0]
            store = question.build_store()
        self.assertEqual(store.get('a').length, 3)

    def test_withheld_series_keep_their_names(self):
        question = generate_synthetic('lagged_correlation', 1, seed=0)[0]
        store = question.build_store(withhold_series=True)
        self.assertEqual(store.names(), question.series_names)
        self.assertTrue(all(series.length == 1 for series in store))

    def test_invalid_questions(self):
        base = {'id': 'q', 'category': 'c', 'question': 'Which?', 'series': [{'name': 'a', 'payload': series_payload([1, 2])}]}
        with self.assertRaisesMessage(DatasetError, 'question q'):
            BenchQuestion.from_dict(dict(base, options=['x', 'y'], answer='z'))
        with self.assertRaises(DatasetError):
            BenchQuestion.from_dict(dict(base, answer='x', series=[{'name': 'a'}]))

    def test_duplicate_ids(self):
        question = generate_synthetic('trend', 1, seed=0)[0]
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / 'set.jsonl'
            dump_dataset([question, question], path)
            with self.assertRaisesMessage(DatasetError, 'not unique'):
                load_dataset(path)

    def test_missing_file(self):
        with self.assertRaises(DatasetError):
            load_dataset('/nonexistent/set.jsonl')


class ScoringTests(SimpleTestCase):
    def test_choice_by_letter_or_text(self):
        question = generate_synthetic('anomaly_location', 1, seed=8)[0]
        self.assertTrue(score_answer(question, format_answer(question)))
        self.assertTrue(score_answer(question, question.answer))
        wrong = next(option for option in question.options if option != question.answer)
        self.assertFalse(score_answer(question, wrong))

    def test_wrong_weeks(self):
        question = case_study_question()
        self.assertTrue(score_answer(question, f'|{question.answer}|'))
        self.assertFalse(score_answer(question, f'|{cloudy_answer([1], [1, 2])}|'))
        self.assertFalse(score_answer(question, None))


class PolicyBenchmarkTests(SimpleTestCase):
    def setUp(self):
        self.questions = [q for category in CATEGORIES for q in generate_synthetic(category, 2, seed=1)]

    def test_ideal_policy(self):
        self.assertGreaterEqual(len(CATEGORIES), 8)
        per_category = math.ceil(100 / len(CATEGORIES))
        questions = [q for category in CATEGORIES for q in generate_synthetic(category, per_category, seed=1)]
        self.assertGreaterEqual(len(questions), 100)
        report = run_benchmark(questions, policy=IDEAL, parallelism=4)
        self.assertEqual(report.n_questions, len(questions))
        self.assertGreaterEqual(report.accuracy, 0.9)
        self.assertEqual(sorted(report.by_category()), sorted(CATEGORIES))
        for record in report.records:
            if record.outcome == 'answer':
                self.assertEqual(record.grounding, [], record.id)

    def test_evidence_free_policy_never_passes_the_gate(self):
        report = run_benchmark(self.questions, policy=EVIDENCE_FREE, budget=3)
        self.assertEqual(report.accuracy, 0.0)
        self.assertEqual(report.first_proposals(), {'proposed': len(self.questions), 'rejected': len(self.questions)})
        self.assertTrue(all(record.outcome == 'failure' for record in report.records))
        self.assertTrue(all(record.reasons for record in report.records))

    def test_empty_benchmark(self):
        report = run_benchmark([], policy=IDEAL)
        self.assertEqual((report.n_questions, report.accuracy), (0, 0.0))
        self.assertEqual(report.by_category(), {})
        self.assertIn('Overall', report.render_table())

    def test_backend_or_policy(self):
        with self.assertRaises(HarnessError):
            run_benchmark(self.questions)
        with self.assertRaises(HarnessError):
            policy_backend('oracle', self.questions[0])

    def test_errored_question_does_not_stop_the_run(self):
        exhausted = {'kind': 'scripted', 'entries': [TREND_CALL]}
        report = run_benchmark(self.questions[:2], backend=BackendConfig.from_data(exhausted), critic_llm=False)
        self.assertEqual([record.outcome for record in report.records], ['errored', 'errored'])
        self.assertTrue(report.records[0].error)

    def test_parallel_run_keeps_question_order(self):
        serial = run_benchmark(self.questions[:6], policy=IDEAL, parallelism=1)
        parallel = run_benchmark(self.questions[:6], policy=IDEAL, parallelism=3)
        self.assertEqual(serial.to_json(), parallel.to_json())

    def test_report_files(self):
        with tempfile.TemporaryDirectory() as tmp:
            report = run_benchmark(self.questions[:2], policy=IDEAL, out_dir=tmp, label='ideal')
            saved = json.loads(Path(tmp, 'report.json').read_text())
            table = Path(tmp, 'report.txt').read_text()
            trace = Path(report.records[0].trace_file)
            self.assertTrue(trace.exists())
            self.assertEqual(check_grounding(json.loads(trace.read_text())), [])
        self.assertEqual(saved['n_questions'], 2)
        self.assertTrue(table.startswith('      |'))
        self.assertIn('ideal', table)

    def test_render_table(self):
        report = BenchReport(records=[], label='x')
        lines = report.render_table().splitlines()
        self.assertEqual(len(lines), 4)
        self.assertTrue(lines[2].startswith('x '))


class GateSoundnessTests(SimpleTestCase):
    """Scripted runs that try to slip an answer past the gate."""

    def setUp(self):
        self.questions = [q for category in CATEGORIES for q in generate_synthetic(category, 6, seed=21)]

    def assert_sound(self, result):
        if result.succeeded:
            decision = result.gate_decisions[-1]
            self.assertEqual(decision.gaps, ())
            if not decision.undecidable:
                self.assertIsNone(result.intent.schema.check(result.answer))
            self.assertEqual(check_grounding(serialize_trace(result)), [])

    def test_evidence_free_answers_are_always_rejected(self):
        self.assertGreaterEqual(len(self.questions), 50)
        for question in self.questions:
            result = run_agent(question.question, question.build_store(), policy_backend(EVIDENCE_FREE, question),
                               budget=2)
            self.assertFalse(result.succeeded, question.id)
            self.assertEqual(result.gate_decisions[0].verdict, 'reject', question.id)
            self.assert_sound(result)

    def test_out_of_schema_answers(self):
        for question in self.questions:
            calls = CATEGORY_CALLS[question.category](question)
            entries = [critic_entry()] + calls + [{'response': final_answer('banana'), 'repeat': True}]
            backend = BackendConfig.from_data({'kind': 'scripted', 'entries': entries})
            result = run_agent(question.question, question.build_store(), backend, budget=len(calls) + 2)
            self.assertFalse(result.succeeded, question.id)
            self.assertTrue(result.gate_decisions, question.id)
            for decision in result.gate_decisions:
                self.assertIn('schema_violation', [reason.type for reason in decision.reasons], question.id)

    def test_ideal_runs_are_sound(self):
        for question in self.questions:
            result = run_agent(question.question, question.build_store(), policy_backend(IDEAL, question))
            self.assert_sound(result)

    def contradiction_fixtures(self):
        for position in range(30):
            scale = 0.5 + 0.1 * position
            sign = 1.0 if position % 2 == 0 else -1.0
            label = 'up' if sign > 0 else 'down'
            store = SeriesStore([make_series('a', borderline_ramp(scale, sign, level=position))])
            yield position, label, store

    def test_contradicting_observations_block_the_answer(self):
        for position, label, store in self.contradiction_fixtures():
            entries = [critic_entry(), TREND_CALL, STRICT_TREND, final_answer(label), final_answer(UNDECIDABLE)]
            result = run_agent(QUESTION, store, BackendConfig.from_data({'kind': 'scripted', 'entries': entries}),
                               budget=4)
            with self.subTest(position=position):
                self.assertEqual([step.observation.value for step in result.trace.steps[:2]], [label, 'flat'])
                first = result.gate_decisions[0]
                self.assertEqual(first.verdict, 'reject')
                self.assertEqual([reason.type for reason in first.reasons], ['contradiction'])
                self.assertTrue(result.succeeded)
                self.assertEqual(result.answer, UNDECIDABLE)
                self.assertTrue(result.gate_decisions[-1].undecidable)
                self.assert_sound(result)

    def test_undecidable_without_a_contradiction_is_rejected(self):
        for question in self.questions[:len(CATEGORIES)]:
            calls = CATEGORY_CALLS[question.category](question)
            entries = [critic_entry()] + calls + [{'response': final_answer(UNDECIDABLE), 'repeat': True}]
            backend = BackendConfig.from_data({'kind': 'scripted', 'entries': entries})
            result = run_agent(question.question, question.build_store(), backend, budget=len(calls) + 2)
            self.assertFalse(result.succeeded, question.id)
            for decision in result.gate_decisions:
                self.assertIn('schema_violation', [reason.type for reason in decision.reasons], question.id)

    def test_settled_contradiction_lets_the_answer_through(self):
        for position, label, store in self.contradiction_fixtures():
            entries = [critic_entry(), TREND_CALL, STRICT_TREND, LOOSE_TREND, final_answer(label)]
            result = run_agent(QUESTION, store, BackendConfig.from_data({'kind': 'scripted', 'entries': entries}),
                               budget=4)
            with self.subTest(position=position):
                self.assertTrue(result.succeeded)
                self.assertEqual(result.answer, label)
                self.assertEqual(result.gate_rounds, 1)
                self.assert_sound(result)


class CaseStudyReplayTests(SimpleTestCase):
    def test_replay_passes_every_stage(self):
        report = replay_case_study()
        self.assertTrue(report.passed, report.render())
        self.assertEqual([stage.number for stage in report.stages], [1, 2, 3, 4, 5])
        result = report.result
        self.assertEqual(result.gate_rounds, 1)
        self.assertEqual(len(result.trace), 6)
        self.assertIn('Critic: anomaly_classifier works on one series at a time', result.trace.steps[0].feedback)

    def test_premature_answer_without_the_gate(self):
        report = replay_case_study(gate_enabled=False, premature_answer=True)
        self.assertFalse(report.passed)
        self.assertEqual(report.failed_stage, 5)
        self.assertIn('Replay failed at stage 5', report.render())

    def test_premature_answer_with_the_gate(self):
        report = replay_case_study(premature_answer=True)
        self.assertTrue(report.passed, report.render())
        self.assertEqual(report.result.gate_rounds, 2)
        self.assertFalse(report.result.gate_decisions[0].accepted)


class CommandLineTests(SimpleTestCase):
    def test_tools(self):
        code, out, _ = run_cli('tools')
        self.assertEqual(code, 0)
        catalog = json.loads(out)
        self.assertIn('anomaly_classifier', [entry['name'] for entry in catalog])
        code, out, _ = run_cli('tools', '--family', 'rel')
        self.assertEqual({entry['family'] for entry in json.loads(out)}, {'rel'})

    def test_bench_is_reproducible(self):
        with tempfile.TemporaryDirectory() as tmp:
            reports = []
            for out in ('one', 'two'):
                code, stdout, _ = run_cli('bench', '--synthetic', 'trend×3', '--synthetic', 'noise:2', '--seed', '7',
                                          '--policy', 'ideal', '--out', str(Path(tmp, out)))
                self.assertEqual(code, 0)
                self.assertIn('Overall', stdout)
                report = json.loads(Path(tmp, out, 'report.json').read_text())
                for record in report['questions']:
                    record.pop('trace_file')
                reports.append(report)
        self.assertEqual(reports[0], reports[1])
        self.assertEqual(reports[0]['n_questions'], 5)

    def test_gen(self):
        code, out, _ = run_cli('gen', '--synthetic', 'seasonality×2', '--seed', '4')
        self.assertEqual(code, 0)
        lines = out.splitlines()
        self.assertEqual(len(lines), 2)
        self.assertEqual(json.loads(lines[0])['id'], 'seasonality-4-0')

    def write_inputs(self, tmp, entries):
        values = 0.5 * np.arange(40) + np.sin(np.arange(40))
        rows = ''.join(f'{t},{v}\n' for t, v in enumerate(values))
        Path(tmp, 'a.csv').write_text('time,value\n' + rows)
        Path(tmp, 'fixture.json').write_text(json.dumps({'entries': entries}))

    def ask(self, tmp, *extra):
        return run_cli('ask', '--question', QUESTION, '--series', f"a={Path(tmp, 'a.csv')}",
                       '--fixture', str(Path(tmp, 'fixture.json')), '--no-critic-llm',
                       '--trace-out', str(Path(tmp, 'trace.json')), *extra)

    def test_ask_and_show_trace(self):
        with tempfile.TemporaryDirectory() as tmp:
            self.write_inputs(tmp, [TREND_CALL, ANSWER_UP])
            code, out, _ = self.ask(tmp)
            self.assertEqual(code, 0)
            self.assertIn('Answer: up', out)
            code, out, _ = run_cli('trace', 'show', str(Path(tmp, 'trace.json')), '--check')
        self.assertEqual(code, 0)
        self.assertIn('--- Step 1 ---', out)
        self.assertIn('Grounding check passed.', out)

    def test_ask_json_format(self):
        with tempfile.TemporaryDirectory() as tmp:
            self.write_inputs(tmp, [TREND_CALL, ANSWER_UP])
            code, out, _ = self.ask(tmp, '--format', 'json')
        self.assertEqual(code, 0)
        self.assertEqual(json.loads(out)['answer'], 'up')

    def test_agent_failure_exits_one(self):
        with tempfile.TemporaryDirectory() as tmp:
            self.write_inputs(tmp, [ANSWER_UP])
            code, _, err = self.ask(tmp, '--budget', '1')
        self.assertEqual(code, 1)
        self.assertIn('Agent failure: missing evidence for trend_direction', err)

    def test_backend_failure_exits_two(self):
        with tempfile.TemporaryDirectory() as tmp:
            self.write_inputs(tmp, [TREND_CALL])
            code, _, err = self.ask(tmp)
        self.assertEqual(code, 2)
        self.assertIn('backend failure', err)

    def test_usage_errors_exit_two(self):
        self.assertEqual(run_cli()[0], 2)
        self.assertEqual(run_cli('bench')[0], 2)
        self.assertEqual(run_cli('bench', '--synthetic', 'weather×3', '--policy', 'ideal')[0], 2)
        self.assertEqual(run_cli('ask', '--question', QUESTION, '--series', 'a')[0], 2)
        code, _, err = run_cli('ask', '--question', QUESTION, '--series', 'a=/nonexistent.csv',
                               '--backend', 'scripted', '--fixture', '/nonexistent.json')
        self.assertEqual(code, 2)
        self.assertIn('file not found', err)

    def test_unreadable_trace(self):
        code, _, err = run_cli('trace', 'show', '/nonexistent/trace.json')
        self.assertEqual(code, 2)
        self.assertIn('cannot read trace', err)


class BenchmarkRecordTests(TestCase):
    def test_record(self):
        report = run_benchmark(generate_synthetic('trend', 2, seed=0), policy=IDEAL, label='ideal')
        run = record_benchmark(report, seed=0)
        self.assertEqual(run.n_questions, 2)
        self.assertEqual(run.categories['trend']['n'], 2)
        self.assertIsNone(run.created_by)

    def test_record_from_the_command_line(self):
        code, _, _ = run_cli('bench', '--synthetic', 'noise×2', '--seed', '3', '--policy', 'ideal', '--record')
        self.assertEqual(code, 0)
        run = BenchmarkRun.objects.get()
        self.assertEqual((run.label, run.seed), ('ideal', 3))


class BenchmarkRunAPITests(APITestCase):
    def setUp(self):
        self.user = get_user_model().objects.create_user(username='analyst', password='secret-pass')
        report = run_benchmark(generate_synthetic('trend', 2, seed=0), policy=IDEAL, label='ideal')
        self.run = record_benchmark(report, seed=0, user=self.user)

    def test_list_and_detail(self):
        self.client.force_authenticate(self.user)
        listing = self.client.get('/api/benchmarks/')
        self.assertEqual(listing.status_code, status.HTTP_200_OK)
        self.assertTrue(listing.data['success'])
        self.assertEqual(listing.data['results'][0]['categories']['trend']['n'], 2)
        self.assertNotIn('report', listing.data['results'][0])

        detail = self.client.get(f'/api/benchmarks/{self.run.pk}/')
        self.assertEqual(detail.data['benchmark']['created_by'], 'analyst')
        self.assertEqual(len(detail.data['benchmark']['report']['questions']), 2)

    def test_read_only(self):
        self.client.force_authenticate(self.user)
        response = self.client.post('/api/benchmarks/', {'label': 'x'}, format='json')
        self.assertEqual(response.status_code, status.HTTP_405_METHOD_NOT_ALLOWED)

    def test_authentication_required(self):
        response = self.client.get('/api/benchmarks/')
        self.assertIn(response.status_code, (status.HTTP_401_UNAUTHORIZED, status.HTTP_403_FORBIDDEN))
