import json
import tempfile
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase

from agent.state import EvidenceLog, Step
from llm.backends import ScriptedBackend
from oversight.critic import SUFFICIENT, critic_review, deterministic_review
from oversight.exceptions import IntentRuleError
from oversight.gate import (
    CONTRADICTION,
    MISSING_PREDICATE,
    SCHEMA_VIOLATION,
    evidence_reasons,
    quality_gate,
)
from oversight.intents import (
    FALLBACK_TASK,
    UNDECIDABLE,
    AnswerSchema,
    detect_question_intents,
    load_intent_rules,
    parse_intent_rules,
    template_pattern,
)
from oversight.predicates import (
    Binding,
    CoverageState,
    extract_bindings,
    find_contradictions,
    segment_of,
)
from series.store import SeriesStore
from toolkit.registry import Observation, ToolCall
from toolkit.tests import make_series
from toolkit.tools import build_registry

MCQ_QUESTION = (
    'In which part of the series "a" does the anomaly occur?\n'
    'A) beginning\nB) middle\nC) end\nD) nowhere'
)
CLOUDY_QUESTION = (
    'How does the duration of cloudy periods compare between the two panels? '
    'Please strictly follow the output format as: '
    '|the first time series has cloudy periods for the (select all that apply from first, second, third, fourth) '
    'week, whereas the second time series are cloudy for the (select all that apply from first, second, third, '
    'fourth) week.|'
)


def observation(tool, kind, value, seq, args=None, **diagnostics):
    return Observation(kind=kind, value=value, source=ToolCall(tool, args or {'name': 'a'}), seq=seq,
                       diagnostics=diagnostics)


def error_observation(seq=1):
    return Observation(
        kind='error', value=None, seq=seq,
        source=ToolCall('anomaly_classifier', {'name': ['a', 'b']}),
        error='Error when calling anomaly_classifier: x must be 1-D. '
              'The correct usage: anomaly_classifier(name: series, threshold?: real, window?: int)',
        diagnostics={'parameters': [{'name': 'name', 'type': 'series', 'required': True}]},
    )


def anomaly_observation(seq, position=388, length=744, args=None):
    return observation('anomaly_classifier', 'index-set', [position], seq, args=args,
                       most_severe=position, length=length, span=['a', 0, length])


class IntentDetectionTests(SimpleTestCase):
    def test_shipped_table(self):
        rules = load_intent_rules()
        self.assertEqual(rules[0].task, 'cloudy_period_comparison')
        self.assertEqual(rules[-1].task, FALLBACK_TASK)
        self.assertEqual(rules[-1].patterns, ())

    def test_question_classes(self):
        cases = {
            'What is the overall trend of the time series? Answer with up, down or flat.': 'trend_direction',
            'How strong is the seasonality of the series?': 'seasonality_type',
            'Is the series stationary or nonstationary?': 'stationarity_query',
            'Which kind of noise does the series contain: white or red?': 'noise_type',
            'By how many time steps does series "y" lag behind series "x"?': 'relation_lagged',
            'Does series_a Granger-cause series_b? Answer yes or no.': 'causality_direction',
            'Which candidate is most similar in shape to the reference?': 'similarity_choice',
            'What is the mean of the series?': 'value_lookup',
            'Compare both series.': 'two_series_comparison',
            'Tell me about this data.': FALLBACK_TASK,
        }
        for question, task in cases.items():
            with self.subTest(question=question):
                self.assertEqual(detect_question_intents(question).task, task)

    def test_detection_is_pure(self):
        self.assertEqual(detect_question_intents(MCQ_QUESTION), detect_question_intents(MCQ_QUESTION))

    def test_option_lines_make_it_multiple_choice(self):
        intent = detect_question_intents(MCQ_QUESTION)
        self.assertEqual(intent.task, 'MCQ_anomaly_location')
        self.assertEqual(intent.schema.type, 'mcq')
        self.assertEqual(intent.schema.options,
                         (('A', 'beginning'), ('B', 'middle'), ('C', 'end'), ('D', 'nowhere')))
        self.assertEqual([p.name for p in intent.required], ['has_anomaly', 'anomaly_segment'])

    def test_template_makes_it_a_template_schema(self):
        intent = detect_question_intents(CLOUDY_QUESTION)
        self.assertEqual(intent.task, 'cloudy_period_comparison')
        self.assertEqual(intent.schema.type, 'template')
        self.assertTrue(intent.schema.template.startswith('the first time series has cloudy periods'))


class IntentRuleTableTests(SimpleTestCase):
    generic = {'task': 'generic', 'patterns': [], 'schema': {'type': 'free_text'},
               'required': [{'name': 'any_call', 'domain': 'any', 'tools': ['*'], 'extract': 'any'}]}

    def test_last_rule_must_match_everything(self):
        rule = dict(self.generic, patterns=['trend'])
        with self.assertRaisesMessage(IntentRuleError, 'the last rule must have no patterns'):
            parse_intent_rules([rule])

    def test_unknown_tool(self):
        rule = dict(self.generic, required=[{'name': 'x', 'domain': 'label', 'tools': ['nope'], 'extract': 'category'}])
        with self.assertRaisesMessage(IntentRuleError, "names unknown tools ['nope']"):
            parse_intent_rules([rule], tool_names={'trend_classifier'})

    def test_schema_needs_its_fields(self):
        rule = dict(self.generic, schema={'type': 'categorical'})
        with self.assertRaises(IntentRuleError):
            parse_intent_rules([rule])

    def test_custom_table_from_settings_path(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / 'rules.json'
            path.write_text(json.dumps([self.generic]))
            rules = load_intent_rules(path)
        self.assertEqual(detect_question_intents('anything at all', rules).task, 'generic')

    def test_unreadable_table(self):
        with self.assertRaises(IntentRuleError):
            load_intent_rules('/nonexistent/rules.json')


class AnswerSchemaTests(SimpleTestCase):
    def test_mcq(self):
        schema = detect_question_intents(MCQ_QUESTION).schema
        for answer in ('B', 'b)', 'B) middle', 'middle', 'Option B', 'The anomaly is in the middle.'):
            with self.subTest(answer=answer):
                self.assertEqual(schema.resolve(answer), 'B')
        self.assertEqual(schema.check('E'), 'E is not one of the options A, B, C, D')
        self.assertIsNotNone(schema.check('beginning or end'))

    def test_categorical(self):
        schema = AnswerSchema(type='categorical', labels=('stationary', 'nonstationary'))
        self.assertEqual(schema.resolve('The series is nonstationary.'), 'nonstationary')
        self.assertEqual(schema.resolve('Stationary'), 'stationary')
        self.assertIsNone(schema.resolve('either stationary or nonstationary'))
        self.assertEqual(schema.check('unsure'), 'the answer must contain exactly one of: stationary, nonstationary')

    def test_numeric(self):
        schema = AnswerSchema(type='numeric', tolerance=0)
        self.assertEqual(schema.resolve('It lags by 3 steps'), 3.0)
        self.assertEqual(schema.check('no idea'), 'the answer must contain a number')

    def test_template(self):
        schema = detect_question_intents(CLOUDY_QUESTION).schema
        answer = ('|The first time series has cloudy periods for the second week, whereas the second time '
                  'series are cloudy for the second and fourth week.| The spike is a glitch.')
        self.assertEqual(
            schema.resolve(answer),
            'the first time series has cloudy periods for the second week, whereas the second time series '
            'are cloudy for the second and fourth week',
        )
        self.assertIsNone(schema.check(answer))
        self.assertIsNotNone(schema.check('The second panel was cloudier.'))
        self.assertIsNone(schema.resolve('... for the fifth week, whereas ...'))

    def test_template_slots(self):
        pattern = template_pattern('it is (select one from up, down) today')
        self.assertEqual(pattern, r'it\ is\ (?:up|down)\ today')

    def test_empty_answer(self):
        self.assertEqual(AnswerSchema(type='free_text').check('  '), 'the answer is empty')


class PredicateTests(SimpleTestCase):
    def setUp(self):
        self.intent = detect_question_intents(MCQ_QUESTION)

    def test_segment_by_thirds(self):
        self.assertEqual(segment_of(388, 744), 'middle')
        self.assertEqual(segment_of(0, 300), 'beginning')
        self.assertEqual(segment_of(199, 300), 'middle')
        self.assertEqual(segment_of(200, 300), 'end')
        self.assertEqual(segment_of(299, 300), 'end')

    def test_anomaly_bindings(self):
        bindings = extract_bindings(anomaly_observation(seq=4), self.intent, ('a',))
        self.assertEqual({b.predicate: b.value for b in bindings}, {'has_anomaly': True, 'anomaly_segment': 'middle'})
        self.assertEqual(bindings[0].subject, ('a', 0, 744))
        self.assertEqual(bindings[0].seq, 4)

    def test_no_anomaly_binds_only_the_boolean(self):
        empty = observation('anomaly_classifier', 'index-set', [], 1, most_severe=None, length=100, span=['a', 0, 100])
        bindings = extract_bindings(empty, self.intent, ('a',))
        self.assertEqual([(b.predicate, b.value) for b in bindings], [('has_anomaly', False)])

    def test_errors_and_other_tools_bind_nothing(self):
        self.assertEqual(extract_bindings(error_observation(), self.intent, ('a',)), ())
        stats = observation('summary_stats', 'record', {'mean': 1.0}, 2, span=['a', 0, 10])
        self.assertEqual(extract_bindings(stats, self.intent, ('a',)), ())

    def test_segment_profiles_follow_root_order(self):
        intent = detect_question_intents(CLOUDY_QUESTION)
        roots = ('Solar panel 1', 'Solar panel 2')
        segments = [{'start': 0, 'end': 168, 'mean': 0.4}, {'start': 168, 'end': 336, 'mean': 0.2}]
        second = observation('segment_series', 'series', segments, 1, args={'name': 'Solar panel 2', 'k': 2},
                             boundaries=[[0, 168], [168, 336]], source='Solar panel 2',
                             span=['Solar panel 2', 0, 336])
        state = CoverageState.initial(intent, roots).with_bindings(extract_bindings(second, intent, roots))
        self.assertEqual(state.covered, {'second_series_segment_profile': [0.4, 0.2]})
        self.assertEqual(state.gaps, ('first_series_segment_profile',))

    def test_describe(self):
        self.assertEqual(self.intent.predicate('has_anomaly').describe(),
                         'has_anomaly (verified by anomaly_classifier or spike_detector)')


def binding(value, seq, subject=('a', 0, 100), params='{}', predicate='anomaly_segment', domain='segment'):
    return Binding(predicate=predicate, domain=domain, value=value, subject=subject, seq=seq,
                   tool='anomaly_classifier', params=params)


class ContradictionTests(SimpleTestCase):
    def test_disagreement_on_the_same_subject(self):
        found = find_contradictions([binding('middle', 1), binding('end', 2)])
        self.assertEqual(len(found), 1)
        self.assertEqual(found[0].to_dict()['entries'], [1, 2])
        self.assertFalse(found[0].resolved)

    def test_different_subjects_do_not_contradict(self):
        self.assertEqual(find_contradictions([binding('middle', 1), binding('end', 2, subject=('a', 0, 50))]), [])

    def test_numeric_domains_are_not_compared(self):
        first = binding(0.1, 1, predicate='granger_pvalue', domain='numeric')
        second = binding(0.2, 2, predicate='granger_pvalue', domain='numeric')
        self.assertEqual(find_contradictions([first, second]), [])

    def test_settled_by_new_parameters(self):
        found = find_contradictions([
            binding('middle', 1),
            binding('end', 2, params='{"threshold": 3}'),
            binding('middle', 3, params='{"threshold": 5}'),
        ])
        self.assertEqual(len(found), 1)
        self.assertEqual(found[0].resolved_by.seq, 3)

    def test_settled_by_a_wider_window(self):
        found = find_contradictions([
            binding('middle', 1, subject=('a', 10, 90)),
            binding('end', 2, subject=('a', 10, 90)),
            binding('end', 3, subject=('a', 0, 100)),
        ])
        self.assertEqual([item.resolved_by.seq for item in found], [3])

    def test_repeating_the_same_call_settles_nothing(self):
        found = find_contradictions([binding('middle', 1), binding('end', 2), binding('middle', 3)])
        self.assertTrue(found)
        self.assertTrue(all(not item.resolved for item in found))


class GateTests(SimpleTestCase):
    def setUp(self):
        self.intent = detect_question_intents(MCQ_QUESTION)
        self.log = EvidenceLog(self.intent, ['a'])

    def test_empty_log_rejects_with_every_required_predicate(self):
        decision = quality_gate(MCQ_QUESTION, self.log, self.intent, 'B')
        self.assertFalse(decision.accepted)
        self.assertEqual([(r.type, r.predicate) for r in decision.reasons],
                         [(MISSING_PREDICATE, 'has_anomaly'), (MISSING_PREDICATE, 'anomaly_segment')])
        self.assertEqual(decision.gaps, ('has_anomaly', 'anomaly_segment'))

    def test_answer_outside_the_options(self):
        self.log.append(anomaly_observation(seq=1))
        decision = quality_gate(MCQ_QUESTION, self.log, self.intent, 'E')
        self.assertFalse(decision.accepted)
        self.assertEqual([(r.type, r.detail) for r in decision.reasons],
                         [(SCHEMA_VIOLATION, 'E is not one of the options A, B, C, D')])
        self.assertEqual(decision.feedback(),
                         'The final answer was rejected: schema violation: E is not one of the options A, B, C, D.')

    def test_accepts_a_covered_in_schema_answer(self):
        self.log.append(anomaly_observation(seq=1))
        decision = quality_gate(MCQ_QUESTION, self.log, self.intent, 'B) middle')
        self.assertTrue(decision.accepted)
        self.assertEqual(decision.reasons, ())
        self.assertEqual(decision.covered, {'has_anomaly': True, 'anomaly_segment': 'middle'})

    def test_unresolved_contradiction_rejects(self):
        self.log.append(anomaly_observation(seq=1, position=100, length=300))
        self.log.append(anomaly_observation(seq=2, position=250, length=300))
        decision = quality_gate(MCQ_QUESTION, self.log, self.intent, 'B')
        self.assertEqual([r.type for r in decision.reasons], [CONTRADICTION])
        self.assertEqual(decision.reasons[0].entries, (1, 2))

    def test_undecidable_needs_an_open_contradiction(self):
        self.log.append(anomaly_observation(seq=1))
        rejected = quality_gate(MCQ_QUESTION, self.log, self.intent, UNDECIDABLE)
        self.assertFalse(rejected.accepted)
        self.assertEqual(rejected.reasons[0].type, SCHEMA_VIOLATION)

        self.log.append(anomaly_observation(seq=2, position=700))
        accepted = quality_gate(MCQ_QUESTION, self.log, self.intent, UNDECIDABLE)
        self.assertTrue(accepted.accepted)
        self.assertTrue(accepted.undecidable)

    def test_anomaly_found_on_a_slice_is_placed_in_the_whole_series(self):
        x = np.random.default_rng(5).normal(0, 0.1, 300)
        x[50] += 5
        store = SeriesStore([make_series('a', x)])
        registry = build_registry()
        sliced = registry.dispatch(ToolCall('slice_series', {'name': 'a', 'start': 0, 'end': 100}), store)
        found = registry.dispatch(ToolCall('anomaly_classifier', {'name': sliced.value['name']}), store)
        self.log.append(found)
        decision = quality_gate(MCQ_QUESTION, self.log, self.intent, 'A) beginning')
        self.assertTrue(decision.accepted)
        self.assertEqual(decision.covered['anomaly_segment'], 'beginning')

        narrow = registry.dispatch(ToolCall('slice_series', {'name': 'a', 'start': 40, 'end': 70}), store)
        self.log.append(registry.dispatch(ToolCall('anomaly_classifier', {'name': narrow.value['name']}), store))
        self.assertEqual(self.log.entries[-1].observation.diagnostics['most_severe'], 10)
        self.assertEqual(self.log.coverage().covered['anomaly_segment'], 'beginning')

    def test_window_without_a_known_root_binds_no_segment(self):
        windowed = observation('anomaly_classifier', 'index-set', [50], 1, most_severe=50, length=100,
                               span=['a', 100, 200])
        bindings = extract_bindings(windowed, self.intent, ('a',))
        self.assertEqual([(b.predicate, b.value) for b in bindings], [('has_anomaly', True)])

    def test_evidence_reasons(self):
        self.assertEqual(len(evidence_reasons(self.log, self.intent)), 2)
        self.log.append(anomaly_observation(seq=1))
        self.assertEqual(evidence_reasons(self.log, self.intent), [])


class CriticTests(SimpleTestCase):
    def setUp(self):
        self.intent = detect_question_intents(MCQ_QUESTION)
        self.log = EvidenceLog(self.intent, ['a', 'b'])

    def step_for(self, obs, k=1):
        self.log.append(obs)
        return Step(k=k, thought='t', action=obs.source, action_input='{a}', observation=obs)

    def test_error_step_shows_usage_and_parameters(self):
        notes = deterministic_review(self.step_for(error_observation()), self.log, self.intent)
        self.assertIn('The correct usage', notes[0])
        self.assertEqual(notes[1], 'Parameters of anomaly_classifier: '
                                   '[{"name": "name", "type": "series", "required": true}]')
        self.assertTrue(notes[-1].startswith('Evidence still missing for: has_anomaly (verified by'))

    def test_sufficient_evidence(self):
        notes = deterministic_review(self.step_for(anomaly_observation(seq=1)), self.log, self.intent)
        self.assertEqual(notes, [SUFFICIENT])

    def test_contradiction_is_flagged_on_the_step_that_raised_it(self):
        self.step_for(anomaly_observation(seq=1, position=10, length=300))
        step = self.step_for(anomaly_observation(seq=2, position=290, length=300), k=2)
        notes = deterministic_review(step, self.log, self.intent)
        self.assertTrue(notes[0].startswith('Contradiction on anomaly_segment: entry 1'))
        self.assertEqual(notes[-1], 'All required predicates are covered, but contradictions remain unresolved.')

    def test_malformed_step(self):
        step = Step(k=1, thought='', diagnostic='missing Action:')
        feedback = critic_review(step, self.log, self.intent)
        self.assertTrue(feedback.startswith('Could not parse the last turn: missing Action:.'))

    def test_llm_critique_is_appended(self):
        backend = ScriptedBackend([{'match': {'contains': 'Current observation:'}, 'response': 'Looks right.'}])
        feedback = critic_review(self.step_for(anomaly_observation(seq=1)), self.log, self.intent,
                                 backend=backend, use_llm=True)
        self.assertEqual(feedback, f'{SUFFICIENT}\nCritic: Looks right.')

    def test_failing_critic_model_keeps_the_deterministic_notes(self):
        backend = ScriptedBackend([{'match': {'contains': 'never sent'}, 'response': 'x'}])
        with self.assertLogs('oversight.critic', level='WARNING'):
            feedback = critic_review(self.step_for(anomaly_observation(seq=1)), self.log, self.intent,
                                     backend=backend, use_llm=True)
        self.assertEqual(feedback, SUFFICIENT)
