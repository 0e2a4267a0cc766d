import json
import os
import tempfile
from pathlib import Path
from types import SimpleNamespace
from unittest import mock

import httpx
import openai
from django.test import SimpleTestCase, override_settings

from agent.state import EvidenceLog, ReasoningTrace, Step
from llm.backends import BackendConfig, ChatMessage, HttpBackend, ScriptedBackend, build_backend, complete
from llm.exceptions import (
    FixtureExhaustedError,
    LLMAuthError,
    LLMConfigError,
    LLMTransportError,
    NoMatchingResponseError,
)
from llm.parsing import ACTION, FINAL_ANSWER, MALFORMED, format_turn, parse_action_input, parse_turn
from llm.prompts import render_critic_prompt, render_pipeline_prompt, render_reasoner_prompt
from oversight.intents import detect_question_intents
from toolkit.registry import Observation, ToolCall


class ParseTurnTests(SimpleTestCase):
    def test_action_on_one_line(self):
        turn = parse_turn('Thought: look at the start\nAction: slice_series, Action Input: {a, 0, 10}')
        self.assertEqual(turn.variant, ACTION)
        self.assertEqual(turn.thought, 'look at the start')
        self.assertEqual(turn.action.tool, 'slice_series')
        self.assertEqual(turn.action.arguments, ['a', 0, 10])

    def test_action_on_separate_lines(self):
        turn = parse_turn('Thought: t\nAction: summary_stats\nAction Input: {"name": "a"}')
        self.assertEqual(turn.action.tool, 'summary_stats')
        self.assertEqual(turn.action.arguments, {'name': 'a'})

    def test_invented_observation_is_cut(self):
        turn = parse_turn('Thought: t\nAction: summary_stats\nAction Input: a\nObservation: mean=3')
        self.assertEqual(turn.action.action_input, 'a')
        self.assertEqual(turn.action.arguments, ['a'])

    def test_final_answer(self):
        turn = parse_turn('Thought: I now know the final answer\nFinal Answer: B) middle')
        self.assertEqual(turn.variant, FINAL_ANSWER)
        self.assertEqual(turn.final_answer, 'B) middle')
        self.assertEqual(turn.thought, 'I now know the final answer')

    def test_final_answer_wins_over_action(self):
        turn = parse_turn('Thought: t\nAction: summary_stats\nAction Input: a\nFinal Answer: 3')
        self.assertEqual(turn.variant, FINAL_ANSWER)
        self.assertEqual(turn.final_answer, '3')

    def test_malformed_turns(self):
        cases = {
            'just some prose': 'missing Thought:',
            'Thought: hmm': 'missing Action:',
            'Thought: hmm\nAction: summary_stats': 'missing Action Input:',
            'Thought: hmm\nAction: two tools\nAction Input: a': "Action must name one tool, got 'two tools'",
            'Thought: done\nFinal Answer:   ': 'empty Final Answer:',
        }
        for text, diagnostic in cases.items():
            with self.subTest(text=text):
                turn = parse_turn(text)
                self.assertEqual(turn.variant, MALFORMED)
                self.assertEqual(turn.diagnostic, diagnostic)

    def test_format_turn_reparses(self):
        turn = parse_turn('Thought: t\nAction: autocorr, Action Input: {a, 2}')
        self.assertEqual(parse_turn(format_turn(turn)).action.arguments, ['a', 2])


class ParseActionInputTests(SimpleTestCase):
    def test_keyword_items(self):
        self.assertEqual(parse_action_input('{name=a, lag=3}'), {'name': 'a', 'lag': 3})

    def test_quoted_names_and_nested_lists(self):
        self.assertEqual(parse_action_input('["Solar panel 1", [0, 24]]'), ['Solar panel 1', [0, 24]])
        self.assertEqual(parse_action_input("'Solar panel 1', 4"), ['Solar panel 1', 4])

    def test_json_prefix(self):
        self.assertEqual(parse_action_input('json {"name": "a"}'), {'name': 'a'})

    def test_bare_names_with_spaces(self):
        self.assertEqual(parse_action_input('{Solar panel 1, Solar panel 2}'), ['Solar panel 1', 'Solar panel 2'])


class ScriptedBackendTests(SimpleTestCase):
    def messages(self, text):
        return [ChatMessage('user', text)]

    def test_plays_entries_in_order(self):
        backend = ScriptedBackend(['first', 'second'])
        self.assertEqual(backend.complete(self.messages('a')), 'first')
        self.assertEqual(backend.complete(self.messages('b')), 'second')
        with self.assertRaises(FixtureExhaustedError):
            backend.complete(self.messages('c'))

    def test_contains_and_repeat(self):
        backend = ScriptedBackend([
            {'match': {'contains': 'Current observation:'}, 'response': 'looks fine', 'repeat': True},
            'reasoner turn',
        ])
        self.assertEqual(backend.complete(self.messages('Question: x')), 'reasoner turn')
        self.assertEqual(backend.complete(self.messages('Current observation: 3')), 'looks fine')
        self.assertEqual(backend.complete(self.messages('Current observation: 4')), 'looks fine')
        with self.assertRaises(FixtureExhaustedError):
            backend.complete(self.messages('Question: x'))

    def test_ordinal_match(self):
        backend = ScriptedBackend([{'match': {'ordinal': 2}, 'response': 'second call'}, 'any call'])
        self.assertEqual(backend.complete(self.messages('a')), 'any call')
        self.assertEqual(backend.complete(self.messages('b')), 'second call')

    def test_no_matching_entry(self):
        backend = ScriptedBackend([{'match': {'contains': 'critic'}, 'response': 'x'}])
        with self.assertRaises(NoMatchingResponseError):
            backend.complete(self.messages('reasoner'))

    def test_invalid_fixture(self):
        with self.assertRaises(LLMConfigError):
            ScriptedBackend([{'match': {'ordinal': 1, 'contains': 'x'}, 'response': 'y'}])
        with self.assertRaises(LLMConfigError):
            ScriptedBackend([42])

    def test_from_file(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / 'fixture.json'
            path.write_text(json.dumps({'entries': ['only']}))
            backend = build_backend(BackendConfig.from_data({'kind': 'scripted', 'fixture': str(path)}))
            self.assertEqual(complete(backend, self.messages('q')), 'only')

    def test_chat_message_validation(self):
        with self.assertRaises(LLMConfigError):
            ChatMessage('tool', 'x')
        with self.assertRaises(LLMConfigError):
            ChatMessage('user', '')


class BackendConfigTests(SimpleTestCase):
    def test_http_needs_endpoint_model_and_auth(self):
        with self.assertRaisesMessage(LLMConfigError, 'http backend needs model, auth'):
            BackendConfig.from_data({'kind': 'http', 'endpoint': 'https://api.example.com/v1'})

    def test_scripted_needs_one_source(self):
        with self.assertRaises(LLMConfigError):
            BackendConfig.from_data({'kind': 'scripted'})
        with self.assertRaises(LLMConfigError):
            BackendConfig.from_data({'kind': 'scripted', 'fixture': 'a.json', 'entries': ['x']})

    @override_settings(TSAGENT={'LLM': {
        'KIND': 'http', 'ENDPOINT': 'https://api.example.com/v1', 'MODEL': 'gpt-4o-mini',
        'AUTH_ENV': 'OPENAI_API_KEY', 'TEMPERATURE': 0.0, 'MAX_RETRIES': 2, 'TIMEOUT': 30.0,
    }})
    def test_from_settings_with_overrides(self):
        config = BackendConfig.from_settings()
        self.assertEqual((config.kind, config.model, config.max_retries), ('http', 'gpt-4o-mini', 2))
        scripted = BackendConfig.from_settings(kind='scripted', fixture='f.json', model=None)
        self.assertEqual((scripted.kind, scripted.fixture, scripted.endpoint), ('scripted', 'f.json', None))


def chat_response(text):
    return SimpleNamespace(choices=[SimpleNamespace(message=SimpleNamespace(content=text))])


class HttpBackendTests(SimpleTestCase):
    def setUp(self):
        self.config = BackendConfig.from_data({
            'kind': 'http',
            'endpoint': 'https://api.example.com/v1',
            'model': 'gpt-4o-mini',
            'auth': 'TSAGENT_TEST_KEY',
            'max_retries': 1,
        })
        self.request = httpx.Request('POST', 'https://api.example.com/v1/chat/completions')

    def test_missing_key(self):
        with mock.patch.dict(os.environ, {}, clear=True):
            with self.assertRaisesMessage(LLMAuthError, 'TSAGENT_TEST_KEY'):
                HttpBackend(self.config)

    def test_sends_messages_and_key(self):
        with mock.patch.dict(os.environ, {'TSAGENT_TEST_KEY': 'sk-test'}), \
                mock.patch('llm.backends.openai.OpenAI') as client_class:
            client_class.return_value.chat.completions.create.return_value = chat_response('Final Answer: 3')
            backend = HttpBackend(self.config)
            reply = backend.complete([ChatMessage('user', 'hello')])

        self.assertEqual(reply, 'Final Answer: 3')
        client_class.assert_called_once_with(
            api_key='sk-test', base_url='https://api.example.com/v1', timeout=60.0, max_retries=0,
        )
        client_class.return_value.chat.completions.create.assert_called_once_with(
            model='gpt-4o-mini', messages=[{'role': 'user', 'content': 'hello'}], temperature=0.0,
        )

    def test_retries_connection_errors(self):
        with mock.patch.dict(os.environ, {'TSAGENT_TEST_KEY': 'sk-test'}), \
                mock.patch('llm.backends.openai.OpenAI') as client_class, \
                mock.patch('tenacity.nap.time.sleep'):
            create = client_class.return_value.chat.completions.create
            create.side_effect = [openai.APIConnectionError(request=self.request), chat_response('ok')]
            self.assertEqual(HttpBackend(self.config).complete([ChatMessage('user', 'hi')]), 'ok')
            self.assertEqual(create.call_count, 2)

    def test_gives_up_after_retries(self):
        with mock.patch.dict(os.environ, {'TSAGENT_TEST_KEY': 'sk-test'}), \
                mock.patch('llm.backends.openai.OpenAI') as client_class, \
                mock.patch('tenacity.nap.time.sleep'):
            create = client_class.return_value.chat.completions.create
            create.side_effect = openai.APIConnectionError(request=self.request)
            with self.assertRaisesMessage(LLMTransportError, 'after 2 attempt(s)'):
                HttpBackend(self.config).complete([ChatMessage('user', 'hi')])

    def test_rejected_credentials(self):
        response = httpx.Response(401, request=self.request)
        with mock.patch.dict(os.environ, {'TSAGENT_TEST_KEY': 'sk-bad'}), \
                mock.patch('llm.backends.openai.OpenAI') as client_class:
            client_class.return_value.chat.completions.create.side_effect = openai.AuthenticationError(
                'invalid key', response=response, body=None,
            )
            with self.assertRaises(LLMAuthError):
                HttpBackend(self.config).complete([ChatMessage('user', 'hi')])


class PromptTests(SimpleTestCase):
    catalog = [
        {'name': 'summary_stats', 'family': 'num', 'description': 'Summary statistics.',
         'output_kind': 'record', 'parameters': [{'name': 'name', 'type': 'series', 'required': True}]},
        {'name': 'trend_classifier', 'family': 'det', 'description': 'Trend label.',
         'output_kind': 'category', 'parameters': [{'name': 'name', 'type': 'series', 'required': True}]},
    ]

    def observation(self, seq=1):
        return Observation(kind='category', value='up', source=ToolCall('trend_classifier', {'name': 'a'}),
                           seq=seq, diagnostics={'span': ['a', 0, 9]})

    def test_reasoner_prompt_without_steps(self):
        messages = render_reasoner_prompt(self.catalog, 'Is it rising?', ReasoningTrace('Is it rising?'))
        self.assertEqual(len(messages), 1)
        text = messages[0].content
        self.assertTrue(text.startswith('You are tasked with answering the following question.'))
        self.assertIn('Action: the tool to use, chosen from [summary_stats, trend_classifier]', text)
        self.assertIn(json.dumps(self.catalog[0]), text)
        self.assertTrue(text.endswith('Begin!\n\nQuestion: Is it rising?'))
        self.assertNotIn('Current observation:', text)

    def test_reasoner_prompt_appends_steps(self):
        trace = ReasoningTrace('Is it rising?')
        trace.append(Step(k=1, thought='check the trend', action=ToolCall('trend_classifier', {'name': 'a'}),
                          action_input='{a}', observation=self.observation(), feedback='Looks right.'))
        text = render_reasoner_prompt(self.catalog, 'Is it rising?', trace)[0].content
        self.assertTrue(text.endswith(
            'Question: Is it rising?\n\n'
            'Thought: check the trend\nAction: trend_classifier\nAction Input: {a}\n'
            'Observation: up\nFeedback: Looks right.'
        ))

    def test_critic_prompt(self):
        intent = detect_question_intents('Is the series trending upward?')
        log = EvidenceLog(intent, ['a'])
        observation = self.observation()
        log.append(observation)
        step = Step(k=1, thought='t', action=observation.source, action_input='{a}', observation=observation)
        system, user = render_critic_prompt(step, log, intent)
        self.assertEqual(system.role, 'system')
        self.assertIn('You are the critic reviewing the reasoning process.', system.content)
        self.assertIn('Question intent: trend_direction', user.content)
        self.assertIn('Gap set: (none)', user.content)
        self.assertIn('Current observation: up', user.content)
        self.assertIn('[1] trend_classifier {"name": "a"} -> up', user.content)

    def test_pipeline_prompt(self):
        text = render_pipeline_prompt(self.catalog, 'detrend then autocorrelate')[0].content
        self.assertIn('Request: detrend then autocorrelate', text)
        self.assertNotIn('{tool_descs}', text)
