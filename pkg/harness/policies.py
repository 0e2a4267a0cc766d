"""
Scripted policies for benchmark runs without a live model.

A policy turns a benchmark question into an inline scripted backend:

- ideal: calls the tools the question's intent needs, then answers with
  the reference answer;
- evidence-free: answers with the reference answer straight away and keeps
  doing so after every rejection.

Both open with a repeating critic entry so critic calls never consume the
reasoner's script.
"""
import json
import logging

from harness.exceptions import HarnessError
from llm.backends import BackendConfig
from oversight.intents import detect_question_intents
from oversight.predicates import ANY_TOOL

logger = logging.getLogger(__name__)

IDEAL = 'ideal'
EVIDENCE_FREE = 'evidence-free'
POLICIES = (IDEAL, EVIDENCE_FREE)

CRITIC_MARKER = 'Current observation:'
CRITIC_RESPONSE = 'The tool matches the sub-goal and the output is plausible.'
RELATION_TOOLS = ('shape_similarity', 'dtw_distance', 'corr_relation', 'cross_correlation', 'granger_causality')


def critic_entry():
    return {'match': {'contains': CRITIC_MARKER}, 'response': CRITIC_RESPONSE, 'repeat': True}


def action(thought, tool, **args):
    return f'Thought: {thought}\nAction: {tool}\nAction Input: {json.dumps(args, sort_keys=True)}'


def final_answer(answer):
    return f'Thought: I now know the final answer.\nFinal Answer: {answer}'


def _first(question):
    return question.series_names[0]


CATEGORY_CALLS = {
    'trend': lambda q: [action('Check the direction of the trend.', 'trend_classifier', name=_first(q))],
    'seasonality': lambda q: [action('Look for a seasonal period.', 'seasonality_detector', name=_first(q))],
    'anomaly_location': lambda q: [action('Locate the anomaly.', 'anomaly_classifier', name=_first(q))],
    'stationarity': lambda q: [action('Test for a unit root.', 'stationarity_test', name=_first(q))],
    'noise': lambda q: [action('Profile the noise.', 'noise_profile', name=_first(q))],
    'similarity_choice': lambda q: [
        action(f'Compare the reference with {name}.', 'shape_similarity', name1=q.series_names[0], name2=name)
        for name in q.series_names[1:]
    ],
    'lagged_correlation': lambda q: [
        action('Find the lag with the strongest cross-correlation.', 'cross_correlation',
               name1=q.series_names[0], name2=q.series_names[1], max_lag=10),
    ],
    'granger_direction': lambda q: [
        action('Run the Granger test.', 'granger_causality', name1=q.series_names[0], name2=q.series_names[1]),
    ],
    'two_series_cloudy_week': lambda q: [
        action(f'Split {name} into its four weeks.', 'segment_series', name=name, k=4)
        for name in q.series_names
    ],
}


def intent_calls(question):
    """Tool calls for a category without a recipe: one call per tool the required predicates name."""
    intent = detect_question_intents(question.question)
    names = question.series_names
    calls, seen = [], set()
    for predicate in intent.required:
        tool = predicate.tools[0]
        if tool == ANY_TOOL:
            targets = [('summary_stats', {'name': name}) for name in names]
        elif tool in RELATION_TOOLS and len(names) > 1:
            targets = [(tool, {'name1': names[0], 'name2': names[1]})]
        else:
            targets = [(tool, {'name': names[0]})]
        for target, args in targets:
            key = (target, json.dumps(args, sort_keys=True))
            if key not in seen:
                seen.add(key)
                calls.append(action(f'Gather evidence for {predicate.name}.', target, **args))
    return calls


def format_answer(question):
    """The reference answer in the form the question asks for."""
    if question.options:
        letter = chr(65 + list(question.options).index(question.answer))
        return f'{letter}) {question.answer}'
    return question.answer


def ideal_policy(question):
    calls = CATEGORY_CALLS.get(question.category, intent_calls)(question)
    entries = [critic_entry()] + calls + [final_answer(format_answer(question))]
    return BackendConfig.from_data({'kind': 'scripted', 'entries': entries})


def evidence_free_policy(question):
    entries = [
        critic_entry(),
        {'response': final_answer(format_answer(question)), 'repeat': True},
    ]
    return BackendConfig.from_data({'kind': 'scripted', 'entries': entries})


def policy_backend(name, question):
    if name == IDEAL:
        return ideal_policy(question)
    if name == EVIDENCE_FREE:
        return evidence_free_policy(question)
    raise HarnessError(f'unknown policy {name!r}; choose one of {", ".join(POLICIES)}')
