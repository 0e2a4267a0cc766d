"""
Answer scoring: a prediction is correct when it resolves to the same
canonical answer as the reference under the question's answer schema.
"""
from oversight.intents import detect_question_intents


def score_answer(question, predicted, intent=None):
    """Whether `predicted` matches the reference answer; a missing prediction never does."""
    if predicted is None:
        return False
    intent = intent or detect_question_intents(question.question)
    schema = intent.schema
    expected = schema.resolve(question.answer)
    if expected is None and schema.type == 'mcq' and question.options:
        expected = schema.resolve(f'{chr(65 + list(question.options).index(question.answer))})')
    got = schema.resolve(predicted)
    if got is None or expected is None:
        return False
    if schema.type == 'numeric':
        tolerance = schema.tolerance or 0.0
        return abs(got - expected) <= tolerance + 1e-9
    return got == expected
