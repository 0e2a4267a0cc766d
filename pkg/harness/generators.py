"""
Synthetic benchmark questions with known answers.

Every generator is a function of one integer seed: it draws its parameters
and its noise from `numpy.random.default_rng(seed)`, so a question can be
rebuilt bit for bit from the seed stored in its provenance.
"""
import logging

import numpy as np

from harness.datasets import BenchQuestion, series_payload
from harness.exceptions import UnknownCategoryError

logger = logging.getLogger(__name__)

SEED_STRIDE = 100003
HOURS_PER_WEEK = 168
WEEKS = 4
WEEK_WORDS = ('first', 'second', 'third', 'fourth')
CLOUDY_FACTOR = 0.4
CLOUDY_RATIO = 0.7
SEGMENTS = ('beginning', 'middle', 'end')

CLOUDY_TEMPLATE = (
    'the first time series has cloudy periods for the (select all that apply from first, second, third, '
    'fourth) week, whereas the second time series are cloudy for the (select all that apply from first, '
    'second, third, fourth) week.'
)
CLOUDY_QUESTION = (
    'You are a time series analysis expert. The time series represents hourly solar output from a panel '
    'over a month, influenced by a period of cloudy weather. Please analyze the time series features and '
    'answer the following questions:\n\n'
    'How does the duration of cloudy periods within the month compare between the first and second time '
    'series?\n\n'
    'Please strictly follow the output format as:\n\n'
    f'|{CLOUDY_TEMPLATE}|\n\n'
    'Then briefly explain your answer.'
)


def options_block(options):
    return '\n'.join(['Options:'] + [f'{chr(65 + i)}) {text}' for i, text in enumerate(options)])


def ar1(rng, phi, size, burn=100):
    noise = rng.normal(size=size + burn)
    x = np.empty_like(noise)
    x[0] = noise[0]
    for t in range(1, noise.size):
        x[t] = phi * x[t - 1] + noise[t]
    return x[burn:]


def _choice(rng, items):
    return items[int(rng.integers(len(items)))]


def trend(rng):
    label = _choice(rng, ('up', 'down', 'flat'))
    size = 200
    slope = {'up': 1.0, 'down': -1.0, 'flat': 0.0}[label] * float(rng.uniform(0.03, 0.08))
    level = float(rng.normal(0, 5))
    x = level + slope * np.arange(size) + rng.normal(0, 1, size)
    question = 'What is the overall trend of the time series "series"? Answer with up, down or flat.'
    return question, {'series': x}, label, (), {'label': label, 'slope': slope, 'level': level, 'length': size}


def seasonality(rng):
    label = _choice(rng, ('strong', 'weak', 'none'))
    size = 360
    period = int(_choice(rng, (12, 24, 30)))
    amplitude = {'strong': 3.0, 'weak': 1.2, 'none': 0.0}[label]
    phase = float(rng.uniform(0, 2 * np.pi))
    t = np.arange(size)
    x = amplitude * np.sin(2 * np.pi * t / period + phase) + rng.normal(0, 1, size)
    question = 'How strong is the seasonality of the time series "series"? Answer with strong, weak or none.'
    params = {'label': label, 'period': period, 'amplitude': amplitude, 'phase': phase, 'length': size}
    return question, {'series': x}, label, (), params


def anomaly_location(rng):
    size = 300
    label = _choice(rng, SEGMENTS)
    third = SEGMENTS.index(label)
    low, high = third * size // 3 + 5, (third + 1) * size // 3 - 5
    position = int(rng.integers(low, high))
    t = np.arange(size)
    x = np.sin(2 * np.pi * t / 24) + rng.normal(0, 0.1, size)
    sign = 1.0 if rng.uniform() < 0.5 else -1.0
    x[position] += sign * 2.5
    question = 'In which part of the time series "series" does the anomaly occur?\n' + options_block(SEGMENTS)
    return question, {'series': x}, label, SEGMENTS, {'position': position, 'sign': sign, 'length': size}


def stationarity(rng):
    label = _choice(rng, ('stationary', 'nonstationary'))
    size = 300
    x = ar1(rng, 0.5, size) if label == 'stationary' else rng.normal(size=size).cumsum()
    question = 'Is the time series "series" stationary or nonstationary?'
    return question, {'series': x}, label, (), {'label': label, 'length': size}


def noise(rng):
    label = _choice(rng, ('white', 'red'))
    size = 500
    x = rng.normal(size=size) if label == 'white' else ar1(rng, 0.9, size)
    question = 'Which kind of noise does the time series "series" contain: white or red?'
    return question, {'series': x}, label, (), {'label': label, 'length': size}


def _sawtooth(t, period):
    return 2 * ((t / period) % 1.0) - 1


def similarity_choice(rng):
    size = 200
    t = np.arange(size)
    period = float(rng.uniform(30, 60))
    phase = float(rng.uniform(0, 2 * np.pi))
    shape = np.sin(2 * np.pi * t / period + phase)
    reference = shape + rng.normal(0, 0.1, size)
    scale, offset = float(rng.uniform(0.5, 2.0)), float(rng.normal(0, 3))
    match = scale * shape + offset + rng.normal(0, 0.1, size)
    sawtooth = _sawtooth(t, float(rng.uniform(15, 25))) + rng.normal(0, 0.1, size)
    walk = rng.normal(size=size).cumsum()
    candidates = [match, sawtooth, walk]
    order = [int(i) for i in rng.permutation(3)]
    names = [f'candidate_{i + 1}' for i in range(3)]
    series = {'reference': reference}
    for name, source in zip(names, order):
        series[name] = candidates[source]
    answer = names[order.index(0)]
    question = (
        'Which candidate series is most similar in shape to the reference series "reference"?\n'
        + options_block(names)
    )
    params = {'period': period, 'phase': phase, 'scale': scale, 'offset': offset, 'order': order, 'length': size}
    return question, series, answer, tuple(names), params


def lagged_correlation(rng):
    size = 300
    lag = int(rng.integers(1, 9))
    x = rng.normal(size=size)
    y = np.concatenate([rng.normal(size=lag), x[:-lag]]) + rng.normal(0, 0.2, size)
    question = 'By how many time steps does series "y" lag behind series "x"?'
    return question, {'x': x, 'y': y}, str(lag), (), {'lag': lag, 'length': size}


def granger_direction(rng):
    size = 400
    driver = rng.normal(size=size)
    response = np.empty(size)
    response[0] = rng.normal()
    response[1:] = 0.9 * driver[:-1] + rng.normal(size=size - 1)
    reversed_ = bool(rng.uniform() < 0.5)
    first, second = (response, driver) if reversed_ else (driver, response)
    question = 'Does series_a Granger-cause series_b? Answer yes or no.'
    answer = 'no' if reversed_ else 'yes'
    return question, {'series_a': first, 'series_b': second}, answer, (), {'reversed': reversed_, 'length': size}


def solar_series(rng, cloudy_weeks, capacity=1.0, spike=None):
    """
    Hourly output over four weeks: a clipped daily arc (zero at night),
    about 1% multiplicative noise and the cloudy weeks scaled down.
    """
    size = HOURS_PER_WEEK * WEEKS
    hours = np.arange(size) % 24
    arc = np.clip(1.5 * np.sin(np.pi * (hours - 6) / 12), 0.0, 1.0)
    x = capacity * arc * (1 + rng.normal(0, 0.01, size))
    for week in cloudy_weeks:
        x[week * HOURS_PER_WEEK:(week + 1) * HOURS_PER_WEEK] *= CLOUDY_FACTOR
    if spike is not None:
        position, height = spike
        x[position] += height * capacity
    return x


def cloudy_weeks_of(x):
    """Weeks whose mean output is below 70% of the sunniest week's."""
    means = [float(np.mean(x[w * HOURS_PER_WEEK:(w + 1) * HOURS_PER_WEEK])) for w in range(WEEKS)]
    return [w for w, mean in enumerate(means) if mean < CLOUDY_RATIO * max(means)]


def week_list(weeks):
    words = [WEEK_WORDS[w] for w in sorted(weeks)]
    if len(words) == 1:
        return words[0]
    return ', '.join(words[:-1]) + ' and ' + words[-1]


def cloudy_answer(first_weeks, second_weeks):
    return (
        f'the first time series has cloudy periods for the {week_list(first_weeks)} week, '
        f'whereas the second time series are cloudy for the {week_list(second_weeks)} week.'
    )


def _cloudy_subset(rng):
    count = int(rng.integers(1, WEEKS))
    return sorted(int(w) for w in rng.choice(WEEKS, size=count, replace=False))


def two_series_cloudy_week(rng):
    first_weeks, second_weeks = _cloudy_subset(rng), _cloudy_subset(rng)
    series = {
        'Solar panel 1': solar_series(rng, first_weeks),
        'Solar panel 2': solar_series(rng, second_weeks),
    }
    params = {'first_weeks': first_weeks, 'second_weeks': second_weeks}
    return CLOUDY_QUESTION, series, cloudy_answer(first_weeks, second_weeks), (), params


GENERATORS = {
    'trend': trend,
    'seasonality': seasonality,
    'anomaly_location': anomaly_location,
    'stationarity': stationarity,
    'noise': noise,
    'similarity_choice': similarity_choice,
    'lagged_correlation': lagged_correlation,
    'granger_direction': granger_direction,
    'two_series_cloudy_week': two_series_cloudy_week,
}

CATEGORIES = tuple(GENERATORS)


def make_question(category, seed, question_id=None):
    generator = GENERATORS.get(category)
    if generator is None:
        raise UnknownCategoryError(category, CATEGORIES)
    question, series, answer, options, params = generator(np.random.default_rng(seed))
    return BenchQuestion(
        id=question_id or f'{category}-{seed}',
        category=category,
        question=question,
        series=tuple({'name': name, 'payload': series_payload(values)} for name, values in series.items()),
        answer=answer,
        options=tuple(options),
        provenance={'kind': 'synthetic', 'seed': seed, 'params': params},
    )


def generate_synthetic(category, count, seed):
    """`count` questions of one category; question i uses seed * 100003 + i."""
    if category not in GENERATORS:
        raise UnknownCategoryError(category, CATEGORIES)
    questions = [
        make_question(category, seed * SEED_STRIDE + i, question_id=f'{category}-{seed}-{i}')
        for i in range(count)
    ]
    logger.debug('Generated %d %s question(s) from seed %d', count, category, seed)
    return questions


def regenerate(question):
    """The question rebuilt from its synthetic provenance."""
    provenance = question.provenance or {}
    if provenance.get('kind') != 'synthetic':
        raise UnknownCategoryError(question.category, CATEGORIES)
    return make_question(question.category, provenance['seed'], question_id=question.id)


CASE_STUDY_SEED = 20240
CASE_STUDY_WEEKS = ([1], [1, 3])
CASE_STUDY_SPIKE = (388, 0.6)


def case_study_question():
    """The solar-panel pair used by the replayed case study: a spike at hour 388 in the second panel."""
    rng = np.random.default_rng(CASE_STUDY_SEED)
    first_weeks, second_weeks = CASE_STUDY_WEEKS
    series = {
        'Solar panel 1': solar_series(rng, first_weeks),
        'Solar panel 2': solar_series(rng, second_weeks, spike=CASE_STUDY_SPIKE),
    }
    return BenchQuestion(
        id='cloudy-case-study',
        category='two_series_cloudy_week',
        question=CLOUDY_QUESTION,
        series=tuple({'name': name, 'payload': series_payload(values)} for name, values in series.items()),
        answer=cloudy_answer(first_weeks, second_weeks),
        provenance={'kind': 'synthetic', 'seed': CASE_STUDY_SEED,
                    'params': {'first_weeks': first_weeks, 'second_weeks': second_weeks,
                               'spike': list(CASE_STUDY_SPIKE)}},
    )
