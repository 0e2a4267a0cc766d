"""
Statistical calibration of the detectors and relation tools against
generators whose truth is known, plus brute-force oracles for the numeric
kernels. Seeds are fixed so every run sees the same draws.
"""
import itertools
import math

import numpy as np
from django.test import SimpleTestCase

from series.store import SeriesStore
from toolkit.registry import ToolCall
from toolkit.tests import make_series
from toolkit.tools import build_registry
from toolkit.tools.relations import dtw


def ar1(rng, phi, size, burn=100):
    noise = rng.normal(size=size + burn)
    x = np.empty_like(noise)
    x[0] = noise[0]
    for t in range(1, noise.size):
        x[t] = phi * x[t - 1] + noise[t]
    return x[burn:]


def plain_mean(values):
    return math.fsum(values) / len(values)


def plain_pearson(a, b):
    ma, mb = plain_mean(a), plain_mean(b)
    cov = math.fsum((u - ma) * (v - mb) for u, v in zip(a, b))
    va = math.fsum((u - ma) ** 2 for u in a)
    vb = math.fsum((v - mb) ** 2 for v in b)
    return cov / math.sqrt(va * vb)


def plain_lagged(x, y, lag):
    pairs = [(x[t], y[t + lag]) for t in range(len(x)) if 0 <= t + lag < len(y)]
    return [p[0] for p in pairs], [p[1] for p in pairs]


def plain_quantile(values, q):
    ordered = sorted(values)
    h = (len(ordered) - 1) * q
    low = math.floor(h)
    high = min(low + 1, len(ordered) - 1)
    return ordered[low] + (h - low) * (ordered[high] - ordered[low])


def plain_std(values):
    m = plain_mean(values)
    return math.sqrt(math.fsum((v - m) ** 2 for v in values) / (len(values) - 1))


class CalibrationMixin:
    def setUp(self):
        self.registry = build_registry()

    def run_tool(self, tool, series, **args):
        store = SeriesStore()
        names = []
        for position, values in enumerate(series, start=1):
            name = f's{position}'
            store.add(make_series(name, values))
            names.append(name)
        if len(names) == 1:
            args['name'] = names[0]
        else:
            args['name1'], args['name2'] = names
        observation = self.registry.dispatch(ToolCall(tool, args), store)
        self.assertFalse(observation.is_error, observation.error)
        return observation

    def rate(self, seeds, make, tool, expected, **args):
        hits = 0
        for seed in seeds:
            series = make(np.random.default_rng(seed))
            observation = self.run_tool(tool, series, **args)
            hits += self.label(observation) == expected
        return hits / len(seeds)

    @staticmethod
    def label(observation):
        if observation.kind == 'record':
            return observation.value.get('decision')
        return observation.value


class DetectorCalibrationTests(CalibrationMixin, SimpleTestCase):
    def test_trend_on_white_noise_is_flat(self):
        # at the default level the flat rate is 1 - alpha up to sampling error
        def noise(rng):
            return [rng.normal(size=200)]

        rate = self.rate(range(500), noise, 'trend_classifier', 'flat')
        strict = self.rate(range(500), noise, 'trend_classifier', 'flat', alpha=0.01)
        self.assertGreaterEqual(rate, 0.95 - 3 * (0.05 * 0.95 / 500) ** 0.5)
        self.assertGreaterEqual(strict, 0.95)

    def test_trend_on_ramps(self):
        for seed in range(100):
            rng = np.random.default_rng(seed)
            size = int(rng.integers(20, 300))
            slope = rng.uniform(0.01, 2.0) * rng.choice([-1.0, 1.0])
            ramp = rng.uniform(-50, 50) + slope * np.arange(size)
            with self.subTest(seed=seed):
                self.assertEqual(self.run_tool('trend_classifier', [ramp]).value, 'up' if slope > 0 else 'down')

    def test_noise_profile(self):
        white = self.rate(range(200), lambda rng: [rng.normal(size=500)], 'noise_profile', 'white')
        red = self.rate(range(200), lambda rng: [ar1(rng, 0.9, 500)], 'noise_profile', 'red')
        self.assertGreaterEqual(white, 0.95)
        self.assertGreaterEqual(red, 0.95)

    def test_differenced_uncorrelated_ar1_is_white(self):
        observation = self.run_tool('noise_profile', [np.diff(ar1(np.random.default_rng(11), 0.0, 501))])
        self.assertEqual(observation.value, 'white')

    def test_stationarity(self):
        walk = self.rate(range(100), lambda rng: [rng.normal(size=500).cumsum()],
                         'stationarity_test', 'nonstationary')
        adf = self.rate(range(100), lambda rng: [rng.normal(size=500)], 'stationarity_test', 'stationary')
        kpss = self.rate(range(100), lambda rng: [rng.normal(size=500)], 'stationarity_test', 'stationary',
                         test='kpss')
        self.assertGreaterEqual(walk, 0.90)
        self.assertGreaterEqual(adf, 0.90)
        self.assertGreaterEqual(kpss, 0.90)

    def test_seasonality_on_white_noise_is_none(self):
        rate = self.rate(range(50), lambda rng: [rng.normal(size=300)], 'seasonality_detector', 'none')
        self.assertGreaterEqual(rate, 0.90)

    def test_anomaly_spike_survives_noise(self):
        t = np.arange(744)
        hits = 0
        for seed in range(200):
            rng = np.random.default_rng(seed)
            position = int(rng.integers(20, 724))
            x = np.sin(2 * np.pi * t / 24) + rng.normal(0, 0.05, t.size)
            x[position] += 8 * x.std()
            observation = self.run_tool('anomaly_classifier', [x])
            hits += position in observation.value and observation.diagnostics['most_severe'] == position
        self.assertGreaterEqual(hits, 190)

    def test_seasonality_period_of_sinusoids(self):
        hits = 0
        for seed in range(200):
            rng = np.random.default_rng(seed)
            period = int(rng.integers(6, 31))
            t = np.arange(12 * period)
            x = np.sin(2 * np.pi * t / period + rng.uniform(0, 2 * np.pi)) + rng.normal(0, 0.1, t.size)
            observation = self.run_tool('seasonality_detector', [x])
            found = observation.diagnostics['period']
            hits += found is not None and abs(found - period) <= 1
        self.assertGreaterEqual(hits, 190)

    def test_change_point_location_on_steps(self):
        hits = 0
        for seed in range(200):
            rng = np.random.default_rng(seed)
            location = int(rng.integers(40, 161))
            x = rng.normal(0, 1, 200)
            x[location:] += rng.choice([-3.0, 3.0])
            points = self.run_tool('change_point_detector', [x]).value
            hits += len(points) == 1 and abs(points[0] - location) <= 5
        self.assertGreaterEqual(hits, 180)


class RelationCalibrationTests(CalibrationMixin, SimpleTestCase):
    def test_lagged_copy_correlates(self):
        rng = np.random.default_rng(1)
        x = rng.normal(size=400)
        y = np.roll(x, 3) + rng.normal(0, 0.1, 400)
        self.assertGreater(self.run_tool('corr_relation', [x, y], lag=3).value, 0.9)

    def test_best_lag_recovers_shift(self):
        rng = np.random.default_rng(2)
        x = rng.normal(size=300)
        y = np.concatenate([rng.normal(size=5), x[:-5]])
        self.assertEqual(self.run_tool('cross_correlation', [x, y]).value['best_lag'], 5)

    def test_ccf_matches_corr_relation(self):
        rng = np.random.default_rng(3)
        x, y = rng.normal(size=120), rng.normal(size=120)
        ccf = dict(self.run_tool('cross_correlation', [x, y], max_lag=4).value['ccf'])
        for lag in (-4, -1, 0, 2, 4):
            single = self.run_tool('corr_relation', [x, y], lag=lag).value
            self.assertAlmostEqual(ccf[lag], single, delta=1e-9)

    def test_independent_noise_has_no_shape_similarity(self):
        rng = np.random.default_rng(4)
        score = self.run_tool('shape_similarity', [rng.normal(size=500), rng.normal(size=500)]).value
        self.assertLess(abs(score), 0.2)

    def causal_pair(self, rng, size=500):
        x = rng.normal(size=size)
        y = np.empty(size)
        y[0] = rng.normal()
        y[1:] = 0.9 * x[:-1] + rng.normal(size=size - 1)
        return x, y

    def test_granger_detects_causal_generator(self):
        hits = 0
        for seed in range(100):
            x, y = self.causal_pair(np.random.default_rng(seed))
            record = self.run_tool('granger_causality', [x, y]).value
            hits += record['decision'] == 'yes' and record['p_value'] < 0.01
        self.assertGreaterEqual(hits, 95)

    def test_granger_null_calibration(self):
        rate = self.rate(range(100), lambda rng: [rng.normal(size=500), rng.normal(size=500)],
                         'granger_causality', 'yes')
        self.assertLessEqual(rate, 0.10)

    def test_granger_is_directional(self):
        hits = 0
        for seed in range(100):
            rng = np.random.default_rng(seed)
            x = rng.normal(size=500)
            y = np.concatenate([[0.0], x[:-1]]) + rng.normal(0, 0.1, 500)
            forward = self.run_tool('granger_causality', [x, y]).value['decision']
            reverse = self.run_tool('granger_causality', [y, x]).value['decision']
            hits += forward == 'yes' and reverse == 'no'
        self.assertGreaterEqual(hits, 90)


class NumericOracleTests(CalibrationMixin, SimpleTestCase):
    SERIES = 100

    def random_series(self, seed, low=20, high=300):
        rng = np.random.default_rng(seed)
        return rng, rng.normal(rng.uniform(-5, 5), rng.uniform(0.1, 3), rng.integers(low, high))

    def test_summary_stats_match_direct_computation(self):
        for seed in range(self.SERIES):
            _, x = self.random_series(seed)
            record = self.run_tool('summary_stats', [x]).value
            values = x.tolist()
            self.assertAlmostEqual(record['mean'], plain_mean(values), delta=1e-9)
            self.assertAlmostEqual(record['std'], plain_std(values), delta=1e-9)
            self.assertEqual(record['min'], min(values))
            self.assertEqual(record['max'], max(values))

    def test_quantile_matches_sorted_interpolation(self):
        for seed in range(self.SERIES):
            rng, x = self.random_series(seed)
            q = float(rng.uniform(0.01, 0.99))
            value = self.run_tool('quantile_value', [x], q=q).value
            self.assertAlmostEqual(value, plain_quantile(x.tolist(), q), delta=1e-9)

    def test_autocorr_matches_direct_sums(self):
        for seed in range(self.SERIES):
            rng, x = self.random_series(seed)
            lag = int(rng.integers(0, 10))
            values = x.tolist()
            m = plain_mean(values)
            expected = (math.fsum((values[t] - m) * (values[t + lag] - m) for t in range(len(values) - lag))
                        / math.fsum((v - m) ** 2 for v in values))
            self.assertAlmostEqual(self.run_tool('autocorr', [x], lag=lag).value, expected, delta=1e-9)

    def test_corr_relation_matches_direct_sums(self):
        for seed in range(self.SERIES):
            rng, x = self.random_series(seed)
            y = 0.5 * x + rng.normal(size=x.size)
            lag = int(rng.integers(-5, 6))
            a, b = plain_lagged(x.tolist(), y.tolist(), lag)
            value = self.run_tool('corr_relation', [x, y], lag=lag).value
            self.assertAlmostEqual(value, plain_pearson(a, b), delta=1e-9)

    def test_cross_correlation_matches_direct_sums(self):
        for seed in range(self.SERIES):
            rng, x = self.random_series(seed, low=30, high=120)
            y = np.roll(x, int(rng.integers(0, 4))) + rng.normal(size=x.size)
            record = self.run_tool('cross_correlation', [x, y], max_lag=5).value
            expected = {lag: plain_pearson(*plain_lagged(x.tolist(), y.tolist(), lag)) for lag in range(-5, 6)}
            for lag, value in record['ccf']:
                self.assertAlmostEqual(value, expected[lag], delta=1e-9)
            best = max(expected, key=lambda lag: (abs(expected[lag]), -abs(lag), lag))
            self.assertEqual(record['best_lag'], best)

    def test_rolling_matches_windowed_recomputation(self):
        for seed in range(self.SERIES):
            rng, x = self.random_series(seed, low=20, high=120)
            stat = ('mean', 'std', 'quantile')[seed % 3]
            window, step = int(rng.integers(2, 15)), int(rng.integers(1, 4))
            store = SeriesStore([make_series('x', x)])
            call = ToolCall('rolling_stat', {'name': 'x', 'stat': stat, 'window': window, 'step': step, 'q': 0.25})
            observation = self.registry.dispatch(call, store)
            result = store.get(observation.value['name']).values[0]
            values = x.tolist()
            windows = [values[s:s + window] for s in range(0, len(values) - window + 1, step)]
            if stat == 'mean':
                expected = [plain_mean(w) for w in windows]
            elif stat == 'std':
                expected = [plain_std(w) for w in windows]
            else:
                expected = [plain_quantile(w, 0.25) for w in windows]
            np.testing.assert_allclose(result, expected, rtol=0, atol=1e-9)

    def test_autocorr_of_generators(self):
        rng = np.random.default_rng(7)
        self.assertAlmostEqual(self.run_tool('autocorr', [ar1(rng, 0.8, 5000)]).value, 0.8, delta=0.05)
        self.assertLess(abs(self.run_tool('autocorr', [rng.normal(size=5000)]).value), 0.05)

    def test_volatility_is_rolling_std_of_differences(self):
        rng = np.random.default_rng(9)
        x = np.concatenate([rng.normal(0, 0.1, 200), rng.normal(0, 2.0, 200)]).cumsum()
        store = SeriesStore([make_series('x', x)])
        vol = self.registry.dispatch(ToolCall('volatility', {'name': 'x', 'window': 10}), store)
        values = store.get(vol.value['name']).values[0]
        self.assertLess(values[:150].mean(), values[-150:].mean())

        store.add(make_series('d', np.diff(x)))
        rolled = self.registry.dispatch(ToolCall('rolling_stat', {'name': 'd', 'stat': 'std', 'window': 10}), store)
        np.testing.assert_allclose(values, store.get(rolled.value['name']).values[0])

    @staticmethod
    def brute_force_dtw(x, y):
        n, m = len(x), len(y)
        best = np.inf

        def walk(i, j, cost):
            nonlocal best
            cost += (x[i] - y[j]) ** 2
            if cost >= best:
                return
            if (i, j) == (n - 1, m - 1):
                best = cost
                return
            for di, dj in ((1, 0), (0, 1), (1, 1)):
                if i + di < n and j + dj < m:
                    walk(i + di, j + dj, cost)

        walk(0, 0, 0.0)
        return best

    def test_dtw_matches_path_enumeration(self):
        rng = np.random.default_rng(10)
        for n, m in itertools.product((1, 3, 6, 8), (2, 5, 8)):
            x, y = rng.normal(size=n), rng.normal(size=m)
            self.assertAlmostEqual(dtw(x, y), self.brute_force_dtw(x, y), delta=1e-9)

    def test_dtw_bounded_by_aligned_cost(self):
        rng = np.random.default_rng(12)
        for _ in range(10):
            x, y = rng.normal(size=8), rng.normal(size=8)
            self.assertLessEqual(dtw(x, y), float(np.sum((x - y) ** 2)) + 1e-12)
