import json

import numpy as np
from django.contrib.auth import get_user_model
from django.test import SimpleTestCase
from rest_framework.test import APITestCase

from series.store import SeriesStore, TimeSeries
from toolkit.exceptions import PipelineError, RegistryError
from toolkit.pipelines import register_pipeline, validate_pipeline
from toolkit.registry import FAMILY_KINDS, ToolCall, ToolSpec
from toolkit.serializers import SeriesInfoSerializer
from toolkit.tools import build_registry


def make_series(name, values, index=None, channels=('value',)):
    values = np.asarray(values, dtype=float)
    if values.ndim == 1:
        values = values.reshape(1, -1)
    if index is None:
        index = np.arange(values.shape[1])
    return TimeSeries(name=name, channels=channels, index=index, values=values)


class ToolTestMixin:
    def setUp(self):
        self.store = SeriesStore()
        self.registry = build_registry()

    def add(self, name, values, **kwargs):
        return self.store.add(make_series(name, values, **kwargs))

    def call(self, tool, **args):
        return self.registry.dispatch(ToolCall(tool, args), self.store)

    def ok(self, tool, **args):
        observation = self.call(tool, **args)
        self.assertFalse(observation.is_error, observation.error)
        return observation

    def stored(self, observation):
        return self.store.get(observation.value['name'])


class CatalogTests(ToolTestMixin, SimpleTestCase):
    def test_builtin_catalog(self):
        names = self.registry.names()
        self.assertEqual(len(names), 27)
        self.assertEqual(names[:5], ['slice_series', 'segment_series', 'resample_series',
                                     'select_channel', 'normalize_series'])
        self.assertEqual(names[-1], 'custom_operator')

    def test_every_spec_fits_its_family(self):
        for spec in self.registry.specs():
            self.assertIn(spec.output_kind, FAMILY_KINDS[spec.family], spec.name)
            self.assertTrue(spec.description)

    def test_catalog_is_json(self):
        catalog = json.loads(self.registry.catalog_json())
        entry = next(item for item in catalog if item['name'] == 'anomaly_classifier')
        self.assertEqual(entry['family'], 'det')
        self.assertEqual(entry['output_kind'], 'index-set')
        self.assertEqual(
            [(p['name'], p['required']) for p in entry['parameters']],
            [('name', True), ('threshold', False), ('window', False)],
        )

    def test_position_parameters_state_the_reading_rule(self):
        entry = next(item for item in self.registry.catalog() if item['name'] == 'datapoint_value')
        at = next(p for p in entry['parameters'] if p['name'] == 'at')
        self.assertIn('in-range integers are positions', at['type'])
        self.assertIn('{"timestamp": t}', at['type'])

    def test_duplicate_registration_rejected(self):
        spec = self.registry.get('slice_series')
        with self.assertRaises(RegistryError):
            self.registry.register(spec)

    def test_family_kind_mismatch_rejected(self):
        with self.assertRaises(RegistryError):
            ToolSpec('bad', 'proc', 'real', 'wrong kind', SeriesInfoSerializer, lambda context, name: None)


class DispatchTests(ToolTestMixin, SimpleTestCase):
    def setUp(self):
        super().setUp()
        self.add('a', np.arange(10.0))
        self.add('b', np.arange(10.0) * 2)

    def test_valid_slice(self):
        observation = self.ok('slice_series', name='a', start=2, end=5)
        self.assertEqual(observation.kind, 'series')
        self.assertEqual(observation.value['name'], 'a#slice#1')
        self.assertEqual(observation.value['length'], 3)
        self.assertEqual(observation.seq, 1)

    def test_two_series_to_univariate_tool(self):
        observation = self.call('anomaly_classifier', name=['a', 'b'])
        self.assertTrue(observation.is_error)
        self.assertIn('Error when calling anomaly_classifier: x must be 1-D', observation.error)
        self.assertIn('The correct usage', observation.error)
        self.assertEqual(
            [p['name'] for p in observation.diagnostics['parameters']],
            ['name', 'threshold', 'window'],
        )

    def test_unregistered_tool(self):
        observation = self.call('fft_magic', name='a')
        self.assertTrue(observation.is_error)
        self.assertIn('slice_series', observation.error)
        self.assertEqual(observation.diagnostics['registered_tools'], self.registry.names())

    def test_unknown_series_lists_known(self):
        observation = self.call('series_info', name='zzz')
        self.assertTrue(observation.is_error)
        self.assertIn("['a', 'b']", observation.error)

    def test_unexpected_argument(self):
        observation = self.call('series_info', name='a', colour='red')
        self.assertTrue(observation.is_error)
        self.assertIn("unexpected argument(s) ['colour']", observation.error)

    def test_sequence_numbers_increase(self):
        seqs = [self.call('series_info', name='a').seq for _ in range(3)]
        self.assertEqual(seqs, [1, 2, 3])

    def test_dispatch_leaves_inputs_untouched(self):
        before = self.store.get('a').values.tobytes()
        self.ok('normalize_series', name='a')
        self.assertEqual(self.store.get('a').values.tobytes(), before)

    def test_read_only_tools_are_deterministic(self):
        first = self.ok('summary_stats', name='a')
        second = self.ok('summary_stats', name='a')
        self.assertEqual(first.value, second.value)


class BindingTests(ToolTestMixin, SimpleTestCase):
    def setUp(self):
        super().setUp()
        self.add('Solar panel 1', np.ones(10))
        self.add('Solar panel 2', np.ones(10))

    def bind(self, tool, values):
        return self.registry.bind_arguments(tool, values, self.store.names())

    def test_dict_passes_through(self):
        self.assertEqual(self.bind('slice_series', {'name': 'x'}), {'name': 'x'})

    def test_two_names_land_on_one_series_parameter(self):
        args = self.bind('anomaly_classifier', ['Solar panel 1', 'Solar panel 2'])
        self.assertEqual(args, {'name': ['Solar panel 1', 'Solar panel 2']})

    def test_series_then_numbers(self):
        self.assertEqual(self.bind('segment_series', ['Solar panel 1', 4]), {'name': 'Solar panel 1', 'k': 4})
        self.assertEqual(
            self.bind('anomaly_classifier', ['Solar panel 1', 5]),
            {'name': 'Solar panel 1', 'threshold': 5},
        )

    def test_relation_tool_takes_series_in_order(self):
        args = self.bind('corr_relation', ['Solar panel 2', 'Solar panel 1', 3])
        self.assertEqual(args, {'name1': 'Solar panel 2', 'name2': 'Solar panel 1', 'lag': 3})

    def test_surplus_values_are_reported(self):
        args = self.bind('series_info', ['Solar panel 1', 7])
        self.assertEqual(args, {'name': 'Solar panel 1', 'extra_1': 7})
        observation = self.call('series_info', **args)
        self.assertIn('extra_1', observation.error)


class ProcessingToolTests(ToolTestMixin, SimpleTestCase):
    def test_full_range_slice_is_identity(self):
        a = self.add('a', [1.0, 2.0, 3.0])
        sliced = self.stored(self.ok('slice_series', name='a', start=0, end=3))
        self.assertTrue(sliced.same_content(a))

    def test_slice_of_slice_composes(self):
        self.add('a', np.arange(20.0))
        first = self.ok('slice_series', name='a', start=5, end=15)
        second = self.stored(self.ok('slice_series', name=first.value['name'], start=2, end=4))
        self.assertEqual(second.origin, ('a', 7, 9))
        self.assertEqual(second.values[0].tolist(), [7.0, 8.0])

    def test_single_point_slice(self):
        self.add('a', [1.0, 2.0, 3.0])
        self.assertEqual(self.ok('slice_series', name='a', start=0, end=1).value['length'], 1)

    def test_segment_equal_parts(self):
        self.add('a', np.arange(100.0))
        segments = self.ok('segment_series', name='a', k=4).value
        self.assertEqual([s['length'] for s in segments], [25, 25, 25, 25])
        self.assertEqual(segments[1]['name'], 'a#segment#2')
        self.assertEqual(segments[1]['mean'], 37.0)

    def test_segment_remainder_goes_last(self):
        self.add('a', np.arange(10.0))
        segments = self.ok('segment_series', name='a', k=3).value
        self.assertEqual([s['length'] for s in segments], [3, 3, 4])

    def test_segment_needs_exactly_one_mode(self):
        self.add('a', np.arange(10.0))
        self.assertTrue(self.call('segment_series', name='a').is_error)
        self.assertTrue(self.call('segment_series', name='a', k=2, lengths=[5, 5]).is_error)

    def test_resample_mean_and_sum(self):
        self.add('a', [1.0, 2.0, 3.0, 4.0])
        mean = self.stored(self.ok('resample_series', name='a', interval=2))
        total = self.stored(self.ok('resample_series', name='a', interval=2, method='sum'))
        self.assertEqual(mean.values[0].tolist(), [1.5, 3.5])
        self.assertEqual(total.values[0].tolist(), [3.0, 7.0])

    def test_resample_same_interval_is_identity(self):
        a = self.add('a', [1.0, 2.0, 3.0, 4.0])
        same = self.stored(self.ok('resample_series', name='a', interval=1))
        self.assertTrue(same.same_content(a))

    def test_select_channel(self):
        self.add('u', [1.0, 2.0])
        self.assertTrue(self.stored(self.ok('select_channel', name='u', channel='0')).same_content(self.store.get('u')))
        self.add('m', [[1.0, 2.0], [3.0, 4.0]], channels=('x', 'y'))
        by_name = self.stored(self.ok('select_channel', name='m', channel='y'))
        by_position = self.stored(self.ok('select_channel', name='m', channel='1'))
        self.assertTrue(by_name.same_content(by_position))
        missing = self.call('select_channel', name='m', channel='z')
        self.assertIn("['x', 'y']", missing.error)

    def test_normalize(self):
        self.add('a', np.random.default_rng(0).normal(3.0, 2.0, 200))
        z = self.stored(self.ok('normalize_series', name='a')).values[0]
        self.assertLess(abs(z.mean()), 1e-9)
        self.assertLess(abs(z.std(ddof=1) - 1), 1e-9)
        self.add('b', [2.0, 4.0, 6.0])
        minmax = self.stored(self.ok('normalize_series', name='b', method='minmax'))
        self.assertEqual(minmax.values[0].tolist(), [0.0, 0.5, 1.0])
        self.add('c', [1.0, 1.0, 1.0])
        self.assertIn('constant', self.call('normalize_series', name='c').error)


class DetectionToolTests(ToolTestMixin, SimpleTestCase):
    def test_trend_direction(self):
        self.add('up', np.arange(100.0))
        self.add('down', -np.arange(100.0))
        self.assertEqual(self.ok('trend_classifier', name='up').value, 'up')
        self.assertEqual(self.ok('trend_classifier', name='down').value, 'down')

    def test_moderately_significant_trend(self):
        # residual pattern orthogonal to the ramp: slope 0.032, t = 2.28 on 38 df
        t = np.arange(40.0)
        wiggle = np.tile([1.0, -1.0, -1.0, 1.0], 10)
        self.add('up', 0.032 * t + wiggle)
        self.add('down', -0.032 * t + wiggle)
        observation = self.ok('trend_classifier', name='up')
        self.assertEqual(observation.value, 'up')
        self.assertEqual(observation.diagnostics['alpha'], 0.05)
        self.assertAlmostEqual(observation.diagnostics['slope'], 0.032, delta=1e-12)
        self.assertGreaterEqual(observation.diagnostics['p_value'], 0.01)
        self.assertLess(observation.diagnostics['p_value'], 0.05)
        self.assertEqual(self.ok('trend_classifier', name='down').value, 'down')
        self.assertEqual(self.ok('trend_classifier', name='up', alpha=0.01).value, 'flat')

    def test_spike_on_sinusoid(self):
        t = np.arange(744)
        x = np.sin(2 * np.pi * t / 24)
        x[388] += 8 * x.std()
        self.add('p', x)
        observation = self.ok('anomaly_classifier', name='p')
        self.assertEqual(observation.value, [388])
        self.assertEqual(observation.diagnostics['anomalies'][0]['type'], 'spike')
        self.assertEqual(observation.diagnostics['most_severe'], 388)

    def test_clean_sinusoid_has_no_anomaly(self):
        self.add('p', np.sin(2 * np.pi * np.arange(744) / 24))
        self.assertEqual(self.ok('anomaly_classifier', name='p').value, [])

    def test_level_shift(self):
        rng = np.random.default_rng(3)
        x = rng.normal(0, 1, 400)
        x[200:] += 5
        self.add('s', x)
        shifts = [a for a in self.ok('anomaly_classifier', name='s').diagnostics['anomalies']
                  if a['type'] == 'level shift']
        self.assertEqual(len(shifts), 1)
        self.assertLessEqual(abs(shifts[0]['start'] - 200), 2)

    def test_window_longer_than_series(self):
        self.add('a', np.arange(5.0))
        self.assertTrue(self.call('anomaly_classifier', name='a', window=9).is_error)

    def test_default_window_fits_short_series(self):
        self.add('a', [1.0, 1.0, 9.0, 1.0, 1.0])
        observation = self.ok('anomaly_classifier', name='a')
        self.assertEqual(observation.diagnostics['window'], 5)
        self.assertEqual(self.ok('anomaly_classifier', name='a', threshold=2).value, [2])

    def test_anomaly_on_a_slice_reports_its_root(self):
        x = np.random.default_rng(5).normal(0, 0.1, 300)
        x[50] += 5
        self.add('a', x)
        sliced = self.ok('slice_series', name='a', start=0, end=100)
        observation = self.ok('anomaly_classifier', name=sliced.value['name'])
        self.assertEqual(observation.diagnostics['most_severe'], 50)
        self.assertEqual(observation.diagnostics['length'], 100)
        self.assertEqual(observation.diagnostics['root_length'], 300)
        self.assertEqual(observation.diagnostics['span'], ['a', 0, 100])

    def test_seasonality_period(self):
        t = np.arange(720)
        self.add('s', np.sin(2 * np.pi * t / 24))
        self.add('st', np.sin(2 * np.pi * t / 24) + 0.01 * t)
        for name in ('s', 'st'):
            observation = self.ok('seasonality_detector', name=name)
            self.assertEqual(observation.value, 'strong')
            self.assertLessEqual(abs(observation.diagnostics['period'] - 24), 1)

    def test_change_point(self):
        x = np.random.default_rng(1).normal(0, 1, 200)
        x[100:] += 5
        self.add('c', x)
        points = self.ok('change_point_detector', name='c').value
        self.assertEqual(len(points), 1)
        self.assertLessEqual(abs(points[0] - 100), 5)
        self.add('flat', np.zeros(50))
        self.assertEqual(self.ok('change_point_detector', name='flat').value, [])

    def test_two_change_points(self):
        x = np.random.default_rng(2).normal(0, 1, 300)
        x[100:200] += 6
        self.add('c', x)
        points = self.ok('change_point_detector', name='c', n_cp=2).value
        self.assertEqual(len(points), 2)
        self.assertLessEqual(abs(points[0] - 100), 5)
        self.assertLessEqual(abs(points[1] - 200), 5)

    def test_constant_series_has_no_change_points_even_when_asked(self):
        self.add('c', np.full(100, 3.0))
        for args in ({}, {'n_cp': 2}, {'penalty': 0.0}):
            with self.subTest(**args):
                self.assertEqual(self.ok('change_point_detector', name='c', **args).value, [])

    def test_spike_min_sep(self):
        x = np.zeros(200)
        x += np.random.default_rng(4).normal(0, 0.1, 200)
        x[50] += 5
        x[100] += 4
        x[103] += 6
        self.add('s', x)
        far = self.ok('spike_detector', name='s', threshold=6, min_sep=10).value
        self.assertEqual(far, [50, 103])

    def test_spike_clean(self):
        self.add('s', np.sin(2 * np.pi * np.arange(300) / 30))
        self.assertEqual(self.ok('spike_detector', name='s').value, [])

    def test_stationarity_rejects_unknown_test(self):
        self.add('a', np.random.default_rng(0).normal(size=100))
        self.assertIn('unsupported test', self.call('stationarity_test', name='a', test='pp').error)


class NumericalToolTests(ToolTestMixin, SimpleTestCase):
    def setUp(self):
        super().setUp()
        self.add('a', [1.0, 2.0, 3.0])

    def test_series_info(self):
        self.add('m', np.ones((2, 50)), channels=('x', 'y'))
        meta = self.ok('series_info', name='m').value
        self.assertEqual((meta['dim'], meta['length']), (2, 50))
        values = np.ones(10)
        values[[2, 5]] = np.nan
        self.add('gaps', values, index=np.arange(10) * 3)
        meta = self.ok('series_info', name='gaps').value
        self.assertEqual(meta['missing'], {'value': 2})
        self.assertEqual(meta['interval'], 3)

    def test_datapoint(self):
        self.assertEqual(self.ok('datapoint_value', name='a', at=1).value, 2.0)
        self.assertEqual(self.ok('datapoint_value', name='a', at=2).value, 3.0)
        self.assertTrue(self.call('datapoint_value', name='a', at=-1).is_error)

    def test_explicit_timestamp_reaches_shadowed_points(self):
        self.add('small', [10.0, 20.0, 30.0, 40.0, 50.0], index=[2, 3, 4, 5, 6])
        self.assertEqual(self.ok('datapoint_value', name='small', at=3).value, 40.0)
        self.assertEqual(self.ok('datapoint_value', name='small', at={'timestamp': 3}).value, 20.0)
        sliced = self.ok('slice_series', name='small', start={'timestamp': 3}, end={'timestamp': 5})
        self.assertEqual(self.stored(sliced).values[0].tolist(), [20.0, 30.0])
        self.assertTrue(self.call('datapoint_value', name='small', at={'time': 3}).is_error)
        self.assertTrue(self.call('datapoint_value', name='small', at={'timestamp': {'position': 1}}).is_error)

    def test_datarange(self):
        self.assertEqual(self.ok('datarange_value', name='a', start=0, end=3).value, 2.0)
        self.assertEqual(self.ok('datarange_value', name='a', start=0, end=3, stat='sum').value, 6.0)
        self.add('b', [1.0, 5.0, 3.0])
        self.assertEqual(self.ok('datarange_value', name='b', start=0, end=2, stat='max').value, 5.0)

    def test_summary_stats(self):
        self.add('c', [2.0, 2.0, 2.0])
        record = self.ok('summary_stats', name='c').value
        self.assertEqual((record['mean'], record['std']), (2.0, 0.0))
        self.add('d', [0.0, 10.0])
        record = self.ok('summary_stats', name='d').value
        self.assertEqual((record['min'], record['max'], record['mean']), (0.0, 10.0, 5.0))

    def test_return_calc(self):
        self.add('p', [100.0, 110.0])
        self.assertAlmostEqual(self.ok('return_calc', name='p', t1=0, t2=1).value, 0.10)
        self.assertEqual(self.ok('return_calc', name='p', t1=0, t2=1, kind='diff').value, 10.0)
        self.assertEqual(self.ok('return_calc', name='p', t1=1, t2=1).value, 0.0)

    def test_autocorr_lag_zero(self):
        self.assertEqual(self.ok('autocorr', name='a', lag=0).value, 1.0)

    def test_rolling_edges(self):
        x = np.random.default_rng(0).normal(size=30)
        self.add('r', x)
        identity = self.stored(self.ok('rolling_stat', name='r', window=1))
        np.testing.assert_allclose(identity.values[0], x)
        whole = self.stored(self.ok('rolling_stat', name='r', window=30, stat='std'))
        np.testing.assert_allclose(whole.values[0], [x.std(ddof=1)])

    def test_quantile(self):
        self.assertEqual(self.ok('quantile_value', name='a', q=0.5).value, 2.0)
        self.add('e', [1.0, 2.0, 3.0, 4.0])
        self.assertEqual(self.ok('quantile_value', name='e', q=0.5).value, 2.5)

    def test_volatility_of_ramp_is_zero(self):
        self.add('ramp', np.arange(20.0) * 3)
        vol = self.stored(self.ok('volatility', name='ramp', window=5))
        np.testing.assert_allclose(vol.values[0], 0.0, atol=1e-12)


class RelationToolTests(ToolTestMixin, SimpleTestCase):
    def setUp(self):
        super().setUp()
        self.x = np.random.default_rng(5).normal(size=200)
        self.add('x', self.x)
        self.add('neg', -self.x)

    def test_correlation_extremes(self):
        self.assertAlmostEqual(self.ok('corr_relation', name1='x', name2='x').value, 1.0)
        self.assertAlmostEqual(self.ok('corr_relation', name1='x', name2='neg').value, -1.0)

    def test_best_lag_of_self_is_zero(self):
        self.assertEqual(self.ok('cross_correlation', name1='x', name2='x').value['best_lag'], 0)

    def test_dtw_self_and_symmetry(self):
        self.add('y', np.cos(np.arange(50) / 5.0))
        self.add('z', np.sin(np.arange(40) / 4.0))
        self.assertEqual(self.ok('dtw_distance', name1='y', name2='y').value, 0.0)
        self.assertAlmostEqual(
            self.ok('dtw_distance', name1='y', name2='z').value,
            self.ok('dtw_distance', name1='z', name2='y').value,
        )

    def test_shape_similarity_is_affine_invariant(self):
        self.add('affine', 5 * self.x + 3)
        self.assertAlmostEqual(self.ok('shape_similarity', name1='x', name2='affine').value, 1.0, delta=1e-9)
        self.assertAlmostEqual(self.ok('shape_similarity', name1='x', name2='neg').value, -1.0, delta=1e-9)

    def test_shape_similarity_needs_equal_lengths(self):
        self.add('short', self.x[:50])
        self.assertIn('equal lengths', self.call('shape_similarity', name1='x', name2='short').error)


class PipelineTests(ToolTestMixin, SimpleTestCase):
    DOCUMENT = {
        'name': 'volatility_adjusted_average',
        'description': 'Rolling mean of windowed volatility.',
        'parameters': [
            {'name': 'name', 'type': 'series'},
            {'name': 'window', 'type': 'int', 'default': 10},
        ],
        'steps': [
            {'tool': 'volatility', 'args': {'name': '$input', 'window': '$window'}},
            {'tool': 'rolling_stat', 'args': {'name': '$prev', 'stat': 'mean', 'window': '$window'}},
        ],
    }

    def setUp(self):
        super().setUp()
        self.add('a', np.random.default_rng(9).normal(size=120).cumsum())

    def test_pipeline_matches_manual_composition(self):
        spec = register_pipeline(self.registry, self.DOCUMENT)
        self.assertEqual(spec.family, 'custom')
        self.assertEqual(spec.output_kind, 'series')
        observation = self.ok('volatility_adjusted_average', name='a')
        self.assertEqual(len(observation.children), 2)
        self.assertEqual([c.source.tool for c in observation.children], ['volatility', 'rolling_stat'])

        vol = self.ok('volatility', name='a', window=10)
        manual = self.ok('rolling_stat', name=vol.value['name'], stat='mean', window=10)
        np.testing.assert_allclose(self.stored(observation).values, self.stored(manual).values)

    def test_pipeline_is_deterministic(self):
        register_pipeline(self.registry, self.DOCUMENT)
        first = self.ok('volatility_adjusted_average', name='a', window=5)
        second = self.ok('volatility_adjusted_average', name='a', window=5)
        self.assertEqual(first.value, second.value)

    def test_unknown_tool_rejected(self):
        document = dict(self.DOCUMENT, steps=[{'tool': 'fft_magic', 'args': {'name': '$input'}}])
        with self.assertRaises(PipelineError) as ctx:
            validate_pipeline(document, self.registry)
        self.assertIn('fft_magic', str(ctx.exception))

    def test_name_clash_rejected(self):
        with self.assertRaises(PipelineError):
            validate_pipeline(dict(self.DOCUMENT, name='slice_series'), self.registry)

    def test_prev_in_first_step_rejected(self):
        document = dict(self.DOCUMENT, steps=[{'tool': 'volatility', 'args': {'name': '$prev'}}])
        with self.assertRaises(PipelineError):
            validate_pipeline(document, self.registry)

    def test_failing_step_becomes_error_observation(self):
        register_pipeline(self.registry, self.DOCUMENT)
        observation = self.call('volatility_adjusted_average', name='a', window=500)
        self.assertTrue(observation.is_error)
        self.assertIn('step 1 (volatility) failed', observation.error)
        self.assertEqual(len(observation.children), 1)

    def test_custom_operator_needs_backend(self):
        observation = self.call('custom_operator', prompt='volatility-adjusted moving average, window 10')
        self.assertTrue(observation.is_error)
        self.assertIn('needs an LLM backend', observation.error)

    def test_custom_operator_registers_synthesized_pipeline(self):
        from llm.backends import ScriptedBackend

        backend = ScriptedBackend([json.dumps(self.DOCUMENT)])
        call = ToolCall('custom_operator', {'prompt': 'volatility-adjusted moving average, window 10'})
        observation = self.registry.dispatch(call, self.store, backend)
        self.assertEqual(observation.kind, 'meta')
        self.assertEqual(observation.value['registered'], 'volatility_adjusted_average')
        self.assertIn('volatility_adjusted_average', self.registry)
        self.assertNotIn('volatility_adjusted_average', build_registry())


class ToolCatalogEndpointTests(APITestCase):
    def setUp(self):
        self.user = get_user_model().objects.create_user(username='analyst', password='secret-pass')

    def test_requires_authentication(self):
        response = self.client.get('/api/tools/')
        self.assertIn(response.status_code, (401, 403))

    def test_bearer_token(self):
        response = self.client.post('/api/auth/token/', {'username': 'analyst', 'password': 'secret-pass'},
                                    format='json')
        self.assertEqual(response.status_code, 200)
        self.client.credentials(HTTP_AUTHORIZATION=f"Bearer {response.data['access']}")
        self.assertEqual(self.client.get('/api/tools/').status_code, 200)

        self.client.credentials(HTTP_AUTHORIZATION='Bearer not-a-token')
        self.assertEqual(self.client.get('/api/tools/').status_code, 401)

    def test_catalog(self):
        self.client.force_authenticate(self.user)
        response = self.client.get('/api/tools/', {'family': 'rel'})
        self.assertEqual(response.status_code, 200)
        self.assertTrue(response.data['success'])
        self.assertEqual(
            [tool['name'] for tool in response.data['tools']],
            ['corr_relation', 'cross_correlation', 'dtw_distance', 'shape_similarity', 'granger_causality'],
        )

    def test_single_tool(self):
        self.client.force_authenticate(self.user)
        response = self.client.get('/api/tools/granger_causality/')
        self.assertEqual(response.status_code, 200)
        self.assertEqual(response.data['tool']['output_kind'], 'record')
        self.assertEqual(self.client.get('/api/tools/frobnicate/').status_code, 404)
