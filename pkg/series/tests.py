import json
import tempfile
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase

from series.exceptions import (
    DuplicateSeriesError,
    EmptySeriesError,
    IndexRangeError,
    SeriesParseError,
    SeriesValidationError,
    UnknownChannelError,
    UnknownSeriesError,
)
from series.services import SeriesService
from series.store import SeriesStore, TimeSeries


def make_series(name, values, index=None, channels=('value',)):
    values = np.asarray(values, dtype=float)
    if values.ndim == 1:
        values = values.reshape(1, -1)
    if index is None:
        index = np.arange(values.shape[1])
    return TimeSeries(name=name, channels=channels, index=index, values=values)


class SeriesLoadingTests(SimpleTestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)
        self.dir = Path(self.tmp.name)

    def write(self, filename, text):
        path = self.dir / filename
        path.write_text(text)
        return path

    def test_three_row_csv(self):
        path = self.write('a.csv', 't,v\n0,1.0\n1,2.0\n2,3.0\n')
        store = SeriesStore()
        series = SeriesService.load_series(path, 'csv', 'a', store)
        self.assertEqual(series.length, 3)
        self.assertEqual(series.dim, 1)
        self.assertEqual(series.interval, 1)
        self.assertIs(store.get('a'), series)

    def test_shuffled_rows_sort_to_same_series(self):
        ordered = SeriesService.load_series(self.write('a.csv', 't,v\n0,1.0\n1,2.0\n2,3.0\n'), 'csv', 'a')
        shuffled = SeriesService.load_series(self.write('b.csv', 't,v\n2,3.0\n0,1.0\n1,2.0\n'), 'csv', 'a')
        self.assertEqual(ordered, shuffled)

    def test_nan_and_text_cells_become_missing(self):
        path = self.write('a.csv', 't,v,w\n0,1.0,x\n1,NaN,2\n2,3.0,3\n')
        series = SeriesService.load_series(path, 'csv', 'a')
        self.assertEqual(series.length, 3)
        self.assertEqual(series.missing_counts(), {'v': 1, 'w': 1})

    def test_datetime_time_column(self):
        path = self.write('a.csv', 'time,v\n2024-01-01 00:00,1\n2024-01-01 01:00,2\n')
        series = SeriesService.load_series(path, 'csv', 'a')
        self.assertEqual(series.interval, 3600)
        self.assertEqual(series.locate('2024-01-01 01:00'), 1)

    def test_parse_failures(self):
        with self.assertRaises(SeriesParseError):
            SeriesService.load_series(self.write('a.csv', 't\n0\n1\n'), 'csv', 'a')
        with self.assertRaises(SeriesParseError):
            SeriesService.load_series(self.dir / 'missing.csv', 'csv', 'a')
        with self.assertRaises(SeriesParseError):
            SeriesService.load_series(self.write('a.json', '{not json'), 'json', 'a')
        with self.assertRaises(SeriesParseError):
            SeriesService.load_series(self.write('d.csv', 't,v\n0,1\n0,2\n'), 'csv', 'a')

    def test_empty_series(self):
        with self.assertRaises(EmptySeriesError):
            SeriesService.load_series(self.write('a.csv', 't,v\n'), 'csv', 'a')

    def test_duplicate_name(self):
        store = SeriesStore()
        path = self.write('a.csv', 't,v\n0,1\n1,2\n')
        SeriesService.load_series(path, 'csv', 'a', store)
        with self.assertRaises(DuplicateSeriesError):
            SeriesService.load_series(path, 'csv', 'a', store)

    def test_json_round_trip(self):
        payload = {'name': 'm', 'index': [0, 10, 20], 'channels': {'x': [1.5, None, 2.0], 'y': [0, 1, 2]}}
        first = SeriesService.load_series(self.write('m.json', json.dumps(payload)), 'json', None)
        dumped = SeriesService.dump_series(first, self.dir / 'out.json')
        second = SeriesService.load_series(dumped, 'json', None)
        self.assertEqual(first, second)
        self.assertEqual(second.interval, 10)
        self.assertEqual(second.missing_counts(), {'x': 1, 'y': 0})


class SeriesStoreTests(SimpleTestCase):
    def setUp(self):
        self.store = SeriesStore([make_series('a', [1.0, 2.0, 3.0, 4.0])])

    def test_get_is_pure(self):
        first = SeriesService.get_series(self.store, 'a')
        second = SeriesService.get_series(self.store, 'a')
        self.assertIs(first, second)
        self.assertEqual(first.values.tobytes(), second.values.tobytes())

    def test_unknown_name_lists_known(self):
        with self.assertRaises(UnknownSeriesError) as ctx:
            SeriesService.get_series(self.store, 'b')
        self.assertEqual(ctx.exception.known, ['a'])
        self.assertIn("['a']", str(ctx.exception))

    def test_derived_naming(self):
        a = self.store.get('a')
        first = SeriesService.put_derived(self.store, a.window(0, 2), 'slice')
        second = SeriesService.put_derived(self.store, a.window(1, 3), 'slice')
        self.assertEqual(first, 'a#slice#1')
        self.assertEqual(second, 'a#slice#2')
        nested = self.store.get(first).window(0, 1)
        self.assertEqual(self.store.put_derived(nested, 'segment'), 'a#slice#1#segment#1')

    def test_hash_is_reserved_for_derived_names(self):
        with self.assertRaises(SeriesValidationError):
            self.store.add(make_series('a#b', [1.0]))

    def test_identical_derivation_reuses_name(self):
        a = self.store.get('a')
        self.assertEqual(self.store.put_derived(a.window(0, 2), 'slice'), 'a#slice#1')
        self.assertEqual(self.store.put_derived(a.window(0, 2), 'slice'), 'a#slice#1')
        self.assertEqual(len(self.store), 2)

    def test_window_composes_origin(self):
        a = self.store.get('a')
        inner = a.window(1, 4)
        name = self.store.put_derived(inner, 'slice')
        nested = self.store.get(name).window(1, 2)
        self.assertEqual(nested.origin, ('a', 2, 3))
        np.testing.assert_array_equal(nested.values, a.window(2, 3).values)

    def test_series_is_read_only(self):
        with self.assertRaises(ValueError):
            self.store.get('a').values[0, 0] = 99.0

    def test_fork_shares_roots_not_derivations(self):
        fork = self.store.fork()
        fork.put_derived(fork.get('a').window(0, 1), 'slice')
        self.assertNotIn('a#slice#1', self.store)
        self.assertEqual(fork.roots(), ['a'])


class TimeSeriesInvariantTests(SimpleTestCase):
    def test_index_must_increase(self):
        with self.assertRaises(SeriesValidationError):
            make_series('a', [1, 2, 3], index=[0, 2, 1])

    def test_channels_unique(self):
        with self.assertRaises(SeriesValidationError):
            make_series('a', [[1, 2], [3, 4]], channels=('v', 'v'))

    def test_interval_must_match_spacing(self):
        with self.assertRaises(SeriesValidationError):
            TimeSeries(name='a', channels=('v',), index=[0, 2, 4], values=[[1, 2, 3]], interval=1)

    def test_locate_positions_and_timestamps(self):
        series = make_series('a', [1, 2, 3], index=[100, 200, 300])
        self.assertEqual(series.locate(1), 1)
        self.assertEqual(series.locate(200), 1)
        self.assertEqual(series.locate(400, mode='end'), 3)
        with self.assertRaises(IndexRangeError):
            series.locate(-1)
        with self.assertRaises(IndexRangeError):
            series.locate(250)

    def test_small_integer_timestamps_need_the_explicit_form(self):
        series = make_series('a', [10, 20, 30, 40, 50], index=[2, 3, 4, 5, 6])
        with self.assertLogs('series.store', 'DEBUG') as logs:
            self.assertEqual(series.locate(3), 3)
        self.assertIn('read as a position', logs.output[0])
        self.assertEqual(series.locate({'timestamp': 3}), 1)
        self.assertEqual(series.locate({'position': 3}), 3)
        self.assertEqual(series.locate({'timestamp': '5'}, mode='end'), 3)
        with self.assertRaises(IndexRangeError):
            series.locate({'timestamp': 7})
        with self.assertRaises(IndexRangeError):
            series.locate({'position': 9})
        with self.assertRaises(IndexRangeError):
            series.locate({'time': 3})

    def test_channel_lookup(self):
        series = make_series('m', [[1, 2], [3, 4]], channels=('x', 'y'))
        self.assertEqual(series.channel_position('y'), 1)
        self.assertEqual(series.channel_position(1), 1)
        with self.assertRaises(UnknownChannelError) as ctx:
            series.channel_position('z')
        self.assertIn("['x', 'y']", str(ctx.exception))

    def test_multichannel_is_not_univariate(self):
        series = make_series('m', [[1, 2], [3, 4]], channels=('x', 'y'))
        with self.assertRaisesMessage(SeriesValidationError, 'x must be 1-D'):
            series.univariate()
