import csv
import math

import numpy as np
import yaml

from backstep import export
from backstep.kernels import KernelGrid
from backstep.simulation import PlantState, TargetState, uniform_grid

from . import utils


def _read(path):
    with open(path, newline='') as handle:
        return list(csv.reader(handle))


class TestFormatting(utils.TestCase):

    def test_seventeen_digits(self):
        self.assertEqual(export.format_float(0.1), '0.10000000000000001')
        self.assertEqual(export.format_float(2.0), '2')
        self.assertEqual(float(export.format_float(math.pi)), math.pi)

    def test_to_builtin(self):
        converted = export.to_builtin({
            'nan': float('nan'),
            'array': np.array([1.5, 2.5]),
            'integer': np.int64(3),
            'flag': np.bool_(True),
            'nested': (np.float64(0.25), None),
        })
        self.assertEqual(converted, {'nan': None, 'array': [1.5, 2.5], 'integer': 3, 'flag': True,
                                     'nested': [0.25, None]})
        self.assertIs(type(converted['integer']), int)


class TestWriters(utils.TestCaseWithDirectory):

    def test_kernels(self):
        kernels = KernelGrid.from_fields({'L11': lambda z, w: 0.1 + 0.0 * z}, nw=3, ns=3)
        rows = _read(export.write_kernels(self.path('kernels.csv'), kernels))

        self.assertEqual(tuple(rows[0]), export.KERNEL_COLUMNS)
        self.assertEqual(len(rows), 1 + 8 * 9)
        self.assertEqual(rows[1][0], 'Equal')
        self.assertEqual(rows[1][4], '0.10000000000000001')

    def test_norm_trace(self):
        trace = [(0.0, 1.0, float('nan'), 0.0, 0.0), (0.5, 0.25, 0.125, 1.0, -1.0)]
        rows = _read(export.write_norm_trace(self.path('trace.csv'), trace))
        self.assertEqual(rows[0], ['t', 'l2_uv', 'l2_alphabeta', 'U1', 'U2'])
        self.assertEqual(rows[1][2], 'nan')
        self.assertEqual(rows[2], ['0.5', '0.25', '0.125', '1', '-1'])

    def test_snapshots(self):
        nodes = uniform_grid(21)
        state = PlantState(0.5, nodes, np.zeros(21), np.ones(21))
        rows = _read(export.write_snapshots(self.path('snapshots.csv'), [state, state]))
        self.assertEqual(rows[0], ['t', 'w', 'u', 'v'])
        self.assertEqual(len(rows), 1 + 2 * 21)
        self.assertEqual(rows[1], ['0.5', '-1', '0', '1'])

    def test_snapshots_with_transform(self):
        nodes = uniform_grid(21)
        state = PlantState(0.0, nodes, np.ones(21), np.ones(21))

        def transform(plant_state):
            return TargetState(plant_state.t, plant_state.nodes, 0.5 * plant_state.u, 0.5 * plant_state.v)

        rows = _read(export.write_snapshots(self.path('snapshots.csv'), [state], transform))
        self.assertEqual(rows[0], ['t', 'w', 'u', 'v', 'alpha', 'beta'])
        self.assertEqual(rows[1][4:], ['0.5', '0.5'])

    def test_target_check(self):
        study = [{'nx': 101, 'dx': 0.02, 'error': 0.1, 'order': None},
                 {'nx': 201, 'dx': 0.01, 'error': 0.05, 'order': 1.0}]
        rows = _read(export.write_target_check(self.path('target.csv'), study))
        self.assertEqual(rows[0], ['nx', 'dx', 'error', 'order'])
        self.assertEqual(rows[1][3], '')
        self.assertEqual(rows[2], ['201', '0.01', '0.050000000000000003', '1'])

    def test_summary(self):
        path = export.write_summary(self.path('summary.yaml'), {'tf': np.float64(1.5), 'case': 'Equal',
                                                                'bound_ratio': float('nan')})
        with open(path) as handle:
            text = handle.read()
        self.assertLess(text.index('bound_ratio'), text.index('case'))
        self.assertEqual(yaml.safe_load(text), {'tf': 1.5, 'case': 'Equal', 'bound_ratio': None})
