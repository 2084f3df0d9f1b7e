# -*- coding: utf-8 -*-
"""Plot-ready CSV tables and the YAML run summary. Floats are written with 17 significant digits."""
import csv
import logging
import math

import numpy as np
import yaml

__all__ = [
    'format_float', 'write_rows', 'write_kernels', 'write_feedforward', 'write_gains', 'write_norm_trace',
    'write_snapshots', 'write_target_check', 'write_summary', 'to_builtin'
]

_LOGGER = logging.getLogger(__name__)

KERNEL_COLUMNS = ('case', 'kernel', 'w', 'z', 'value', 'region')
GAIN_COLUMNS = ('z', 'g11', 'g12', 'g21', 'g22')
TRACE_COLUMNS = ('t', 'l2_uv', 'l2_alphabeta', 'U1', 'U2')
TARGET_CHECK_COLUMNS = ('nx', 'dx', 'error', 'order')


def format_float(value):
    return '%.17g' % value


def _format(value):
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value))
    if isinstance(value, (float, np.floating)):
        return format_float(float(value))
    if value is None:
        return ''
    return str(value)


def write_rows(path, header, rows):
    """Write a header and rows, formatting every float with 17 significant digits."""
    count = 0
    with open(path, 'w', newline='') as handle:
        writer = csv.writer(handle, lineterminator='\n')
        writer.writerow(header)
        for row in rows:
            writer.writerow([_format(value) for value in row])
            count += 1
    _LOGGER.debug("wrote %d rows to '%s'", count, path)
    return path


def write_kernels(path, kernels):
    return write_rows(path, KERNEL_COLUMNS, kernels.rows())


def write_feedforward(path, feedforward):
    return write_rows(path, KERNEL_COLUMNS, feedforward.rows())


def write_gains(path, gains):
    return write_rows(path, GAIN_COLUMNS, gains.rows())


def write_norm_trace(path, trace):
    return write_rows(path, TRACE_COLUMNS, trace)


def write_snapshots(path, states, transform=None):
    """
    One row per recorded time and grid node: ``t, w, u, v`` and, given the backstepping transform, ``alpha, beta``.
    """
    header = ('t', 'w', 'u', 'v') + (('alpha', 'beta') if transform is not None else ())

    def rows():
        for state in states:
            if transform is None:
                columns = (state.u, state.v)
            else:
                target = transform(state)
                columns = (state.u, state.v, target.alpha, target.beta)
            for index, w in enumerate(state.nodes):
                yield (state.t, w) + tuple(column[index] for column in columns)

    return write_rows(path, header, rows())


def write_target_check(path, study):
    return write_rows(path, TARGET_CHECK_COLUMNS, ((row['nx'], row['dx'], row['error'], row['order']) for row in study))


def to_builtin(value):
    """Convert numpy scalars, arrays and tuples into plain Python values YAML can represent."""
    if isinstance(value, dict):
        return {str(key): to_builtin(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_builtin(item) for item in value]
    if isinstance(value, np.ndarray):
        return [to_builtin(item) for item in value.tolist()]
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (np.floating, float)):
        value = float(value)
        return None if math.isnan(value) else value
    return value


def write_summary(path, summary):
    """Dump the run summary as YAML with sorted keys."""
    with open(path, 'w') as handle:
        yaml.safe_dump(to_builtin(summary), handle, default_flow_style=False, sort_keys=True)
    return path
