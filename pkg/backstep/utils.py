# -*- coding: utf-8 -*-
"""Small containers shared by the pipeline and the simulators, plus the trapezoid quadrature they integrate with"""
import logging

import frozendict
import numpy as np

__all__ = ['AttributesFrozendict', 'AttributesDict', 'EventHelper', 'trapezoid_weights', 'signed_trapezoid_matrix']

_LOGGER = logging.getLogger(__name__)


class EventHelper(object):
    """Keeps the listeners of one listener class and broadcasts events to them in registration order."""

    def __init__(self, listener_type):
        assert listener_type is not None, 'a listener type is required'
        self._listener_type = listener_type
        self._listeners = []

    @property
    def listeners(self):
        return tuple(self._listeners)

    def add_listener(self, listener):
        assert isinstance(listener, self._listener_type), \
            '{} is not a {}'.format(listener, self._listener_type.__name__)
        if listener not in self._listeners:
            self._listeners.append(listener)

    def remove_listener(self, listener):
        if listener in self._listeners:
            self._listeners.remove(listener)

    def fire_event(self, event, *args, **kwargs):
        """
        Call the method named like ``event`` on every listener.

        A failing listener is logged and skipped; the others still receive the event.
        """
        if event is None:
            raise ValueError('no event method given')

        for listener in list(self._listeners):
            try:
                getattr(listener, event.__name__)(*args, **kwargs)
            except Exception as exception:  # pylint: disable=broad-except
                _LOGGER.error("listener '%s' failed on %s: %s", listener, event.__name__, exception)


class AttributesFrozendict(frozendict.frozendict):
    """
    An immutable mapping whose keys can also be read as attributes, e.g. ``config.plant.cfl``.

    A key wins over an inherited helper of the same name such as ``value`` or ``copy``. The mapping protocol
    (``keys``, ``items``, ``values``, ``get``) and ``to_dict`` are only reachable as methods.
    """

    _RESERVED = frozenset(('keys', 'items', 'values', 'get', 'to_dict'))

    def __getattribute__(self, attr):
        if not attr.startswith('_') and attr not in AttributesFrozendict._RESERVED \
                and frozendict.frozendict.__contains__(self, attr):
            return frozendict.frozendict.__getitem__(self, attr)
        return super(AttributesFrozendict, self).__getattribute__(attr)

    def __getattr__(self, attr):
        # pickle asks for this before the mapping has any content
        if attr == '__setstate__':
            raise AttributeError(attr)
        if attr in self:
            return self[attr]
        raise AttributeError("'{}' has no field '{}'".format(type(self).__name__, attr))

    def __dir__(self):
        return list(self.keys())

    def to_dict(self):
        """Return a plain nested dictionary copy with tuples turned back into lists, e.g. for dumping to YAML."""

        def plain(value):
            if isinstance(value, AttributesFrozendict):
                return value.to_dict()
            if isinstance(value, tuple):
                return list(value)
            return value

        return {key: plain(value) for key, value in self.items()}


class AttributesDict(object):
    """Mutable scratch space of a pipeline, with both attribute and item access."""

    def __init__(self, **kwargs):
        vars(self).update(kwargs)

    def __repr__(self):
        fields = ', '.join('{}={!r}'.format(key, value) for key, value in sorted(vars(self).items()))
        return '{}({})'.format(type(self).__name__, fields)

    def __contains__(self, key):
        return key in vars(self)

    def __getitem__(self, key):
        if key not in vars(self):
            raise KeyError(key)
        return vars(self)[key]

    def __setitem__(self, key, value):
        setattr(self, key, value)

    def __delitem__(self, key):
        delattr(self, key)

    def get(self, key, default=None):
        return vars(self).get(key, default)


def trapezoid_weights(nodes):
    """
    Composite trapezoid weights for a (not necessarily uniform) increasing set of nodes.

    :param nodes: the quadrature nodes
    :type nodes: :class:`numpy.ndarray`
    :return: weights such that ``weights @ f(nodes)`` approximates the integral
    :rtype: :class:`numpy.ndarray`
    """
    nodes = np.asarray(nodes, dtype=float)
    weights = np.zeros_like(nodes)
    if nodes.size < 2:
        return weights
    widths = np.diff(nodes)
    weights[:-1] += 0.5 * widths
    weights[1:] += 0.5 * widths
    return weights


def signed_trapezoid_matrix(nodes):
    """
    Weights of ``int_{-w}^{w} f(z) dz`` for every node ``w`` of a grid symmetric about zero.

    Row ``k`` holds the composite trapezoid weights over the nodes in ``[-|w_k|, |w_k|]``, negated for ``w_k < 0``
    so that the integral keeps its orientation.

    :param nodes: increasing grid, symmetric about zero
    :rtype: :class:`numpy.ndarray` of shape ``(n, n)``
    """
    nodes = np.asarray(nodes, dtype=float)
    count = nodes.size
    matrix = np.zeros((count, count))
    for k, w in enumerate(nodes):
        first = count - 1 - k if w >= 0.0 else k
        last = k if w >= 0.0 else count - 1 - k
        if last <= first:
            continue
        matrix[k, first:last + 1] = np.sign(w) * trapezoid_weights(nodes[first:last + 1])
    return matrix
