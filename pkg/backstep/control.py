# -*- coding: utf-8 -*-
"""
Bilateral feedback laws read off the kernel traces, and the backstepping transform used to check them.

``U1 = -int (u L11(z,-1) + v L12(z,-1)) dz`` and ``U2 = int (u L21(z,1) + v L22(z,1)) dz``.
"""
import logging

import numpy as np

from .exceptions import GridMismatchError
from .simulation import TargetState
from .utils import signed_trapezoid_matrix, trapezoid_weights

__all__ = [
    'ControlGains', 'FeedbackController', 'TransformOperator', 'gains_from_kernels', 'evaluate_controls',
    'backstepping_transform'
]

_LOGGER = logging.getLogger(__name__)

GRID_TOLERANCE = 1e-12


def _check_grid(expected, nodes):
    nodes = np.asarray(nodes)
    if nodes.shape != expected.shape or not np.allclose(nodes, expected, rtol=0.0, atol=GRID_TOLERANCE):
        raise GridMismatchError('state has {} nodes but the operator was built for {}'.format(
            nodes.size, expected.size))


class ControlGains(object):
    """
    The four gain traces sampled on the plant grid and the guaranteed settling time.

    :ivar g11: ``L11(z, -1)``
    :ivar g12: ``L12(z, -1)``
    :ivar g21: ``L21(z, 1)``
    :ivar g22: ``L22(z, 1)``
    :ivar tf: settling time of the closed loop
    """

    def __init__(self, nodes, g11, g12, g21, g22, case, tf):
        self.nodes = np.array(nodes, dtype=float)
        self.g11 = np.array(g11, dtype=float)
        self.g12 = np.array(g12, dtype=float)
        self.g21 = np.array(g21, dtype=float)
        self.g22 = np.array(g22, dtype=float)
        self.case = case
        self.tf = float(tf)
        self.weights = trapezoid_weights(self.nodes)

    def rows(self):
        """Yield ``(z, g11, g12, g21, g22)``"""
        for row in zip(self.nodes, self.g11, self.g12, self.g21, self.g22):
            yield row

    def sup_norm(self):
        return float(max(np.max(np.abs(gain)) for gain in (self.g11, self.g12, self.g21, self.g22)))

    def __repr__(self):
        return 'ControlGains(nodes={}, tf={:.6g})'.format(self.nodes.size, self.tf)


def gains_from_kernels(kernels, phi, nodes):
    """
    Take the kernel traces at ``w = -1`` (lower triangle) and ``w = 1`` (upper triangle) onto the plant grid.

    :param kernels: solved kernels
    :param phi: the travel-time maps of the same profile
    :param nodes: the plant grid
    :rtype: :class:`ControlGains`
    """
    nodes = np.asarray(nodes, dtype=float)
    left = np.full(nodes.shape, -1.0)
    right = np.full(nodes.shape, 1.0)
    gains = ControlGains(nodes,
                         kernels.sample('L11', nodes, left),
                         kernels.sample('L12', nodes, left),
                         kernels.sample('L21', nodes, right),
                         kernels.sample('L22', nodes, right),
                         kernels.case,
                         phi.settling_time(kernels.case))
    _LOGGER.debug('gains on %d nodes, sup %.6g, tf %.6g', nodes.size, gains.sup_norm(), gains.tf)
    return gains


def evaluate_controls(state, gains, boundary_consistent=False):
    """
    Evaluate both feedback laws by trapezoid quadrature.

    With ``boundary_consistent`` the boundary values ``u(-1)`` and ``v(1)`` inside the integrals are taken to be the
    inputs themselves; the resulting 2x2 system is solved, so that after injection the transformed state vanishes
    exactly at both ends.

    :raises GridMismatchError: if the state is sampled on another grid than the gains
    :return: ``(U1, U2)``
    """
    _check_grid(gains.nodes, state.nodes)
    weights = gains.weights
    u = state.u
    v = state.v
    first = float(np.dot(weights, u * gains.g11 + v * gains.g12))
    second = float(np.dot(weights, u * gains.g21 + v * gains.g22))
    if not boundary_consistent:
        return -first, second

    w_in, w_out = weights[0], weights[-1]
    rest_first = first - w_in * u[0] * gains.g11[0] - w_out * v[-1] * gains.g12[-1]
    rest_second = second - w_in * u[0] * gains.g21[0] - w_out * v[-1] * gains.g22[-1]
    matrix = np.array([[1.0 + w_in * gains.g11[0], w_out * gains.g12[-1]],
                       [-w_in * gains.g21[0], 1.0 - w_out * gains.g22[-1]]])
    solution = np.linalg.solve(matrix, np.array([-rest_first, rest_second]))
    return float(solution[0]), float(solution[1])


class FeedbackController(object):
    """A callable closing the loop of a :class:`backstep.simulation.Simulation`"""

    def __init__(self, gains, boundary_consistent=True):
        self._gains = gains
        self._boundary_consistent = boundary_consistent

    @property
    def gains(self):
        return self._gains

    def __call__(self, state):
        return evaluate_controls(state, self._gains, self._boundary_consistent)


class TransformOperator(object):
    """
    The backstepping transform on a fixed plant grid:
    ``alpha = u - int_{-w}^{w} (L11 u + L12 v) dz``, ``beta = v - int_{-w}^{w} (L21 u + L22 v) dz``.

    The integrals are signed, so the row at ``w = -1`` reproduces the feedback law for ``U1``.
    """

    def __init__(self, kernels, nodes):
        nodes = np.asarray(nodes, dtype=float)
        weights = signed_trapezoid_matrix(nodes)
        z_points = np.repeat(nodes[np.newaxis, :], nodes.size, axis=0)
        w_points = np.repeat(nodes[:, np.newaxis], nodes.size, axis=1)
        inside = weights != 0.0

        self._nodes = nodes
        self._matrices = {}
        for name in ('L11', 'L12', 'L21', 'L22'):
            values = np.zeros_like(weights)
            values[inside] = kernels.sample(name, z_points[inside], w_points[inside])
            self._matrices[name] = weights * values

    @property
    def nodes(self):
        return self._nodes

    def matrix(self, name):
        return self._matrices[name]

    def __call__(self, state):
        return self.apply(state)

    def apply(self, state):
        """
        :raises GridMismatchError: if the state lives on another grid
        :rtype: :class:`backstep.simulation.TargetState`
        """
        _check_grid(self._nodes, state.nodes)
        matrices = self._matrices
        alpha = state.u - matrices['L11'].dot(state.u) - matrices['L12'].dot(state.v)
        beta = state.v - matrices['L21'].dot(state.u) - matrices['L22'].dot(state.v)
        return TargetState(state.t, state.nodes, alpha, beta)


def backstepping_transform(state, kernels):
    """Apply the transform to one state, building the operator on the state's grid."""
    return TransformOperator(kernels, state.nodes).apply(state)
