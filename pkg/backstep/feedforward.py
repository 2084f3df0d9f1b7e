# -*- coding: utf-8 -*-
"""
Feedforward data of the Case 2 and Case 3 target systems.

In Case 2 the target system carries the reflection coefficient ``p(w)`` and the fields ``D+``/``D-``, in Case 3
the coefficient ``q(w)`` and the fields ``K+``/``K-``. For every fixed ``w`` the fields solve a coupled system of
second-kind Volterra equations in ``z`` that only involves values on the same row, so each row is solved on its own.
"""
import logging

import numpy as np

from . import geometry
from .exceptions import NoConvergenceError, WrongCaseError
from .kernels import triangle_bilinear
from .utils import trapezoid_weights

__all__ = ['FeedforwardTrace', 'VolterraColumn', 'FeedforwardKernels', 'compute_p', 'compute_q', 'solve_feedforward']

_LOGGER = logging.getLogger(__name__)

GROWTH_STRIKES = 5
MAX_NEUMANN_ITERATIONS = 1000

# Kernel pairs entering the rows of the stacked system, and the kernels of the right-hand side
_OPERATOR_PAIRS = (('L11', 'L21'), ('L12', 'L22'))
_RIGHT_HAND_SIDES = {
    geometry.CaseTag.LAMBDA_FASTER: ('L11', 'L12'),
    geometry.CaseTag.MU_FASTER: ('L21', 'L22'),
}
_FIELD_NAMES = {
    geometry.CaseTag.LAMBDA_FASTER: ('Dplus', 'Dminus'),
    geometry.CaseTag.MU_FASTER: ('Kplus', 'Kminus'),
}


def _tag_of(case):
    if isinstance(case, geometry.SpeedCase):
        return case.tag
    return geometry.CaseTag(case)


class FeedforwardTrace(object):
    """A coefficient ``p(w)`` or ``q(w)`` sampled at the kernel rows of both triangles"""

    def __init__(self, nodes, values, name='p'):
        self._nodes = np.asarray(nodes, dtype=float)
        self._values = np.asarray(values, dtype=float)
        self._name = name

    @property
    def name(self):
        return self._name

    @property
    def nodes(self):
        return self._nodes

    @property
    def values(self):
        return self._values

    def __call__(self, w):
        return np.interp(w, self._nodes, self._values)

    def scaled(self, factor):
        return FeedforwardTrace(self._nodes, factor * self._values, self._name)


def _anti_diagonal_trace(kernels, name, upper_factor, lower_factor):
    """``factor * kernel(-w, w)`` on both triangles, assembled on increasing w"""
    w_nodes = kernels.w_nodes
    upper = upper_factor * kernels.upper(name)[:, 0]
    lower = lower_factor * kernels.lower(name)[:, -1]
    nodes = np.concatenate([-w_nodes[:0:-1], w_nodes])
    values = np.concatenate([lower[:0:-1], upper])
    return nodes, values


def compute_p(kernels, profile):
    """
    The Case 2 reflection coefficient ``p(w) = (lambda(-w) - mu(w)) L21(-w, w)``.

    :raises WrongCaseError: unless the kernels were solved for the LambdaFaster case
    :rtype: :class:`FeedforwardTrace`
    """
    if _tag_of(kernels.case) is not geometry.CaseTag.LAMBDA_FASTER:
        raise WrongCaseError('p is only defined for LambdaFaster kernels, got {}'.format(_tag_of(kernels.case).label))
    w_nodes = kernels.w_nodes
    nodes, values = _anti_diagonal_trace(kernels, 'L21', profile.lam(-w_nodes) - profile.mu(w_nodes),
                                         profile.lam(w_nodes) - profile.mu(-w_nodes))
    return FeedforwardTrace(nodes, values, name='p')


def compute_q(kernels, profile):
    """
    The Case 3 reflection coefficient ``q(w) = (lambda(w) - mu(-w)) L12(-w, w)``.

    :raises WrongCaseError: unless the kernels were solved for the MuFaster case
    """
    if _tag_of(kernels.case) is not geometry.CaseTag.MU_FASTER:
        raise WrongCaseError('q is only defined for MuFaster kernels, got {}'.format(_tag_of(kernels.case).label))

    w_nodes = kernels.w_nodes
    nodes, values = _anti_diagonal_trace(kernels, 'L12', profile.lam(w_nodes) - profile.mu(-w_nodes),
                                         profile.lam(-w_nodes) - profile.mu(w_nodes))
    return FeedforwardTrace(nodes, values, name='q')


class VolterraColumn(object):
    """
    The stacked Volterra system of one row ``|w| = W``.

    The unknowns are ``x1 = F+(zeta)``, ``x2 = F-(zeta)``, ``x3 = F+(-zeta)``, ``x4 = F-(-zeta)`` on the nodes
    ``zeta in [0, W]``; every row reads ``x_a(zeta) = f_a(zeta) + int_zeta^W sum_b k_ab(zeta, sigma) x_b(sigma)``.
    """

    def __init__(self, kernels, w_abs, ns=None):
        ns = ns or kernels.shape[1]
        if ns % 2 == 0:
            raise ValueError('the number of columns must be odd, got {}'.format(ns))
        self._kernels = kernels
        self._width = float(abs(w_abs))
        half = (ns + 1) // 2
        self._zeta = np.linspace(0.0, self._width, half)
        self._operator = self._build_operator()

    @property
    def zeta(self):
        return self._zeta

    @property
    def width(self):
        return self._width

    @property
    def operator(self):
        return self._operator

    def _build_operator(self):
        size = self._zeta.size
        zeta = self._zeta
        weights = np.zeros((size, size))
        for m in range(size):
            weights[m, m:] = trapezoid_weights(zeta[m:])

        z_points = np.repeat(zeta[:, np.newaxis], size, axis=1)
        sigma_points = np.repeat(zeta[np.newaxis, :], size, axis=0)
        sigma_points = np.maximum(sigma_points, z_points)

        operator = np.zeros((4 * size, 4 * size))
        for a in range(4):
            z_sign = 1.0 if a < 2 else -1.0
            first, second = _OPERATOR_PAIRS[a % 2]
            blocks = (
                self._kernels.sample(first, z_sign * z_points, sigma_points),
                self._kernels.sample(second, z_sign * z_points, sigma_points),
                -self._kernels.sample(first, z_sign * z_points, -sigma_points),
                -self._kernels.sample(second, z_sign * z_points, -sigma_points),
            )
            for b, block in enumerate(blocks):
                operator[a * size:(a + 1) * size, b * size:(b + 1) * size] = weights * block
        return operator

    def right_hand_side(self, coefficient, w, case):
        """The stacked ``f`` of the row ``w`` (with ``|w| = W``) for the reflection coefficient value"""
        first, second = _RIGHT_HAND_SIDES[_tag_of(case)]
        mirrored = np.full(self._zeta.shape, -float(w))
        return coefficient * np.concatenate([
            self._kernels.sample(first, self._zeta, mirrored),
            self._kernels.sample(second, self._zeta, mirrored),
            self._kernels.sample(first, -self._zeta, mirrored),
            self._kernels.sample(second, -self._zeta, mirrored),
        ])

    def apply(self, unknowns):
        """``x - K x``: the left-hand side of the system for a given stacked vector"""
        unknowns = np.asarray(unknowns, dtype=float)
        return unknowns - self._operator.dot(unknowns)

    def solve(self, rhs, tol=1e-12):
        """
        Neumann iteration ``x <- f + K x`` starting from ``f``.

        :return: the stacked solution and the number of iterations
        :raises NoConvergenceError: if the increments keep growing once the Volterra transient is over,
            or the iteration cap is reached
        """
        rhs = np.asarray(rhs, dtype=float)
        size = self._zeta.size
        blocks = np.abs(self._operator).reshape(4, size, 4, size)
        # Row sums of the kernel magnitudes: increments may grow for about this many iterations
        transient = float(np.max(np.sum(np.max(blocks, axis=(1, 3)), axis=1))) * size

        solution = rhs.copy()
        previous_increment = None
        strikes = 0
        increments = []
        for iteration in range(1, MAX_NEUMANN_ITERATIONS + 1):
            updated = rhs + self._operator.dot(solution)
            increment = float(np.max(np.abs(updated - solution))) if updated.size else 0.0
            solution = updated
            increments.append(increment)

            if increment <= tol * max(1.0, float(np.max(np.abs(solution)))):
                return solution, iteration

            if previous_increment is not None and increment > previous_increment and iteration > transient:
                strikes += 1
            else:
                strikes = 0
            if strikes >= GROWTH_STRIKES:
                raise NoConvergenceError('Volterra increments grew for {} iterations on row |w|={:.6g}'.format(
                    GROWTH_STRIKES, self._width),
                                         iterations=iteration,
                                         increments=increments,
                                         provenance='feedforward_volterra')
            previous_increment = increment

        raise NoConvergenceError('Volterra iteration did not converge on row |w|={:.6g}'.format(self._width),
                                 iterations=MAX_NEUMANN_ITERATIONS,
                                 increments=increments,
                                 provenance='feedforward_volterra')

    def unstack(self, solution):
        """Turn a stacked solution into the rows of ``F+`` and ``F-`` on the symmetric s-grid of the triangle"""
        size = self._zeta.size
        parts = [solution[a * size:(a + 1) * size] for a in range(4)]
        plus = np.concatenate([parts[2][:0:-1], parts[0]])
        minus = np.concatenate([parts[3][:0:-1], parts[1]])
        return plus, minus


class FeedforwardKernels(object):
    """
    The target-system feedforward data of Case 2 (``p``, ``D+``, ``D-``) or Case 3 (``q``, ``K+``, ``K-``).

    Fields are stored per triangle like the kernels: ``upper`` rows at ``w = w_i``, ``lower`` rows at
    ``w = -w_i``, both with ``z = |w| (2 s - 1)``.
    """

    def __init__(self, case, trace, plus, minus):
        self._case = case
        self._trace = trace
        self._plus = tuple(np.array(array, dtype=float) for array in plus)
        self._minus = tuple(np.array(array, dtype=float) for array in minus)
        for array in self._plus + self._minus:
            array.flags.writeable = False

    @property
    def case(self):
        return self._case

    @property
    def trace(self):
        """``p`` in Case 2, ``q`` in Case 3"""
        return self._trace

    @property
    def field_names(self):
        return _FIELD_NAMES[_tag_of(self._case)]

    @property
    def plus(self):
        """``(upper, lower)`` samples of D+ or K+"""
        return self._plus

    @property
    def minus(self):
        return self._minus

    def sup_norm(self):
        return max(float(np.max(np.abs(array))) for array in self._plus + self._minus)

    def sample(self, which, z, w):
        """
        Evaluate ``'plus'`` or ``'minus'`` at points of the domain by plain bilinear interpolation.
        """
        upper, lower = self._plus if which == 'plus' else self._minus
        z, w = np.broadcast_arrays(np.asarray(z, dtype=float), np.asarray(w, dtype=float))
        return np.where(w >= 0.0, triangle_bilinear(upper, z, w), triangle_bilinear(lower, z, -w))

    def rows(self):
        """Yield ``(case, field, w, z, value, region)`` rows in the layout of the kernel dump."""
        case_label = _tag_of(self._case).label
        region = geometry.RegionTag.NOT_APPLICABLE.value
        for name, (upper, lower) in zip(self.field_names, (self._plus, self._minus)):
            nw, ns = upper.shape
            w_nodes = np.linspace(0.0, 1.0, nw)
            z_grid = w_nodes[:, np.newaxis] * (2.0 * np.linspace(0.0, 1.0, ns)[np.newaxis, :] - 1.0)
            for sign, array in ((1.0, upper), (-1.0, lower)):
                for i in range(nw):
                    for j in range(ns):
                        yield case_label, name, sign * w_nodes[i], z_grid[i, j], array[i, j], region


def solve_feedforward(kernels, trace, tol=1e-12, profile=None):
    """
    Solve the Volterra systems of every kernel row for the feedforward fields.

    :param kernels: Case 2 or Case 3 kernels
    :param trace: ``p`` or ``q``; computed from ``profile`` when None
    :param tol: Neumann stopping tolerance
    :rtype: :class:`FeedforwardKernels`
    :raises WrongCaseError: for Equal-case kernels
    :raises NoConvergenceError: if a row fails to converge
    """
    tag = _tag_of(kernels.case)
    if tag is geometry.CaseTag.EQUAL:
        raise WrongCaseError('the Equal case has no feedforward kernels')
    if trace is None:
        if profile is None:
            raise ValueError('either the trace or the profile must be given')
        trace = compute_p(kernels, profile) if tag is geometry.CaseTag.LAMBDA_FASTER else compute_q(kernels, profile)

    nw, ns = kernels.shape
    plus = (np.zeros((nw, ns)), np.zeros((nw, ns)))
    minus = (np.zeros((nw, ns)), np.zeros((nw, ns)))
    total_iterations = 0
    for i, w_abs in enumerate(kernels.w_nodes):
        column = VolterraColumn(kernels, w_abs, ns)
        for triangle, w in ((0, w_abs), (1, -w_abs)):
            rhs = column.right_hand_side(float(trace(w)), w, tag)
            solution, iterations = column.solve(rhs, tol)
            total_iterations += iterations
            plus[triangle][i], minus[triangle][i] = column.unstack(solution)
        _LOGGER.debug('feedforward row |w|=%.4f solved', w_abs)

    _LOGGER.info('feedforward fields for %s solved, %d Neumann iterations in total', tag.label, total_iterations)
    return FeedforwardKernels(kernels.case, trace, plus, minus)
