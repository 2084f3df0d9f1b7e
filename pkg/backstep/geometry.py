# -*- coding: utf-8 -*-
"""
Travel-time maps, speed-case classification and the characteristic curves of the kernel equations.

Every kernel equation has the form ``a(w) L_w + s c(z) L_z = source`` with ``a, c > 0`` and ``s = +-1``.
With the travel-time maps ``A' = 1/a`` and ``C' = 1/c`` the quantity ``A(w) - s C(z)`` is constant along a
characteristic, which starts either on the diagonal ``z = w`` or on the anti-diagonal ``z = -w`` of the triangle
``{-w <= z <= w, 0 <= w <= 1}``.  Kernels on the lower triangle (``w < 0``) are handled in the reflected
coordinate ``w~ = -w``, where the equations keep this form with ``a(w~) = lambda(-w~)`` or ``mu(-w~)``.
"""
import enum
import logging

import numpy as np
from scipy.integrate import cumulative_trapezoid
from scipy.interpolate import CubicHermiteSpline

from .exceptions import MixedSignSpeedsError, OutOfDomainError

__all__ = [
    'CaseTag', 'RegionTag', 'SpeedCase', 'MonotoneTable', 'PhiMaps', 'CharacteristicFamily', 'CharacteristicPath',
    'build_phi_maps', 'classify_speed_case', 'characteristic_family', 'characteristic_L11', 'characteristic_L12',
    'characteristic_L21', 'characteristic_L22', 'DEFAULT_PHI_NODES', 'DOMAIN_TOLERANCE', 'REGION_TIE_TOLERANCE'
]

_LOGGER = logging.getLogger(__name__)

DEFAULT_PHI_NODES = 2048
INVERSION_TOLERANCE = 1e-12
DOMAIN_TOLERANCE = 1e-9
REGION_TIE_TOLERANCE = 1e-12

DIAGONAL = 'diagonal'
ANTI_DIAGONAL = 'anti-diagonal'


class CaseTag(enum.Enum):
    """The three speed cases of the plant"""
    EQUAL = 1
    LAMBDA_FASTER = 2
    MU_FASTER = 3

    @property
    def label(self):
        return {1: 'Equal', 2: 'LambdaFaster', 3: 'MuFaster'}[self.value]

    @classmethod
    def from_number(cls, number):
        return cls(int(number))


class RegionTag(enum.Enum):
    T1 = 'T1'
    T2 = 'T2'
    NOT_APPLICABLE = 'NotApplicable'


class SpeedCase(object):
    """
    The outcome of classifying a profile.

    :ivar tag: the :class:`CaseTag`
    :ivar margin: the minimum over the grid of ``|lambda(w) - mu(-w)|``
    """

    def __init__(self, tag, margin):
        self._tag = CaseTag(tag)
        self._margin = float(margin)

    @property
    def tag(self):
        return self._tag

    @property
    def margin(self):
        return self._margin

    @property
    def number(self):
        return self._tag.value

    def __eq__(self, other):
        if isinstance(other, CaseTag):
            return self._tag is other
        if isinstance(other, SpeedCase):
            return self._tag is other.tag
        return NotImplemented

    def __hash__(self):
        return hash(self._tag)

    def __repr__(self):
        return 'SpeedCase({}, margin={:.6g})'.format(self._tag.label, self._margin)


class MonotoneTable(object):
    """
    A tabulated function on a uniform grid of [-1, 1] with C1 cubic Hermite evaluation and, when strictly
    monotone, inverse evaluation by bracketing the node values and Newton refinement.
    """

    def __init__(self, nodes, values, slopes):
        self._nodes = np.asarray(nodes, dtype=float)
        self._values = np.asarray(values, dtype=float)
        self._slopes = np.asarray(slopes, dtype=float)
        self._spline = CubicHermiteSpline(self._nodes, self._values, self._slopes, extrapolate=False)
        self._derivative = self._spline.derivative()

        steps = np.diff(self._values)
        if np.all(steps > 0.0):
            self._direction = 1
        elif np.all(steps < 0.0):
            self._direction = -1
        else:
            self._direction = 0

    @property
    def nodes(self):
        return self._nodes

    @property
    def values(self):
        return self._values

    @property
    def slopes(self):
        return self._slopes

    @property
    def direction(self):
        """+1 if strictly increasing, -1 if strictly decreasing, 0 otherwise"""
        return self._direction

    @property
    def span(self):
        return float(self._values[-1] - self._values[0])

    def __call__(self, w):
        w = np.clip(np.asarray(w, dtype=float), self._nodes[0], self._nodes[-1])
        return self._spline(w)

    def derivative(self, w):
        w = np.clip(np.asarray(w, dtype=float), self._nodes[0], self._nodes[-1])
        return self._derivative(w)

    def combine(self, other, sign=1.0, mirror_other=False):
        """
        Build ``self(w) + sign * other(w)`` or, with ``mirror_other``, ``self(w) + sign * other(-w)`` node-wise.
        Both tables must share the same symmetric grid.
        """
        if other.nodes.shape != self._nodes.shape or not np.allclose(other.nodes, self._nodes, rtol=0, atol=1e-14):
            raise ValueError('tables must share their grid')
        if mirror_other:
            return MonotoneTable(self._nodes, self._values + sign * other.values[::-1],
                                 self._slopes - sign * other.slopes[::-1])
        return MonotoneTable(self._nodes, self._values + sign * other.values, self._slopes + sign * other.slopes)

    def reflected(self):
        """The table of ``-self(-w)``, which keeps the direction of monotonicity."""
        return MonotoneTable(self._nodes, -self._values[::-1], self._slopes[::-1])

    def inverse(self, y):
        """
        Solve ``self(w) = y`` for ``w``; targets beyond the range are clamped to the end points.

        :raises ValueError: if the table is not strictly monotone
        """
        if self._direction == 0:
            raise ValueError('table is not strictly monotone and cannot be inverted')

        y = np.asarray(y, dtype=float)
        scalar = y.ndim == 0
        y = np.atleast_1d(y)

        signed_values = self._direction * self._values
        target = np.clip(self._direction * y, signed_values[0], signed_values[-1])

        cell = np.clip(np.searchsorted(signed_values, target, side='right') - 1, 0, self._nodes.size - 2)
        left, right = self._nodes[cell], self._nodes[cell + 1]
        low, high = signed_values[cell], signed_values[cell + 1]
        w = left + (target - low) * (right - left) / (high - low)

        for _ in range(25):
            residual = self._direction * self._spline(w) - target
            slope = self._direction * self._derivative(w)
            with np.errstate(divide='ignore', invalid='ignore'):
                step = np.where(slope > 0.0, residual / slope, 0.0)
            w_next = np.clip(w - step, left, right)
            converged = np.max(np.abs(w_next - w)) <= INVERSION_TOLERANCE
            w = w_next
            if converged:
                break

        return float(w[0]) if scalar else w


class PhiMaps(object):
    """
    The travel-time maps phi1 = int 1/lambda, phi2 = int 1/mu (both from 0), phi3 = phi1 + phi2 and
    phi4(w) = phi1(w) + phi2(-w), tabulated on a shared uniform grid.
    """

    def __init__(self, phi1, phi2):
        self._phi1 = phi1
        self._phi2 = phi2
        self._phi3 = phi1.combine(phi2)
        self._phi4 = phi1.combine(phi2, mirror_other=True)

    @property
    def nodes(self):
        return self._phi1.nodes

    @property
    def phi1(self):
        return self._phi1

    @property
    def phi2(self):
        return self._phi2

    @property
    def phi3(self):
        return self._phi3

    @property
    def phi4(self):
        return self._phi4

    @property
    def spans(self):
        """The four quantities phi_i(1) - phi_i(-1)"""
        return tuple(table.span for table in (self._phi1, self._phi2, self._phi3, self._phi4))

    def settling_time(self, case):
        """The finite settling time of the target system of ``case``"""
        tag = case.tag if isinstance(case, SpeedCase) else CaseTag(case)
        if tag is CaseTag.EQUAL:
            return max(self._phi1.span, self._phi2.span)
        return self._phi3.span


class CharacteristicPath(object):
    """
    A characteristic curve ending at a query point ``(z, w)``.

    ``w_of_t`` and ``z_of_t`` are given in the coordinates of the triangle the path was computed on.
    """

    def __init__(self, family, z, w, start, t_final, region_tag):
        self._family = family
        self._end = (float(z), float(w))
        self._start = (float(start[0]), float(start[1]))
        self._t_final = float(t_final)
        self._region_tag = region_tag
        self._a_start = float(family.a_map(self._start[1]))
        self._c_start = float(family.c_map(self._start[0]))

    @property
    def t_final(self):
        return self._t_final

    @property
    def start(self):
        return self._start

    @property
    def end(self):
        return self._end

    @property
    def region_tag(self):
        return self._region_tag

    def w_of_t(self, t):
        t = np.asarray(t, dtype=float)
        return self._family.a_map.inverse(self._a_start + t)

    def z_of_t(self, t):
        t = np.asarray(t, dtype=float)
        return self._family.c_map.inverse(self._c_start + self._family.sign * t)

    def sample(self, count=32):
        """Return ``count`` equally spaced times in [0, t_final] with the curve coordinates at them."""
        times = np.linspace(0.0, self._t_final, count)
        return times, self.z_of_t(times), self.w_of_t(times)

    def __repr__(self):
        return 'CharacteristicPath(start={}, end={}, t_final={:.6g}, region={})'.format(
            self._start, self._end, self._t_final, self._region_tag.value)


class CharacteristicFamily(object):
    """
    The characteristics of one kernel equation on the upper triangle (in reflected coordinates for ``w < 0``).

    :param a_map: travel-time map of the w-speed
    :param c_map: travel-time map of the z-speed
    :param sign: ``s`` in ``dz/dt = s c(z)``
    :param primary: the boundary carrying the prescribed trace, ``'diagonal'`` or ``'anti-diagonal'``
    :param secondary: the zero-trace boundary for a kernel that splits into T1/T2, otherwise None
    :param name: a label such as ``'L12'``
    """

    def __init__(self, a_map, c_map, sign, primary, secondary=None, name=None):
        self.a_map = a_map
        self.c_map = c_map
        self.sign = float(sign)
        self.primary = primary
        self.secondary = secondary
        self.name = name
        self._start_maps = {}

    @property
    def splits(self):
        return self.secondary is not None

    def start_map(self, boundary):
        """The invariant as a function of the start parameter r on ``boundary``"""
        if boundary not in self._start_maps:
            mirror = boundary == ANTI_DIAGONAL
            self._start_maps[boundary] = self.a_map.combine(self.c_map, sign=-self.sign, mirror_other=mirror)
        return self._start_maps[boundary]

    def invariant(self, z, w):
        return self.a_map(w) - self.sign * self.c_map(z)

    def on_primary(self, z, w):
        """Boolean mask of the points whose characteristic starts on the primary boundary (region T1)"""
        invariant = self.invariant(z, w)
        if not self.splits:
            return np.ones(np.shape(invariant), dtype=bool)
        direction = self.start_map(self.primary).direction
        return direction * invariant >= -REGION_TIE_TOLERANCE

    def starts(self, z, w):
        """
        Locate the start points of the characteristics through ``(z, w)``.

        :return: tuple ``(r, z0, primary_mask, t_final)`` with the start at ``(z0, r)``
        """
        z = np.asarray(z, dtype=float)
        w = np.asarray(w, dtype=float)
        invariant = self.invariant(z, w)
        primary = self.on_primary(z, w)

        r = np.zeros(np.broadcast(z, w).shape)
        z0 = np.zeros_like(r)
        for boundary, mask in ((self.primary, primary), (self.secondary, ~primary)):
            if boundary is None or not np.any(mask):
                continue
            start_map = self.start_map(boundary)
            r_boundary = np.clip(start_map.inverse(np.broadcast_to(invariant, r.shape)[mask]), 0.0,
                                 np.broadcast_to(w, r.shape)[mask])
            r[mask] = r_boundary
            z0[mask] = r_boundary if boundary == DIAGONAL else -r_boundary

        t_final = np.maximum(self.a_map(w) - self.a_map(r), 0.0)
        return r, z0, primary, t_final

    def path(self, z, w):
        """The :class:`CharacteristicPath` through a single point of the upper triangle."""
        z, w = _check_in_triangle(z, w)
        r, z0, primary, t_final = self.starts(np.array([z]), np.array([w]))
        if not self.splits:
            region = RegionTag.NOT_APPLICABLE
        else:
            region = RegionTag.T1 if primary[0] else RegionTag.T2
        return CharacteristicPath(self, z, w, (z0[0], r[0]), t_final[0], region)


def build_phi_maps(profile, n=DEFAULT_PHI_NODES):
    """
    Tabulate the travel-time maps of a profile.

    :param profile: the plant coefficients
    :type profile: :class:`backstep.profiles.CoefficientProfile`
    :param n: the number of grid cells, even and at least 16
    :raises NonPositiveSpeedError: if any speed sample is not strictly positive
    """
    if n < 16:
        raise ValueError('at least 16 cells are needed, got {}'.format(n))
    if n % 2:
        n += 1
    profile.validate()

    nodes = np.linspace(-1.0, 1.0, n + 1)
    nodes[n // 2] = 0.0

    tables = []
    for speed in (profile.lam(nodes), profile.mu(nodes)):
        slowness = 1.0 / speed
        tables.append(MonotoneTable(nodes, _integrate_from_zero(nodes, slowness), slowness))

    _LOGGER.debug('phi maps for %s: spans %.12g, %.12g', profile.name, tables[0].span, tables[1].span)
    return PhiMaps(tables[0], tables[1])


def _integrate_from_zero(nodes, integrand):
    middle = nodes.size // 2
    values = np.empty_like(nodes)
    values[middle:] = cumulative_trapezoid(integrand[middle:], nodes[middle:], initial=0.0)
    values[:middle + 1] = cumulative_trapezoid(integrand[middle::-1], nodes[middle::-1], initial=0.0)[::-1]
    return values


def classify_speed_case(profile, tol=1e-10):
    """
    Decide which of the three speed cases applies by evaluating ``g(w) = lambda(w) - mu(-w)`` at the nodes.

    :param tol: relative tolerance for declaring the Equal case
    :rtype: :class:`SpeedCase`
    :raises MixedSignSpeedsError: if g changes sign, so that no case applies
    """
    g = profile.lam_nodes - profile.mu_nodes[::-1]
    scale = max(np.max(np.abs(profile.lam_nodes)), np.max(np.abs(profile.mu_nodes)))
    margin = float(np.min(np.abs(g)))

    if np.max(np.abs(g)) <= tol * scale:
        return SpeedCase(CaseTag.EQUAL, margin)
    if np.min(g) > 0.0:
        if margin <= tol * scale:
            _LOGGER.warning('lambda(w) - mu(-w) comes within %.3g of zero; case 2 classification is marginal', margin)
        return SpeedCase(CaseTag.LAMBDA_FASTER, margin)
    if np.max(g) < 0.0:
        if margin <= tol * scale:
            _LOGGER.warning('lambda(w) - mu(-w) comes within %.3g of zero; case 3 classification is marginal', margin)
        return SpeedCase(CaseTag.MU_FASTER, margin)

    raise MixedSignSpeedsError('lambda(w) - mu(-w) ranges over [{:.6g}, {:.6g}] and changes sign'.format(
        np.min(g), np.max(g)))


_FAMILY_LAYOUT = {
    # kernel: (w-speed map, z-speed map, sign, primary boundary, case in which the kernel splits)
    'L11': ('phi1', 'phi1', 1.0, ANTI_DIAGONAL, None),
    'L12': ('phi1', 'phi2', -1.0, DIAGONAL, CaseTag.LAMBDA_FASTER),
    'L22': ('phi2', 'phi2', 1.0, ANTI_DIAGONAL, None),
    'L21': ('phi2', 'phi1', -1.0, DIAGONAL, CaseTag.MU_FASTER),
}


def _other_boundary(boundary):
    return ANTI_DIAGONAL if boundary == DIAGONAL else DIAGONAL


def characteristic_family(kernel, phi, case, reflected=False):
    """
    Build the :class:`CharacteristicFamily` of a kernel.

    :param kernel: one of ``'L11', 'L12', 'L21', 'L22'``
    :param phi: the travel-time maps
    :param case: the speed case
    :param reflected: True for the lower triangle, described in the coordinate ``w~ = -w``
    """
    a_name, c_name, sign, primary, split_case = _FAMILY_LAYOUT[kernel]
    a_map = getattr(phi, a_name)
    c_map = getattr(phi, c_name)
    tag = case.tag if isinstance(case, SpeedCase) else CaseTag(case)

    if reflected:
        a_map = a_map.reflected()
        sign = -sign
        primary = _other_boundary(primary)

    secondary = _other_boundary(primary) if tag is split_case else None
    return CharacteristicFamily(a_map, c_map, sign, primary, secondary, name=kernel)


def _check_in_triangle(z, w):
    z = float(z)
    w = float(w)
    if w < -DOMAIN_TOLERANCE or w > 1.0 + DOMAIN_TOLERANCE or abs(z) > w + DOMAIN_TOLERANCE:
        raise OutOfDomainError('point (z={}, w={}) lies outside of the triangle -w <= z <= w <= 1'.format(z, w))
    w = min(max(w, 0.0), 1.0)
    return min(max(z, -w), w), w


def characteristic_L11(z, w, phi, case=CaseTag.EQUAL):
    """
    The characteristic of L11 through ``(z, w)``: ``dw/dt = lambda(w)``, ``dz/dt = lambda(z)``, starting on the
    anti-diagonal at ``(-r, r)`` with ``phi1(r) - phi1(-r) = phi1(w) - phi1(z)``.

    :raises OutOfDomainError: if ``(z, w)`` lies outside of the upper triangle
    """
    return characteristic_family('L11', phi, case).path(z, w)


def characteristic_L12(z, w, phi, case):
    """
    The characteristic of L12 through ``(z, w)``: ``dw/dt = lambda(w)``, ``dz/dt = -mu(z)``.

    It starts on the diagonal, except in case 2 where points with ``phi1(w) + phi2(z) < 0`` (region T2)
    start on the anti-diagonal.
    """
    return characteristic_family('L12', phi, case).path(z, w)


def characteristic_L21(z, w, phi, case):
    """The characteristic of L21, splitting into T1/T2 in case 3"""
    return characteristic_family('L21', phi, case).path(z, w)


def characteristic_L22(z, w, phi, case=CaseTag.EQUAL):
    return characteristic_family('L22', phi, case).path(z, w)
