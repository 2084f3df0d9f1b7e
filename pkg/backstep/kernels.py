# -*- coding: utf-8 -*-
"""
The four backstepping kernels on the triangular domain and the successive-approximation solver that computes them.

The domain ``E = {-|w| <= z <= |w|, -1 <= w <= 1}`` is stored as two triangles: the upper one (``w >= 0``) holds
``L11, L12, L21, L22``, the lower one holds the same kernels in the reflected coordinate ``w~ = -w`` under the
names ``K11, K12, K21, K22``. Both triangles are sampled on ``nw x ns`` nodes ``w_i = i/(nw - 1)``,
``s_j = j/(ns - 1)`` with ``z = w (2 s - 1)``.
"""
import logging
import math

import numpy as np
from scipy import ndimage

from . import geometry
from .exceptions import CaseMismatchError, NoConvergenceError

__all__ = [
    'KernelGrid', 'SolverDiagnostics', 'ResidualReport', 'BoundReport', 'solve_kernels', 'kernel_residual',
    'kernel_bound_check', 'triangle_bilinear', 'KERNEL_NAMES', 'MIN_KERNEL_NODES'
]

_LOGGER = logging.getLogger(__name__)

KERNEL_NAMES = ('L11', 'L12', 'L21', 'L22')
REFLECTED_NAMES = {'L11': 'K11', 'L12': 'K12', 'L21': 'K21', 'L22': 'K22'}
MIN_KERNEL_NODES = 33

# Kernels solved together, the zero-trace kernel first
_SUBSYSTEMS = (('L11', 'L12'), ('L22', 'L21'))

# Coefficients of the source terms on the upper triangle: source_k = sum_q sign * coefficient(z) * M_q
# The lower triangle carries the same terms with opposite signs.
_SOURCES = {
    ('L11', 'L12'): ((('lam_prime', -1.0), ('c', -1.0)), (('b', -1.0), ('mu_prime', 1.0))),
    ('L22', 'L21'): ((('mu_prime', -1.0), ('b', 1.0)), (('c', 1.0), ('lam_prime', 1.0))),
}

# (speed along w, speed along z) of each kernel equation
_SPEEDS = {'L11': ('lam', 'lam'), 'L12': ('lam', 'mu'), 'L22': ('mu', 'mu'), 'L21': ('mu', 'lam')}

_REGION_LABELS = {True: geometry.RegionTag.T1.value, False: geometry.RegionTag.T2.value}

_EDGE_GAP = 2
# Fixed neighbourhoods left out of the residual check: below this w the z spacing 2w ds collapses, and the
# discontinuous kernel is not differentiated within this distance of its T1/T2 line
APEX_BAND = 0.125
TAG_BAND = 1.0 / 32.0


class KernelGrid(object):
    """
    Sampled kernels on both triangles of the domain together with their T1/T2 tags.

    :param fields: mapping from ``'L11'..'L22'`` (upper triangle) and ``'K11'..'K22'`` (lower triangle, reflected
        coordinate) to arrays of shape ``(nw, ns)``
    :param case: the speed case the kernels were solved for
    :param families: mapping from ``(kernel, reflected)`` to the :class:`backstep.geometry.CharacteristicFamily`
        of a kernel that splits into T1/T2, used to tag arbitrary query points
    :param tags: mapping from ``(kernel, reflected)`` to boolean arrays, True on T1
    """

    def __init__(self, fields, case, families=None, tags=None, h1_trace=None, h2_trace=None):
        shape = None
        self._fields = {}
        for name in KERNEL_NAMES:
            for key in (name, REFLECTED_NAMES[name]):
                array = np.array(fields[key], dtype=float)
                if shape is None:
                    shape = array.shape
                if array.ndim != 2 or array.shape != shape:
                    raise ValueError('kernel {} has shape {}, expected {}'.format(key, array.shape, shape))
                array.flags.writeable = False
                self._fields[key] = array

        nw, ns = shape
        if nw < 2 or ns < 3 or ns % 2 == 0:
            raise ValueError('kernel grids need at least two rows and an odd number of at least three columns')

        self._case = case
        self._w_nodes = np.linspace(0.0, 1.0, nw)
        self._s_nodes = np.linspace(0.0, 1.0, ns)
        self._families = dict(families or {})
        self._tags = {key: np.array(value, dtype=bool) for key, value in (tags or {}).items()}
        self._h1_trace = h1_trace
        self._h2_trace = h2_trace

    @classmethod
    def from_fields(cls, functions, nw=65, ns=65, case=geometry.CaseTag.EQUAL):
        """
        Sample kernel functions ``f(z, w)`` given for actual coordinates on the whole domain. Kernels that are not
        supplied are zero. No T1/T2 tags are attached.
        """
        w_nodes = np.linspace(0.0, 1.0, nw)
        s_nodes = np.linspace(0.0, 1.0, ns)
        w_grid, s_grid = np.meshgrid(w_nodes, s_nodes, indexing='ij')
        z_grid = w_grid * (2.0 * s_grid - 1.0)

        fields = {}
        for name in KERNEL_NAMES:
            function = functions.get(name)
            for key, sign in ((name, 1.0), (REFLECTED_NAMES[name], -1.0)):
                if function is None:
                    fields[key] = np.zeros_like(w_grid)
                else:
                    fields[key] = np.broadcast_to(function(z_grid, sign * w_grid), w_grid.shape)
        return cls(fields, case)

    @property
    def case(self):
        return self._case

    @property
    def shape(self):
        return self._fields['L11'].shape

    @property
    def w_nodes(self):
        return self._w_nodes

    @property
    def s_nodes(self):
        return self._s_nodes

    @property
    def h1_trace(self):
        """Samples of h1 on the upper-triangle rows, when known"""
        return self._h1_trace

    @property
    def h2_trace(self):
        return self._h2_trace

    def z_grid(self):
        """The z coordinate of every node, shape ``(nw, ns)``, in the coordinates of either triangle"""
        return self._w_nodes[:, np.newaxis] * (2.0 * self._s_nodes[np.newaxis, :] - 1.0)

    def upper(self, name):
        return self._fields[name]

    def lower(self, name):
        return self._fields[REFLECTED_NAMES[name]]

    def tags(self, name, reflected=False):
        """The T1 mask of a kernel that splits, otherwise None"""
        return self._tags.get((name, reflected))

    @property
    def discontinuity_mask(self):
        """The T1 masks ``(upper, lower)`` of the kernel that splits, None in the Equal case"""
        for name in KERNEL_NAMES:
            if (name, False) in self._tags:
                return self._tags[(name, False)], self._tags[(name, True)]
        return None

    @property
    def split_kernel(self):
        for name in KERNEL_NAMES:
            if (name, False) in self._tags:
                return name
        return None

    def sup_norm(self):
        return max(float(np.max(np.abs(array))) for array in self._fields.values())

    def sample(self, name, z, w):
        """
        Evaluate a kernel at arbitrary points ``(z, w)`` of the domain by bilinear interpolation in ``(w, s)``.

        Across the T1/T2 line only nodes carrying the tag of the query point contribute.
        """
        z, w = np.broadcast_arrays(np.asarray(z, dtype=float), np.asarray(w, dtype=float))
        shape = z.shape
        z = z.ravel()
        w = w.ravel()
        result = np.empty(z.shape)
        upper = w >= 0.0
        for reflected, mask in ((False, upper), (True, ~upper)):
            if not np.any(mask):
                continue
            key = REFLECTED_NAMES[name] if reflected else name
            w_local = -w[mask] if reflected else w[mask]
            result[mask] = self._interpolate(self._fields[key], (name, reflected), z[mask], w_local)
        return result.reshape(shape)

    def _interpolate(self, array, tag_key, z, w):
        tags = self._tags.get(tag_key)
        family = self._families.get(tag_key)
        if tags is None or family is None:
            return triangle_bilinear(array, z, w)

        z, w, s, i, theta, corners = _cell_corners(array.shape, z, w)
        query_tags = family.on_primary(z, w)
        total = np.zeros(z.shape)
        weights = np.zeros(z.shape)
        for row, column, weight in corners:
            matching = tags[row, column] == query_tags
            total += np.where(matching, weight * array[row, column], 0.0)
            weights += np.where(matching, weight, 0.0)

        result = np.empty(z.shape)
        good = weights > 1e-12
        result[good] = total[good] / weights[good]
        for index in np.flatnonzero(~good):
            result[index] = self._nearest_tag_value(array, tags, query_tags[index], i[index], theta[index], s[index])
        return result

    def _nearest_tag_value(self, array, tags, tag, row, theta, s):
        values = []
        for candidate, weight in ((row, 1.0 - theta), (row + 1, theta)):
            same = tags[candidate] == tag
            if np.any(same):
                values.append((weight, np.interp(s, self._s_nodes[same], array[candidate][same])))
        if not values:
            return float(array[row + 1][int(round(s * (array.shape[1] - 1)))])
        total_weight = sum(weight for weight, _ in values)
        if total_weight <= 0.0:
            return float(values[0][1])
        return float(sum(weight * value for weight, value in values) / total_weight)

    def rows(self):
        """
        Yield ``(case, kernel, w, z, value, region)`` for every node, upper triangle first, lower triangle with
        actual (negative) ``w``.
        """
        case_label = _case_label(self._case)
        z_grid = self.z_grid()
        for name in KERNEL_NAMES:
            for reflected in (False, True):
                array = self.lower(name) if reflected else self.upper(name)
                tags = self.tags(name, reflected)
                sign = -1.0 if reflected else 1.0
                for i, w_value in enumerate(self._w_nodes):
                    for j in range(array.shape[1]):
                        region = geometry.RegionTag.NOT_APPLICABLE.value if tags is None else \
                            _REGION_LABELS[bool(tags[i, j])]
                        yield case_label, name, sign * w_value, z_grid[i, j], array[i, j], region

    def __repr__(self):
        return 'KernelGrid(case={}, shape={})'.format(_case_label(self._case), self.shape)


class SolverDiagnostics(object):
    """
    Constants of the successive-approximation bound and the history of a kernel solve.

    :ivar a_const: max of 1/lambda and 1/mu
    :ivar b_const: max(|lambda'|, |b|) + max(|mu'|, |c|)
    :ivar h_bar: max of |h1| and |h2|
    :ivar increment_norms: sup-norm of every Picard increment, in order
    :ivar iterations: number of sweeps performed
    :ivar final_residual: sup-norm of the finite-difference residual, filled in on request
    """

    def __init__(self, a_const, b_const, h_bar, increment_norms=(), iterations=0, final_residual=None,
                 warnings=()):
        self.a_const = float(a_const)
        self.b_const = float(b_const)
        self.h_bar = float(h_bar)
        self.increment_norms = tuple(increment_norms)
        self.iterations = int(iterations)
        self.final_residual = final_residual
        self.warnings = tuple(warnings)

    @classmethod
    def from_profile(cls, profile):
        nodes = profile.nodes
        a_const = float(max(np.max(1.0 / profile.lam_nodes), np.max(1.0 / profile.mu_nodes)))
        b_first = max(np.max(np.abs(profile.lam_prime_nodes)), np.max(np.abs(profile.b_nodes)))
        b_second = max(np.max(np.abs(profile.mu_prime_nodes)), np.max(np.abs(profile.c_nodes)))
        h_bar = max(np.max(np.abs(profile.h1(nodes))), np.max(np.abs(profile.h2(nodes))))
        return cls(a_const, b_first + b_second, h_bar)

    def with_h_bar(self, h_bar):
        return SolverDiagnostics(self.a_const, self.b_const, h_bar, self.increment_norms, self.iterations,
                                 self.final_residual, self.warnings)

    def envelope(self, iteration):
        """The factorial bound ``h_bar (a b)^d / d!`` on the increment of sweep ``d``"""
        product = self.a_const * self.b_const
        if self.h_bar == 0.0:
            return 0.0
        if product == 0.0:
            return self.h_bar if iteration == 0 else 0.0
        return self.h_bar * math.exp(iteration * math.log(product) - math.lgamma(iteration + 1))

    def __repr__(self):
        return 'SolverDiagnostics(iterations={}, a={:.6g}, b={:.6g}, h_bar={:.6g})'.format(
            self.iterations, self.a_const, self.b_const, self.h_bar)


class ResidualReport(object):
    """Sup and root-mean-square residuals of every kernel equation over the checked interior nodes"""

    def __init__(self, sup, rms, checked):
        self.sup = dict(sup)
        self.rms = dict(rms)
        self.checked = dict(checked)

    @property
    def worst(self):
        return max(self.sup.values()) if self.sup else 0.0

    def __repr__(self):
        return 'ResidualReport(worst={:.6g})'.format(self.worst)


class BoundReport(object):
    """
    Outcome of comparing the kernels with the exponential envelope ``h_bar exp(a b |w|)``.

    :ivar passed: True if every node lies within the envelope
    :ivar worst_margin: the minimum of ``bound - |L|`` over all nodes
    :ivar worst_ratio: the maximum of ``|L| / bound`` over nodes with a nonzero bound
    :ivar per_kernel: kernel name to its own worst margin
    """

    def __init__(self, passed, worst_margin, worst_ratio, per_kernel):
        self.passed = bool(passed)
        self.worst_margin = float(worst_margin)
        self.worst_ratio = float(worst_ratio)
        self.per_kernel = dict(per_kernel)

    def __repr__(self):
        return 'BoundReport(passed={}, worst_margin={:.6g})'.format(self.passed, self.worst_margin)


def _cell_corners(shape, z, w):
    nw, ns = shape
    w = np.clip(w, 0.0, 1.0)
    z = np.clip(z, -w, w)
    safe_w = np.where(w > 0.0, w, 1.0)
    s = np.where(w > 0.0, 0.5 * (z / safe_w + 1.0), 0.5)

    x = w * (nw - 1)
    i = np.clip(np.floor(x).astype(int), 0, nw - 2)
    theta = x - i
    y = s * (ns - 1)
    j = np.clip(np.floor(y).astype(int), 0, ns - 2)
    eta = y - j

    corners = ((i, j, (1.0 - theta) * (1.0 - eta)), (i, j + 1, (1.0 - theta) * eta), (i + 1, j, theta * (1.0 - eta)),
               (i + 1, j + 1, theta * eta))
    return z, w, s, i, theta, corners


def triangle_bilinear(array, z, w):
    """
    Bilinear interpolation in ``(w, s)`` of a field stored on the nodes of one triangle

    :param array: samples of shape ``(nw, ns)``
    :param z: query abscissae, clamped to ``[-w, w]``
    :param w: query rows in the coordinate of the triangle, clamped to ``[0, 1]``
    """
    _, _, _, _, _, corners = _cell_corners(array.shape, np.asarray(z, dtype=float), np.asarray(w, dtype=float))
    return sum(weight * array[row, column] for row, column, weight in corners)


def _case_label(case):
    if isinstance(case, geometry.SpeedCase):
        return case.tag.label
    return geometry.CaseTag(case).label


def _boundary_trace(name, profile):
    if name == 'L12':
        return profile.h1
    if name == 'L21':
        return profile.h2
    return None


def _profile_function(profile, name):
    return {
        'lam': profile.lam,
        'mu': profile.mu,
        'lam_prime': profile.lam_prime,
        'mu_prime': profile.mu_prime,
        'b': profile.b,
        'c': profile.c,
    }[name]


def _edge_column(boundary, ns):
    return ns - 1 if boundary == geometry.DIAGONAL else 0


class _MarchGeometry(object):
    """Where every node's characteristic starts and where it crosses the previous grid row"""

    def __init__(self, family, w_nodes, s_nodes, bc):
        nw, ns = w_nodes.size, s_nodes.size
        w_grid = np.repeat(w_nodes[:, np.newaxis], ns, axis=1)
        z_grid = w_grid * (2.0 * s_nodes[np.newaxis, :] - 1.0)

        r, z0, primary, t_final = family.starts(z_grid, w_grid)
        boundary = np.where(primary, family.primary, family.secondary or family.primary)

        # Nodes on their own start boundary take the boundary data exactly
        for edge, tag in ((family.primary, True), (family.secondary, False)):
            if edge is None:
                continue
            column = _edge_column(edge, ns)
            on_edge = primary[:, column] == tag
            r[on_edge, column] = w_nodes[on_edge]
            z0[on_edge, column] = w_nodes[on_edge] if edge == geometry.DIAGONAL else -w_nodes[on_edge]
            t_final[on_edge, column] = 0.0
        r[0, :] = 0.0
        z0[0, :] = 0.0
        t_final[0, :] = 0.0

        self.family = family
        self.r = r
        self.z0 = z0
        self.primary = primary
        self.boundary = boundary
        self.t_final = t_final
        self.tags = primary if family.splits else None

        phi_term = np.zeros_like(r)
        if bc is not None:
            phi_term = np.where(primary, bc(z0), 0.0)
        self.phi_term = phi_term

        a_values = family.a_map(w_nodes)
        self.row_steps = np.concatenate([[0.0], np.diff(a_values)])

        self.from_start = np.ones((nw, ns), dtype=bool)
        self.crossing = np.zeros((nw, ns))
        self.theta = np.ones((nw, ns))
        for i in range(1, nw):
            w_previous = w_nodes[i - 1]
            self.from_start[i] = r[i] >= w_previous - 1e-14
            self.theta[i] = np.clip((r[i] - w_previous) / (w_nodes[i] - w_previous), 0.0, 1.0)
            if w_previous <= 0.0:
                continue
            z_cross = family.c_map.inverse(family.c_map(z_grid[i]) - family.sign * self.row_steps[i])
            self.crossing[i] = np.clip(0.5 * (z_cross / w_previous + 1.0), 0.0, 1.0)


def _interp_row(values, s_nodes, s_query, node_tags, query_tags):
    if node_tags is None:
        return np.interp(s_query, s_nodes, values)
    result = np.empty(s_query.shape)
    for tag in (True, False):
        wanted = query_tags == tag
        if not np.any(wanted):
            continue
        same = node_tags == tag
        if not np.any(same):
            same = np.ones_like(node_tags)
        result[wanted] = np.interp(s_query[wanted], s_nodes[same], values[same])
    return result


class _Subsystem(object):
    """A pair of coupled kernel equations on one triangle"""

    def __init__(self, names, reflected, profile, phi, case, w_nodes, s_nodes):
        self.names = names
        self.reflected = reflected
        self.keys = tuple(REFLECTED_NAMES[name] if reflected else name for name in names)
        self.s_nodes = s_nodes
        self.w_nodes = w_nodes

        sign = -1.0 if reflected else 1.0
        z_grid = w_nodes[:, np.newaxis] * (2.0 * s_nodes[np.newaxis, :] - 1.0)

        self.families = [geometry.characteristic_family(name, phi, case, reflected=reflected) for name in names]
        self.geometry = [
            _MarchGeometry(family, w_nodes, s_nodes, _boundary_trace(name, profile))
            for name, family in zip(names, self.families)
        ]

        layout = _SOURCES[names]
        self.coefficients = [[sign * factor * _profile_function(profile, label)(z_grid)
                              for label, factor in row]
                             for row in layout]
        self.start_coefficients = [[[sign * factor * _profile_function(profile, label)(march.z0)
                                     for label, factor in row]
                                    for row in layout]
                                   for march in self.geometry]

        self.known_start = []
        for march in self.geometry:
            known = []
            for name, family in zip(names, self.families):
                trace = _boundary_trace(name, profile)
                mask = np.zeros(march.r.shape, dtype=bool)
                values = np.zeros(march.r.shape)
                on_primary = march.boundary == family.primary
                mask |= on_primary
                if trace is not None:
                    values = np.where(on_primary, trace(march.z0), 0.0)
                if family.secondary is not None:
                    mask |= march.boundary == family.secondary
                known.append((mask, values))
            self.known_start.append(known)

    def phi_terms(self):
        return [march.phi_term.copy() for march in self.geometry]

    def sources(self, fields):
        return [
            self.coefficients[k][0] * fields[0] + self.coefficients[k][1] * fields[1]
            for k in range(2)
        ]

    def sweep(self, fields):
        """One successive approximation: integrate the sources of ``fields`` along every characteristic."""
        nw = self.w_nodes.size
        sources = self.sources(fields)
        updated = []
        for k, march in enumerate(self.geometry):
            integral = np.zeros_like(fields[k])
            known = self.known_start[k]
            for i in range(1, nw):
                source_row = sources[k][i]

                crossing_row = integral[i - 1]
                own_tags = march.tags[i] if march.tags is not None else None
                previous_tags = march.tags[i - 1] if march.tags is not None else None
                source_cross = _interp_row(sources[k][i - 1], self.s_nodes, march.crossing[i], previous_tags, own_tags)
                integral_cross = _interp_row(crossing_row, self.s_nodes, march.crossing[i], previous_tags, own_tags)
                marched = integral_cross + 0.5 * march.row_steps[i] * (source_row + source_cross)

                start_values = []
                for q in range(2):
                    mask, values = known[q]
                    column = np.where(march.boundary[i] == geometry.DIAGONAL, self.s_nodes.size - 1, 0)
                    edge = (1.0 - march.theta[i]) * fields[q][i - 1, column] + march.theta[i] * fields[q][i, column]
                    start_values.append(np.where(mask[i], values[i], edge))
                coefficients = self.start_coefficients[k][k]
                source_start = coefficients[0][i] * start_values[0] + coefficients[1][i] * start_values[1]
                started = 0.5 * march.t_final[i] * (source_row + source_start)

                integral[i] = np.where(march.from_start[i], started, marched)
            updated.append(march.phi_term + integral)
        return updated


def _resolve_case(profile, case, tol):
    classified = geometry.classify_speed_case(profile, tol)
    if case is None or case == 'auto':
        return classified
    tag = case.tag if isinstance(case, geometry.SpeedCase) else geometry.CaseTag(case)
    if tag is not classified.tag:
        raise CaseMismatchError('case {} was requested but the profile is classified as {}'.format(
            tag.label, classified.tag.label))
    return classified


def solve_kernels(profile,
                  phi=None,
                  case=None,
                  nw=129,
                  ns=129,
                  tol=1e-12,
                  max_iterations=200,
                  initial='phi',
                  classification_tol=1e-10):
    """
    Solve the kernel equations on both triangles by successive approximations along the characteristics.

    Each sweep integrates the sources of the previous iterate along every characteristic with the trapezoid rule,
    marching row by row: the integral at a node is the integral at the point where its characteristic crosses the
    previous row plus one trapezoid step. Characteristics that start between two rows are integrated from their
    start point directly.

    :param profile: the plant coefficients
    :param phi: travel-time maps, built from the profile when omitted
    :param case: the expected speed case, or None/'auto' to classify
    :param nw: number of rows per triangle
    :param ns: number of columns per row, odd
    :param tol: stopping tolerance on the sup-norm increment, relative to ``max(1, sup |M|)``
    :param max_iterations: cap on the number of sweeps
    :param initial: ``'phi'`` to start from the boundary-data term, ``'zero'`` to start from zero
    :return: the kernels and the solver diagnostics
    :rtype: tuple(:class:`KernelGrid`, :class:`SolverDiagnostics`)
    :raises CaseMismatchError: if ``case`` disagrees with the classification of the profile
    :raises NoConvergenceError: if the increments leave the factorial envelope or the iteration cap is reached
    """
    if nw < MIN_KERNEL_NODES or ns < MIN_KERNEL_NODES:
        raise ValueError('kernel grids need at least {} nodes per direction'.format(MIN_KERNEL_NODES))
    if ns % 2 == 0:
        raise ValueError('the number of columns must be odd, got {}'.format(ns))
    if initial not in ('phi', 'zero'):
        raise ValueError("initial iterate must be 'phi' or 'zero', got {!r}".format(initial))

    speed_case = _resolve_case(profile, case, classification_tol)
    if phi is None:
        phi = geometry.build_phi_maps(profile)

    diagnostics = SolverDiagnostics.from_profile(profile)
    warnings = []
    if speed_case.tag is geometry.CaseTag.LAMBDA_FASTER and abs(float(profile.h1(0.0))) > 0.0:
        warnings.append('h1(0) = {:.6g} is nonzero, so L12 jumps across the line phi1(w) + phi2(z) = 0'.format(
            float(profile.h1(0.0))))
    if speed_case.tag is geometry.CaseTag.MU_FASTER and abs(float(profile.h2(0.0))) > 0.0:
        warnings.append('h2(0) = {:.6g} is nonzero, so L21 jumps across the line phi2(w) + phi1(z) = 0'.format(
            float(profile.h2(0.0))))
    for warning in warnings:
        _LOGGER.warning(warning)

    w_nodes = np.linspace(0.0, 1.0, nw)
    s_nodes = np.linspace(0.0, 1.0, ns)
    subsystems = [
        _Subsystem(names, reflected, profile, phi, speed_case, w_nodes, s_nodes)
        for reflected in (False, True)
        for names in _SUBSYSTEMS
    ]

    if initial == 'phi':
        iterates = [subsystem.phi_terms() for subsystem in subsystems]
    else:
        iterates = [[np.zeros((nw, ns)), np.zeros((nw, ns))] for _ in subsystems]

    increments = []
    strikes = 0
    converged = False
    iteration = 0
    while iteration < max_iterations:
        iteration += 1
        updated = [subsystem.sweep(fields) for subsystem, fields in zip(subsystems, iterates)]
        increment = max(
            float(np.max(np.abs(new - old)))
            for new_fields, old_fields in zip(updated, iterates)
            for new, old in zip(new_fields, old_fields))
        scale = max(1.0, max(float(np.max(np.abs(field))) for fields in updated for field in fields))
        iterates = updated
        increments.append(increment)
        _LOGGER.debug('Picard sweep %d: increment %.3e', iteration, increment)

        if increment <= tol * scale:
            converged = True
            break

        allowed = max(10.0 * diagnostics.envelope(iteration), 100.0 * tol * scale)
        strikes = strikes + 1 if increment > allowed else 0
        if strikes >= 3:
            raise NoConvergenceError(
                'Picard increments left the factorial envelope at sweep {} (increment {:.3e} > {:.3e})'.format(
                    iteration, increment, allowed),
                iterations=iteration,
                increments=increments)

    if not converged:
        raise NoConvergenceError('Picard iteration did not reach {:.1e} within {} sweeps'.format(tol, max_iterations),
                                 iterations=iteration,
                                 increments=increments)

    fields = {}
    families = {}
    tags = {}
    for subsystem, result in zip(subsystems, iterates):
        for name, key, family, march, field in zip(subsystem.names, subsystem.keys, subsystem.families,
                                                   subsystem.geometry, result):
            fields[key] = field
            if family.splits:
                families[(name, subsystem.reflected)] = family
                tags[(name, subsystem.reflected)] = march.tags

    kernels = KernelGrid(fields,
                         speed_case,
                         families=families,
                         tags=tags,
                         h1_trace=profile.h1(w_nodes),
                         h2_trace=profile.h2(w_nodes))
    diagnostics = SolverDiagnostics(diagnostics.a_const,
                                    diagnostics.b_const,
                                    diagnostics.h_bar,
                                    increment_norms=increments,
                                    iterations=iteration,
                                    warnings=warnings)
    _LOGGER.info('kernels for %s (%s) converged after %d sweeps, sup %.6g', profile.name, speed_case.tag.label,
                 iteration, kernels.sup_norm())
    return kernels, diagnostics


def _exclusion_mask(tags):
    """Nodes within ``TAG_BAND`` (and at least two cells) of a change of tag"""
    nw, ns = tags.shape
    changed = np.zeros_like(tags)
    changed[:-1, :] |= tags[:-1, :] != tags[1:, :]
    changed[1:, :] |= tags[:-1, :] != tags[1:, :]
    changed[:, :-1] |= tags[:, :-1] != tags[:, 1:]
    changed[:, 1:] |= tags[:, :-1] != tags[:, 1:]
    gap_w = max(_EDGE_GAP, int(math.ceil(TAG_BAND * (nw - 1))))
    gap_s = max(_EDGE_GAP, int(math.ceil(TAG_BAND * (ns - 1))))
    return ndimage.binary_dilation(changed, structure=np.ones((2 * gap_w + 1, 2 * gap_s + 1), dtype=bool))


def kernel_residual(kernels, profile, phi=None):
    """
    Evaluate every kernel equation by centered differences at interior nodes.

    Skipped are the nodes within two cells of the diagonal, the anti-diagonal and the outer row, the rows with
    ``w < APEX_BAND`` and the nodes within ``TAG_BAND`` of the T1/T2 line. The T1/T2 exclusion applies to both
    kernels of the coupled pair. The excluded neighbourhoods keep their size when the grid is refined.

    :rtype: :class:`ResidualReport`
    """
    if phi is None:
        phi = geometry.build_phi_maps(profile)

    nw, ns = kernels.shape
    w_nodes = kernels.w_nodes
    dw = w_nodes[1] - w_nodes[0]
    ds = kernels.s_nodes[1] - kernels.s_nodes[0]
    w_grid = np.repeat(w_nodes[:, np.newaxis], ns, axis=1)
    z_grid = kernels.z_grid()

    interior = np.zeros((nw, ns), dtype=bool)
    interior[_EDGE_GAP:nw - _EDGE_GAP, _EDGE_GAP:ns - _EDGE_GAP] = True
    interior[w_nodes < APEX_BAND, :] = False

    sup = {}
    rms = {}
    checked = {}
    for reflected in (False, True):
        sign = -1.0 if reflected else 1.0
        for names in _SUBSYSTEMS:
            mask = interior.copy()
            for name in names:
                tags = kernels.tags(name, reflected)
                if tags is not None:
                    mask &= ~_exclusion_mask(tags)

            arrays = [kernels.lower(name) if reflected else kernels.upper(name) for name in names]
            layout = _SOURCES[names]
            for k, name in enumerate(names):
                family = geometry.characteristic_family(name, phi, kernels.case, reflected=reflected)
                array = arrays[k]
                h_w = np.zeros_like(array)
                h_s = np.zeros_like(array)
                h_w[1:-1, :] = (array[2:, :] - array[:-2, :]) / (2.0 * dw)
                h_s[:, 1:-1] = (array[:, 2:] - array[:, :-2]) / (2.0 * ds)
                with np.errstate(divide='ignore', invalid='ignore'):
                    g_z = np.where(w_grid > 0.0, h_s / (2.0 * np.where(w_grid > 0.0, w_grid, 1.0)), 0.0)
                    g_w = h_w - np.where(w_grid > 0.0, h_s * z_grid / (2.0 * np.where(w_grid > 0.0, w_grid, 1.0)**2),
                                         0.0)

                w_speed, z_speed = _SPEEDS[name]
                a_speed = _profile_function(profile, w_speed)(sign * w_grid)
                c_speed = _profile_function(profile, z_speed)(z_grid)
                source = sum(sign * factor * _profile_function(profile, label)(z_grid) * arrays[q]
                             for q, (label, factor) in enumerate(layout[k]))
                residual = np.abs(a_speed * g_w + family.sign * c_speed * g_z - source)[mask]

                key = REFLECTED_NAMES[name] if reflected else name
                checked[key] = int(residual.size)
                sup[key] = float(np.max(residual)) if residual.size else 0.0
                rms[key] = float(np.sqrt(np.mean(residual**2))) if residual.size else 0.0

    return ResidualReport(sup, rms, checked)


def kernel_bound_check(kernels, diagnostics):
    """
    Compare every node with the bound ``h_bar exp(a b |w|)``.

    :rtype: :class:`BoundReport`
    """
    bound = diagnostics.h_bar * np.exp(diagnostics.a_const * diagnostics.b_const * kernels.w_nodes)[:, np.newaxis]
    per_kernel = {}
    worst_ratio = 0.0
    for name in KERNEL_NAMES:
        for key, array in ((name, kernels.upper(name)), (REFLECTED_NAMES[name], kernels.lower(name))):
            magnitude = np.abs(array)
            per_kernel[key] = float(np.min(bound - magnitude))
            positive = np.broadcast_to(bound, magnitude.shape) > 0.0
            if np.any(positive):
                worst_ratio = max(worst_ratio,
                                  float(np.max(magnitude[positive] / np.broadcast_to(bound, magnitude.shape)[positive])))
            elif np.any(magnitude > 0.0):
                worst_ratio = math.inf

    worst_margin = min(per_kernel.values())
    passed = worst_margin >= -1e-12 * max(1.0, diagnostics.h_bar)
    return BoundReport(passed, worst_margin, worst_ratio, per_kernel)
