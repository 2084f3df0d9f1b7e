# -*- coding: utf-8 -*-
"""
Time-domain simulation of the plant and of the target systems with first-order upwind transport.

``u`` travels rightward with speed lambda and is actuated at ``w = -1``; ``v`` travels leftward with speed mu and
is actuated at ``w = 1``.
"""
import logging
import math

import numpy as np

from . import geometry
from .exceptions import CflViolationError, MissingFeedforwardError
from .listeners import SimulationListener
from .utils import EventHelper, signed_trapezoid_matrix, trapezoid_weights

__all__ = [
    'PlantState', 'TargetState', 'SimConfig', 'SimulationResult', 'Simulation', 'TargetSimulation',
    'NormTraceRecorder', 'SnapshotRecorder', 'uniform_grid', 'l2_norm', 'initial_condition', 'step_plant',
    'simulate', 'simulate_target', 'explicit_target_case1', 'settling_time', 'target_grid_study', 'INITIAL_CONDITIONS'
]

_LOGGER = logging.getLogger(__name__)

CFL_TOLERANCE = 1e-12
MIN_PLANT_NODES = 21


def uniform_grid(nx):
    """``nx`` equally spaced nodes on [-1, 1] with the middle node exactly at zero"""
    nodes = np.linspace(-1.0, 1.0, nx)
    if nx % 2:
        nodes[nx // 2] = 0.0
    return nodes


def l2_norm(nodes, *fields):
    """The trapezoid L2 norm of one or more fields sampled on ``nodes``"""
    weights = trapezoid_weights(nodes)
    return float(math.sqrt(sum(float(np.dot(weights, np.asarray(field)**2)) for field in fields)))


def _bump(nodes, left, right):
    return np.where((nodes >= left) & (nodes <= right), 1.0, 0.0)


INITIAL_CONDITIONS = {
    'paper': lambda w: (w**2, np.exp(w)),
    'bump': lambda w: (_bump(w, -0.5, 0.0), _bump(w, 0.0, 0.5)),
    'smooth': lambda w: ((1.0 - w**2)**2, (1.0 - w**2)**2),
    'zero': lambda w: (np.zeros_like(w), np.zeros_like(w)),
}


def initial_condition(name, nodes):
    """
    The built-in initial data sampled on ``nodes``.

    :param name: ``'paper'`` (``w^2``, ``exp(w)``), ``'bump'`` (indicators of [-0.5, 0] and [0, 0.5]),
        ``'smooth'`` (``(1 - w^2)^2`` for both) or ``'zero'``
    """
    try:
        builder = INITIAL_CONDITIONS[name]
    except KeyError:
        raise ValueError('unknown initial condition {!r}, choose one of {}'.format(name, sorted(INITIAL_CONDITIONS)))
    first, second = builder(np.asarray(nodes, dtype=float))
    return np.array(first, dtype=float), np.array(second, dtype=float)


class PlantState(object):
    """
    The plant fields at one time together with the boundary inputs applied last.
    """

    def __init__(self, t, nodes, u, v, U1=0.0, U2=0.0):  # pylint: disable=invalid-name
        self.t = float(t)
        self.nodes = nodes
        self.u = np.array(u, dtype=float)
        self.v = np.array(v, dtype=float)
        if self.u.shape != self.v.shape or self.u.shape != np.shape(nodes):
            raise ValueError('u, v and the grid must have equal lengths')
        self.U1 = float(U1)  # pylint: disable=invalid-name
        self.U2 = float(U2)  # pylint: disable=invalid-name

    @property
    def nx(self):
        return self.u.size

    def l2_norm(self):
        return l2_norm(self.nodes, self.u, self.v)

    def scaled(self, factor):
        return PlantState(self.t, self.nodes, factor * self.u, factor * self.v, factor * self.U1, factor * self.U2)

    def __repr__(self):
        return 'PlantState(t={:.6g}, nx={}, U1={:.6g}, U2={:.6g})'.format(self.t, self.nx, self.U1, self.U2)


class TargetState(object):
    """The target fields at one time"""

    def __init__(self, t, nodes, alpha, beta):
        self.t = float(t)
        self.nodes = nodes
        self.alpha = np.array(alpha, dtype=float)
        self.beta = np.array(beta, dtype=float)

    @property
    def nx(self):
        return self.alpha.size

    def l2_norm(self):
        return l2_norm(self.nodes, self.alpha, self.beta)

    def __repr__(self):
        return 'TargetState(t={:.6g}, nx={})'.format(self.t, self.nx)


class SimConfig(object):
    """
    Resolution and horizon of a simulation.

    :param nx: number of grid nodes, odd
    :param cfl: Courant number in (0, 1]
    :param t_final: horizon
    :param record_every: record a snapshot every this many steps (and at the horizon)
    """

    def __init__(self, nx=401, cfl=0.8, t_final=3.0, record_every=10, l2_quadrature='trapezoid'):
        if nx < MIN_PLANT_NODES or nx % 2 == 0:
            raise ValueError('nx must be odd and at least {}, got {}'.format(MIN_PLANT_NODES, nx))
        if not 0.0 < cfl <= 1.0:
            raise ValueError('cfl must lie in (0,1]')
        if t_final <= 0.0:
            raise ValueError('t_final must be positive, got {}'.format(t_final))
        if record_every < 1:
            raise ValueError('record_every must be at least 1')
        if l2_quadrature != 'trapezoid':
            raise ValueError('only the trapezoid quadrature is supported')
        self.nx = int(nx)
        self.cfl = float(cfl)
        self.t_final = float(t_final)
        self.record_every = int(record_every)
        self.l2_quadrature = l2_quadrature

    @property
    def dx(self):
        return 2.0 / (self.nx - 1)

    def nodes(self):
        return uniform_grid(self.nx)

    def time_step(self, max_speed):
        """The number of steps and the step length: ``dt <= cfl dx / max_speed`` with steps dividing the horizon"""
        dt_bound = self.cfl * self.dx / max_speed
        steps = max(1, int(math.ceil(self.t_final / dt_bound * (1.0 - 1e-14))))
        return steps, self.t_final / steps

    def replace(self, **changes):
        values = dict(nx=self.nx, cfl=self.cfl, t_final=self.t_final, record_every=self.record_every)
        values.update(changes)
        return SimConfig(**values)

    def __repr__(self):
        return 'SimConfig(nx={}, cfl={}, t_final={}, record_every={})'.format(self.nx, self.cfl, self.t_final,
                                                                            self.record_every)


class _Transport(object):
    """Speeds and couplings sampled on a plant grid"""

    def __init__(self, profile, nodes):
        self.nodes = nodes
        self.dx = float(nodes[1] - nodes[0])
        self.lam = profile.lam(nodes)
        self.mu = profile.mu(nodes)
        self.b = profile.b(nodes)
        self.c = profile.c(nodes)
        self.max_speed = float(max(np.max(self.lam), np.max(self.mu)))

    def check(self, dt):
        courant = dt * self.max_speed / self.dx
        if courant > 1.0 + CFL_TOLERANCE:
            raise CflViolationError('time step {:.6g} gives Courant number {:.6g} > 1'.format(dt, courant))

    def advance(self, first, second, dt, first_source=None, second_source=None):
        """One upwind step of the interior nodes; the inflow nodes keep their old values."""
        ratio = dt / self.dx
        new_first = first.copy()
        new_second = second.copy()
        new_first[1:] = first[1:] - ratio * self.lam[1:] * (first[1:] - first[:-1])
        new_second[:-1] = second[:-1] + ratio * self.mu[:-1] * (second[1:] - second[:-1])
        if first_source is not None:
            new_first[1:] += dt * first_source[1:]
        if second_source is not None:
            new_second[:-1] += dt * second_source[:-1]
        return new_first, new_second


def step_plant(state, profile, controls, dt, transport=None):
    """
    Advance the plant by one step: upwind transport, explicit coupling ``b v`` and ``c u``, then the boundary
    inputs ``u(-1) = U1`` and ``v(1) = U2``.

    :raises CflViolationError: if ``dt`` exceeds the CFL bound
    :rtype: :class:`PlantState`
    """
    transport = transport or _Transport(profile, state.nodes)
    transport.check(dt)
    u, v = transport.advance(state.u, state.v, dt, transport.b * state.v, transport.c * state.u)
    first, second = controls
    u[0] = first
    v[-1] = second
    return PlantState(state.t + dt, state.nodes, u, v, first, second)


class SimulationResult(object):
    """Recorded snapshots and the norm trace of a finished simulation"""

    def __init__(self, snapshots, trace, steps, dt):
        self.snapshots = list(snapshots)
        self.trace = trace
        self.steps = steps
        self.dt = dt

    @property
    def final(self):
        return self.snapshots[-1]

    def times(self):
        return np.array([row[0] for row in self.trace])

    def norms(self, column=1):
        return np.array([row[column] for row in self.trace])


class NormTraceRecorder(SimulationListener):
    """
    Records ``(t, l2_uv, l2_alphabeta, U1, U2)`` at every recorded time. The target norm is NaN without a
    transform.
    """

    def __init__(self, transform=None):
        self._transform = transform
        self.rows = []
        self.boundary_residuals = []

    def on_recorded(self, simulation, state):
        if isinstance(state, TargetState):
            self.rows.append((state.t, state.l2_norm(), state.l2_norm(), 0.0, 0.0))
            return

        target_norm = float('nan')
        if self._transform is not None:
            target = self._transform(state)
            target_norm = target.l2_norm()
            self.boundary_residuals.append((state.t, float(target.alpha[0]), float(target.beta[-1])))
        self.rows.append((state.t, state.l2_norm(), target_norm, state.U1, state.U2))


class SnapshotRecorder(SimulationListener):
    """Keeps every recorded state"""

    def __init__(self):
        self.states = []

    def on_recorded(self, simulation, state):
        self.states.append(state)


class Simulation(object):
    """
    A fixed-step plant simulation.

    :param controller: a callable mapping the transported state (before the boundary inputs are applied) to
        ``(U1, U2)``; zero inputs when None
    """

    def __init__(self, profile, config, initial='paper', controller=None, listeners=()):
        self._profile = profile
        self._config = config
        self._nodes = config.nodes()
        self._transport = _Transport(profile, self._nodes)
        self._controller = controller
        self._event_helper = EventHelper(SimulationListener)
        for listener in listeners:
            self.add_listener(listener)

        if isinstance(initial, str):
            u0, v0 = initial_condition(initial, self._nodes)
        else:
            u0, v0 = initial
        self._state = PlantState(0.0, self._nodes, u0, v0, u0[0], v0[-1])
        self._steps, self._dt = config.time_step(self._transport.max_speed)

    @property
    def state(self):
        return self._state

    @property
    def nodes(self):
        return self._nodes

    @property
    def dt(self):
        return self._dt

    @property
    def steps(self):
        return self._steps

    def add_listener(self, listener):
        self._event_helper.add_listener(listener)

    def remove_listener(self, listener):
        self._event_helper.remove_listener(listener)

    def _controls(self, provisional):
        if self._controller is None:
            return 0.0, 0.0
        return self._controller(provisional)

    def step(self):
        transport = self._transport
        state = self._state
        transport.check(self._dt)
        u, v = transport.advance(state.u, state.v, self._dt, transport.b * state.v, transport.c * state.u)
        provisional = PlantState(state.t + self._dt, self._nodes, u, v, state.U1, state.U2)
        first, second = self._controls(provisional)
        u[0] = first
        v[-1] = second
        self._state = PlantState(provisional.t, self._nodes, u, v, first, second)
        return self._state

    def run(self):
        snapshots = SnapshotRecorder()
        trace = NormTraceRecorder()
        self.add_listener(snapshots)
        self.add_listener(trace)
        try:
            self._fire('on_simulation_started')
            self._fire('on_recorded')
            for index in range(1, self._steps + 1):
                self.step()
                self._fire('on_step')
                if index % self._config.record_every == 0 or index == self._steps:
                    self._fire('on_recorded')
            self._fire('on_simulation_finished')
        finally:
            self.remove_listener(snapshots)
            self.remove_listener(trace)

        _LOGGER.debug('simulated %s for %d steps of %.3e', self._profile.name, self._steps, self._dt)
        return SimulationResult(snapshots.states, trace.rows, self._steps, self._dt)

    def _fire(self, hook):
        self._event_helper.fire_event(getattr(SimulationListener, hook), self, self._state)


def simulate(profile, config, controller=None, initial='paper', listeners=()):
    """
    Run the plant from ``initial`` to ``config.t_final``.

    :param controller: feedback mapping a state to ``(U1, U2)``, open loop when None
    :param initial: the name of a built-in initial condition or a tuple ``(u0, v0)``
    :param listeners: extra :class:`backstep.listeners.SimulationListener` instances
    :rtype: :class:`SimulationResult`
    """
    return Simulation(profile, config, initial, controller, listeners).run()


class TargetSimulation(object):
    """
    A fixed-step simulation of the target system of one speed case.

    Case 2 adds ``-p(w) alpha(-w) + int_{-w}^{w} (D+ alpha + D- beta) dz`` to the beta equation, Case 3 adds
    ``-q(w) beta(-w) + int_{-w}^{w} (K+ alpha + K- beta) dz`` to the alpha equation.
    """

    def __init__(self, case, profile, config, initial='smooth', feedforward=None, listeners=()):
        tag = case.tag if isinstance(case, geometry.SpeedCase) else geometry.CaseTag(case)
        if tag is not geometry.CaseTag.EQUAL and feedforward is None:
            raise MissingFeedforwardError('the {} target system needs its feedforward kernels'.format(tag.label))

        self._tag = tag
        self._config = config
        self._nodes = config.nodes()
        self._transport = _Transport(profile, self._nodes)
        self._event_helper = EventHelper(SimulationListener)
        for listener in listeners:
            self._event_helper.add_listener(listener)

        if isinstance(initial, str):
            alpha0, beta0 = initial_condition(initial, self._nodes)
        else:
            alpha0, beta0 = initial
        alpha0 = np.array(alpha0, dtype=float)
        beta0 = np.array(beta0, dtype=float)
        alpha0[0] = 0.0
        beta0[-1] = 0.0
        self._state = TargetState(0.0, self._nodes, alpha0, beta0)
        self._steps, self._dt = config.time_step(self._transport.max_speed)

        self._reflection = None
        self._plus = None
        self._minus = None
        if feedforward is not None and tag is not geometry.CaseTag.EQUAL:
            weights = signed_trapezoid_matrix(self._nodes)
            z_points = np.repeat(self._nodes[np.newaxis, :], self._nodes.size, axis=0)
            w_points = np.repeat(self._nodes[:, np.newaxis], self._nodes.size, axis=1)
            self._reflection = feedforward.trace(self._nodes)
            self._plus = weights * feedforward.sample('plus', z_points, w_points)
            self._minus = weights * feedforward.sample('minus', z_points, w_points)

    @property
    def dt(self):
        return self._dt

    @property
    def state(self):
        return self._state

    def _couplings(self, alpha, beta):
        if self._reflection is None:
            return None, None
        integral = self._plus.dot(alpha) + self._minus.dot(beta)
        if self._tag is geometry.CaseTag.LAMBDA_FASTER:
            return None, -self._reflection * alpha[::-1] + integral
        return -self._reflection * beta[::-1] + integral, None

    def step(self):
        state = self._state
        self._transport.check(self._dt)
        alpha_source, beta_source = self._couplings(state.alpha, state.beta)
        alpha, beta = self._transport.advance(state.alpha, state.beta, self._dt, alpha_source, beta_source)
        alpha[0] = 0.0
        beta[-1] = 0.0
        self._state = TargetState(state.t + self._dt, self._nodes, alpha, beta)
        return self._state

    def run(self):
        snapshots = SnapshotRecorder()
        trace = NormTraceRecorder()
        self._event_helper.add_listener(snapshots)
        self._event_helper.add_listener(trace)
        try:
            self._fire('on_simulation_started')
            self._fire('on_recorded')
            for index in range(1, self._steps + 1):
                self.step()
                self._fire('on_step')
                if index % self._config.record_every == 0 or index == self._steps:
                    self._fire('on_recorded')
            self._fire('on_simulation_finished')
        finally:
            self._event_helper.remove_listener(snapshots)
            self._event_helper.remove_listener(trace)
        return SimulationResult(snapshots.states, trace.rows, self._steps, self._dt)

    def _fire(self, hook):
        self._event_helper.fire_event(getattr(SimulationListener, hook), self, self._state)


def simulate_target(case, feedforward, config, profile, initial='smooth', listeners=()):
    """
    Run the target system of ``case`` with zero boundary inputs.

    :raises MissingFeedforwardError: for Cases 2 and 3 without feedforward kernels
    :rtype: :class:`SimulationResult`
    """
    return TargetSimulation(case, profile, config, initial, feedforward, listeners).run()


def explicit_target_case1(alpha0, beta0, phi, w, t):
    """
    The closed-form solution of the Equal-case target system.

    ``alpha(w, t) = alpha0(phi1^-1(phi1(w) - t))`` while ``t < phi1(w) - phi1(-1)`` and zero afterwards;
    ``beta(w, t) = beta0(phi2^-1(phi2(w) + t))`` while ``t < phi2(1) - phi2(w)`` and zero afterwards.

    :param alpha0: vectorised callable
    :param beta0: vectorised callable
    :return: ``(alpha, beta)`` at the points ``w``
    """
    w = np.asarray(w, dtype=float)
    phi1 = phi.phi1(w)
    phi2 = phi.phi2(w)
    alive_alpha = (t < phi1 - float(phi.phi1(-1.0))) | (t <= 0.0)
    alive_beta = (t < float(phi.phi2(1.0)) - phi2) | (t <= 0.0)
    alpha = np.where(alive_alpha, alpha0(phi.phi1.inverse(phi1 - t)), 0.0)
    beta = np.where(alive_beta, beta0(phi.phi2.inverse(phi2 + t)), 0.0)
    return alpha, beta


def settling_time(times, norms, threshold=1e-2):
    """
    The first time after which the norm stays at or below ``threshold`` times its initial value.

    :return: the time, or None if the norm never settles
    """
    norms = np.asarray(norms, dtype=float)
    times = np.asarray(times, dtype=float)
    if norms.size == 0:
        return None
    if norms[0] == 0.0:
        return float(times[0])
    above = np.flatnonzero(norms > threshold * norms[0])
    if above.size == 0:
        return float(times[0])
    last = above[-1]
    if last + 1 >= norms.size:
        return None
    return float(times[last + 1])


def target_grid_study(profile, phi, grids, cfl=0.8, t_check=None, initial='smooth'):
    """
    Compare the simulated Equal-case target system with its closed-form solution on several grids.

    :param grids: plant node counts, increasing
    :param t_check: comparison time, half the phi1 span when None
    :return: list of dictionaries with ``nx``, ``dx``, ``error`` and ``order`` (None on the first grid)
    """
    if t_check is None:
        t_check = 0.5 * phi.phi1.span
    builder = INITIAL_CONDITIONS[initial]

    def alpha0(points):
        return builder(points)[0]

    def beta0(points):
        return builder(points)[1]

    rows = []
    for nx in grids:
        config = SimConfig(nx=nx, cfl=cfl, t_final=t_check, record_every=10**9)
        result = simulate_target(geometry.CaseTag.EQUAL, None, config, profile, initial)
        final = result.final
        exact_alpha, exact_beta = explicit_target_case1(alpha0, beta0, phi, final.nodes, final.t)
        error = float(max(np.max(np.abs(final.alpha - exact_alpha)), np.max(np.abs(final.beta - exact_beta))))
        order = None
        if rows and error > 0.0 and rows[-1]['error'] > 0.0:
            order = math.log(rows[-1]['error'] / error) / math.log(rows[-1]['dx'] / config.dx)
        rows.append({'nx': nx, 'dx': config.dx, 'error': error, 'order': order})
        _LOGGER.info('target check nx=%d: error %.3e, order %s', nx, error, order)
    return rows
