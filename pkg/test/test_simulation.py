import math

import numpy as np

from backstep import simulation
from backstep.exceptions import CflViolationError, MissingFeedforwardError
from backstep.geometry import CaseTag
from backstep.listeners import SimulationListener
from backstep.simulation import PlantState, SimConfig

from . import utils


class StepCounter(SimulationListener):

    def __init__(self):
        self.steps = 0
        self.started = False
        self.finished_at = None

    def on_simulation_started(self, simulation, state):
        self.started = True

    def on_step(self, simulation, state):
        self.steps += 1

    def on_simulation_finished(self, simulation, state):
        self.finished_at = state.t


class TestGrid(utils.TestCase):

    def test_uniform_grid(self):
        nodes = simulation.uniform_grid(21)
        self.assertEqual(nodes[10], 0.0)
        self.assertEqual(nodes[0], -1.0)
        self.assertEqual(nodes[-1], 1.0)

    def test_l2_norm(self):
        nodes = simulation.uniform_grid(41)
        ones = np.ones(41)
        self.assertAlmostEqual(simulation.l2_norm(nodes, ones), math.sqrt(2.0), places=12)
        self.assertAlmostEqual(simulation.l2_norm(nodes, ones, ones), 2.0, places=12)

    def test_initial_conditions(self):
        nodes = simulation.uniform_grid(21)
        u0, v0 = simulation.initial_condition('paper', nodes)
        np.testing.assert_allclose(u0, nodes**2)
        np.testing.assert_allclose(v0, np.exp(nodes))

        u0, v0 = simulation.initial_condition('smooth', nodes)
        self.assertEqual(u0[0], 0.0)
        self.assertEqual(v0[-1], 0.0)

        with self.assertRaises(ValueError):
            simulation.initial_condition('sawtooth', nodes)


class TestSimConfig(utils.TestCase):

    def test_defaults(self):
        config = SimConfig()
        self.assertEqual(config.nx, 401)
        self.assertEqual(config.cfl, 0.8)
        self.assertAlmostEqual(config.dx, 0.005)

    def test_invalid(self):
        with self.assertRaises(ValueError) as context:
            SimConfig(cfl=1.5)
        self.assertEqual(str(context.exception), 'cfl must lie in (0,1]')

        with self.assertRaises(ValueError):
            SimConfig(nx=400)
        with self.assertRaises(ValueError):
            SimConfig(nx=11)
        with self.assertRaises(ValueError):
            SimConfig(t_final=0.0)

    def test_time_step(self):
        config = SimConfig(nx=21, cfl=0.8, t_final=1.0)
        steps, dt = config.time_step(2.0)
        self.assertEqual(steps, 25)
        self.assertAlmostEqual(dt, 0.04)
        self.assertLessEqual(dt * 2.0 / config.dx, 0.8 + 1e-12)

    def test_replace(self):
        config = SimConfig(nx=41).replace(t_final=0.5)
        self.assertEqual(config.nx, 41)
        self.assertEqual(config.t_final, 0.5)


class TestPlant(utils.TestCase):

    def test_open_loop_transport_empties_the_domain(self):
        # Without coupling both fields leave the domain within the travel time 2; at unit Courant number the
        # upwind step is an exact shift
        config = SimConfig(nx=41, cfl=1.0, t_final=2.2, record_every=5)
        result = simulation.simulate(utils.constant_profile(), config, initial='bump')

        self.assertLess(result.final.l2_norm(), 1e-12)
        self.assertGreater(result.norms()[0], 0.0)
        self.assertAlmostEqual(result.final.t, 2.2)

    def test_recording_cadence(self):
        config = SimConfig(nx=41, cfl=0.8, t_final=1.0, record_every=5)
        result = simulation.simulate(utils.constant_profile(), config)

        recorded = [k for k in range(1, result.steps + 1) if k % 5 == 0 or k == result.steps]
        self.assertEqual(len(result.snapshots), len(recorded) + 1)
        self.assertEqual(len(result.trace), len(result.snapshots))
        self.assertEqual(result.times()[0], 0.0)
        self.assertTrue(all(math.isnan(row[2]) for row in result.trace))

    def test_controller_sets_the_inputs(self):
        config = SimConfig(nx=41, cfl=0.8, t_final=0.5)
        result = simulation.simulate(utils.constant_profile(), config, controller=lambda state: (0.25, -0.5))
        self.assertEqual(result.final.u[0], 0.25)
        self.assertEqual(result.final.v[-1], -0.5)
        self.assertEqual(result.final.U1, 0.25)

    def test_listeners(self):
        counter = StepCounter()
        config = SimConfig(nx=41, cfl=0.8, t_final=0.5)
        result = simulation.simulate(utils.constant_profile(), config, listeners=[counter])

        self.assertTrue(counter.started)
        self.assertEqual(counter.steps, result.steps)
        self.assertAlmostEqual(counter.finished_at, 0.5)

    def test_cfl_violation(self):
        nodes = simulation.uniform_grid(21)
        state = PlantState(0.0, nodes, np.zeros(21), np.zeros(21))
        with self.assertRaises(CflViolationError):
            simulation.step_plant(state, utils.constant_profile(2.0, 1.0), (0.0, 0.0), dt=0.06)

        stepped = simulation.step_plant(state, utils.constant_profile(2.0, 1.0), (1.0, 0.0), dt=0.05)
        self.assertAlmostEqual(stepped.t, 0.05)
        self.assertEqual(stepped.u[0], 1.0)

    def test_state_shapes(self):
        with self.assertRaises(ValueError):
            PlantState(0.0, simulation.uniform_grid(21), np.zeros(21), np.zeros(20))


class TestSettlingTime(utils.TestCase):

    def test_settles(self):
        times = [0.0, 1.0, 2.0, 3.0]
        self.assertEqual(simulation.settling_time(times, [1.0, 0.5, 0.005, 0.001]), 2.0)
        # A later excursion above the threshold counts
        self.assertEqual(simulation.settling_time(times, [1.0, 0.005, 0.5, 0.001]), 3.0)

    def test_never_settles(self):
        self.assertIsNone(simulation.settling_time([0.0, 1.0], [1.0, 0.5]))
        self.assertIsNone(simulation.settling_time([], []))

    def test_zero_initial_norm(self):
        self.assertEqual(simulation.settling_time([0.5, 1.0], [0.0, 0.0]), 0.5)


class TestTargetSystems(utils.TestCase):

    def test_explicit_solution(self):
        phi = utils.phi_of(utils.constant_profile())
        alpha, beta = simulation.explicit_target_case1(lambda x: x, lambda x: x**2, phi, [0.5, -0.8], 0.3)
        np.testing.assert_allclose(alpha, [0.2, 0.0], atol=1e-10)
        np.testing.assert_allclose(beta, [0.64, 0.25], atol=1e-10)

    def test_explicit_solution_at_time_zero(self):
        phi = utils.phi_of(utils.equal_profile())
        points = np.linspace(-1.0, 1.0, 9)
        alpha, beta = simulation.explicit_target_case1(np.cos, np.sin, phi, points, 0.0)
        np.testing.assert_allclose(alpha, np.cos(points), atol=1e-10)
        np.testing.assert_allclose(beta, np.sin(points), atol=1e-10)

    def test_explicit_solution_vanishes_after_both_travel_times(self):
        profile = utils.equal_profile()
        phi = utils.phi_of(profile)
        settled = max(phi.phi1.span, phi.phi2.span)
        self.assertAlmostEqual(phi.settling_time(CaseTag.EQUAL), settled)

        points = np.linspace(-1.0, 1.0, 41)
        for t in (settled, settled + 0.1, 2.0 * settled):
            alpha, beta = simulation.explicit_target_case1(np.cos, np.cos, phi, points, t)
            np.testing.assert_array_equal(alpha, np.zeros(41))
            np.testing.assert_array_equal(beta, np.zeros(41))

        alpha, _ = simulation.explicit_target_case1(np.cos, np.cos, phi, points, 0.9 * settled)
        self.assertGreater(float(np.max(np.abs(alpha))), 0.0)

    def test_equal_target_is_zero_after_the_travel_time(self):
        # Unit speeds at unit Courant number: the scheme transports exactly
        config = SimConfig(nx=41, cfl=1.0, t_final=2.5, record_every=2)
        result = simulation.simulate_target(CaseTag.EQUAL, None, config, utils.constant_profile(), initial='bump')

        self.assertGreater(result.norms()[0], 0.0)
        for state in result.snapshots:
            if state.t >= 2.0:
                self.assertEqual(state.l2_norm(), 0.0, state.t)

    def test_missing_feedforward(self):
        config = SimConfig(nx=41, t_final=0.5)
        with self.assertRaises(MissingFeedforwardError):
            simulation.simulate_target(CaseTag.LAMBDA_FASTER, None, config, utils.reference_profile())

    def test_equal_target_boundaries(self):
        config = SimConfig(nx=41, t_final=0.5)
        result = simulation.simulate_target(CaseTag.EQUAL, None, config, utils.equal_profile(), initial='bump')
        for state in result.snapshots:
            self.assertEqual(state.alpha[0], 0.0)
            self.assertEqual(state.beta[-1], 0.0)

    def test_grid_study_converges(self):
        profile = utils.constant_profile()
        rows = simulation.target_grid_study(profile, utils.phi_of(profile), [41, 81, 161])

        self.assertEqual([row['nx'] for row in rows], [41, 81, 161])
        self.assertIsNone(rows[0]['order'])
        self.assertGreater(rows[0]['error'], rows[1]['error'])
        self.assertGreater(rows[1]['error'], rows[2]['error'])
        self.assertGreater(rows[2]['order'], 0.5)
