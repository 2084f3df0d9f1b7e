import math

import numpy as np
from scipy import integrate

from backstep import geometry
from backstep.exceptions import MixedSignSpeedsError, NonPositiveSpeedError, OutOfDomainError
from backstep.geometry import CaseTag, RegionTag
from backstep.profiles import CoefficientProfile

from . import utils


class TestPhiMaps(utils.TestCase):

    def test_constant_speeds(self):
        phi = geometry.build_phi_maps(utils.constant_profile(2.0, 1.0))
        self.assertAlmostEqual(float(phi.phi1(0.5)), 0.25, places=14)
        self.assertAlmostEqual(float(phi.phi2(-0.5)), -0.5, places=14)
        self.assertEqual(phi.phi1(0.0), 0.0)

        spans = phi.spans
        self.assertAlmostEqual(spans[0], 1.0, places=12)
        self.assertAlmostEqual(spans[1], 2.0, places=12)
        self.assertAlmostEqual(spans[2], 3.0, places=12)
        self.assertAlmostEqual(spans[3], -1.0, places=12)

    def test_reference_spans(self):
        phi = geometry.build_phi_maps(utils.reference_profile(nodes=2049))
        # int_{-1}^{1} dw / (3 + w^2)
        self.assertAlmostEqual(phi.phi1.span, math.pi / (3.0 * math.sqrt(3.0)), places=6)
        self.assertAlmostEqual(phi.phi2.span, 0.921, delta=2e-3)
        self.assertAlmostEqual(phi.settling_time(CaseTag.LAMBDA_FASTER), phi.phi1.span + phi.phi2.span, places=12)

    def test_settling_times_follow_the_spans(self):
        equal = geometry.build_phi_maps(utils.constant_profile(1.0, 1.0))
        lambda_faster = geometry.build_phi_maps(utils.constant_profile(2.0, 1.0))
        mu_faster = geometry.build_phi_maps(utils.constant_profile(1.0, 2.0))

        self.assertAlmostEqual(equal.settling_time(CaseTag.EQUAL), 2.0, delta=1e-10)
        self.assertAlmostEqual(lambda_faster.settling_time(CaseTag.LAMBDA_FASTER), 3.0, delta=1e-10)
        self.assertAlmostEqual(mu_faster.settling_time(CaseTag.MU_FASTER), 3.0, delta=1e-10)
        # The Equal case settles no later than the sum of both travel times
        self.assertLessEqual(equal.settling_time(CaseTag.EQUAL), equal.phi3.span)

    def test_non_positive_speed(self):
        with self.assertRaises(NonPositiveSpeedError):
            geometry.build_phi_maps(CoefficientProfile.from_functions(lambda w: w + 0.5, 1.0, 0.0, 0.0, nodes=101))

    def test_too_few_cells(self):
        with self.assertRaises(ValueError):
            geometry.build_phi_maps(utils.constant_profile(), n=8)


class TestMonotoneTable(utils.TestCase):

    def setUp(self):
        super(TestMonotoneTable, self).setUp()
        self.phi = geometry.build_phi_maps(utils.reference_profile())

    def test_inverse(self):
        table = self.phi.phi1
        for w in (-1.0, -0.37, 0.0, 0.3, 1.0):
            self.assertAlmostEqual(table.inverse(float(table(w))), w, delta=1e-10)

        points = np.linspace(-0.9, 0.9, 7)
        np.testing.assert_allclose(table.inverse(table(points)), points, atol=1e-10)

    def test_inverse_clamps(self):
        table = self.phi.phi1
        self.assertAlmostEqual(table.inverse(100.0), 1.0, places=12)
        self.assertAlmostEqual(table.inverse(-100.0), -1.0, places=12)

    def test_inverse_of_decreasing_table(self):
        table = self.phi.phi1.combine(self.phi.phi1, sign=-2.0)
        self.assertEqual(table.direction, -1)
        self.assertAlmostEqual(table.inverse(float(table(0.4))), 0.4, delta=1e-10)

    def test_non_monotone(self):
        nodes = np.linspace(-1.0, 1.0, 5)
        table = geometry.MonotoneTable(nodes, nodes**2, 2.0 * nodes)
        self.assertEqual(table.direction, 0)
        with self.assertRaises(ValueError):
            table.inverse(0.5)

    def test_reflected(self):
        reflected = self.phi.phi1.reflected()
        self.assertEqual(reflected.direction, 1)
        self.assertAlmostEqual(float(reflected(0.3)), -float(self.phi.phi1(-0.3)), places=14)

    def test_phi4(self):
        w = 0.35
        self.assertAlmostEqual(float(self.phi.phi4(w)), float(self.phi.phi1(w) + self.phi.phi2(-w)), places=10)


class TestClassification(utils.TestCase):

    def test_cases(self):
        self.assertIs(geometry.classify_speed_case(utils.constant_profile(1.0, 1.0)).tag, CaseTag.EQUAL)
        self.assertIs(geometry.classify_speed_case(utils.equal_profile()).tag, CaseTag.EQUAL)
        self.assertIs(geometry.classify_speed_case(utils.reference_profile()).tag, CaseTag.LAMBDA_FASTER)
        self.assertIs(geometry.classify_speed_case(utils.mu_faster_profile()).tag, CaseTag.MU_FASTER)

    def test_margin(self):
        case = geometry.classify_speed_case(utils.constant_profile(2.0, 1.5))
        self.assertEqual(case, CaseTag.LAMBDA_FASTER)
        self.assertAlmostEqual(case.margin, 0.5)
        self.assertEqual(case.number, 2)
        self.assertEqual(case.tag.label, 'LambdaFaster')

    def test_mixed_signs(self):
        profile = CoefficientProfile.from_functions(lambda w: 1.5 + w, 1.0, 0.0, 0.0, nodes=101)
        with self.assertRaises(MixedSignSpeedsError):
            geometry.classify_speed_case(profile)


class TestCharacteristics(utils.TestCase):

    def test_l11_constant_speed(self):
        phi = geometry.build_phi_maps(utils.constant_profile(1.0, 1.0))
        path = geometry.characteristic_L11(0.2, 0.6, phi)

        self.assertIs(path.region_tag, RegionTag.NOT_APPLICABLE)
        np.testing.assert_allclose(path.start, (-0.2, 0.2), atol=1e-12)
        self.assertAlmostEqual(path.t_final, 0.4, places=12)
        self.assertAlmostEqual(float(path.z_of_t(path.t_final)), 0.2, places=10)
        self.assertAlmostEqual(float(path.w_of_t(path.t_final)), 0.6, places=10)

    def test_l12_splits_in_lambda_faster_case(self):
        phi = geometry.build_phi_maps(utils.constant_profile(2.0, 1.0))

        path = geometry.characteristic_L12(-0.4, 0.5, phi, CaseTag.LAMBDA_FASTER)
        self.assertIs(path.region_tag, RegionTag.T2)
        np.testing.assert_allclose(path.start, (-0.3, 0.3), atol=1e-10)
        self.assertAlmostEqual(path.t_final, 0.1, places=10)
        self.assertAlmostEqual(float(path.z_of_t(path.t_final)), -0.4, places=10)
        self.assertAlmostEqual(float(path.w_of_t(path.t_final)), 0.5, places=10)

        path = geometry.characteristic_L12(0.1, 0.5, phi, CaseTag.LAMBDA_FASTER)
        self.assertIs(path.region_tag, RegionTag.T1)
        np.testing.assert_allclose(path.start, (0.35 / 1.5, 0.35 / 1.5), atol=1e-10)

    def test_l12_does_not_split_in_equal_case(self):
        phi = geometry.build_phi_maps(utils.constant_profile(1.0, 1.0))
        path = geometry.characteristic_L12(-0.4, 0.5, phi, CaseTag.EQUAL)
        self.assertIs(path.region_tag, RegionTag.NOT_APPLICABLE)
        # w + z is conserved and the start lies on the diagonal
        np.testing.assert_allclose(path.start, (0.05, 0.05), atol=1e-10)

    def test_l21_splits_in_mu_faster_case(self):
        phi = geometry.build_phi_maps(utils.constant_profile(1.0, 2.0))
        family = geometry.characteristic_family('L21', phi, CaseTag.MU_FASTER)
        self.assertTrue(family.splits)
        self.assertFalse(geometry.characteristic_family('L21', phi, CaseTag.LAMBDA_FASTER).splits)

        path = geometry.characteristic_L21(-0.4, 0.5, phi, CaseTag.MU_FASTER)
        self.assertIs(path.region_tag, RegionTag.T2)

    def test_paths_solve_the_characteristic_equations(self):
        profile = utils.reference_profile()
        phi = geometry.build_phi_maps(profile)
        speeds = {
            # kernel: (w-speed, z-speed, sign of dz/dt)
            'L11': (profile.lam, profile.lam, 1.0),
            'L12': (profile.lam, profile.mu, -1.0),
            'L21': (profile.mu, profile.lam, -1.0),
            'L22': (profile.mu, profile.mu, 1.0),
        }
        points = ((0.3, 0.8), (-0.5, 0.7), (0.0, 0.4), (-0.85, 0.95), (0.6, 0.65))

        for name, (w_speed, z_speed, sign) in speeds.items():
            family = geometry.characteristic_family(name, phi, CaseTag.LAMBDA_FASTER)
            for z, w in points:
                path = family.path(z, w)
                if path.t_final <= 0.0:
                    continue

                def rhs(_, y, w_speed=w_speed, z_speed=z_speed, sign=sign):
                    return [float(w_speed(y[0])), sign * float(z_speed(y[1]))]

                times = np.linspace(0.0, path.t_final, 9)
                solution = integrate.solve_ivp(rhs, (0.0, path.t_final), [path.start[1], path.start[0]],
                                               method='RK45', t_eval=times, rtol=1e-10, atol=1e-12)
                self.assertTrue(solution.success)
                message = '{} through ({}, {})'.format(name, z, w)
                np.testing.assert_allclose(path.w_of_t(times), solution.y[0], atol=1e-5, err_msg=message)
                np.testing.assert_allclose(path.z_of_t(times), solution.y[1], atol=1e-5, err_msg=message)
                np.testing.assert_allclose(solution.y[:, -1], [w, z], atol=1e-5, err_msg=message)

    def test_path_samples_stay_in_the_triangle(self):
        phi = geometry.build_phi_maps(utils.reference_profile())
        path = geometry.characteristic_L22(-0.1, 0.8, phi)
        _, z, w = path.sample(16)
        self.assertTrue(np.all(np.abs(z) <= w + 1e-9))

    def test_out_of_domain(self):
        phi = geometry.build_phi_maps(utils.constant_profile())
        with self.assertRaises(OutOfDomainError):
            geometry.characteristic_L11(0.8, 0.5, phi)
        with self.assertRaises(OutOfDomainError):
            geometry.characteristic_L11(0.0, 1.5, phi)

    def test_reflected_family(self):
        phi = geometry.build_phi_maps(utils.reference_profile())
        family = geometry.characteristic_family('L12', phi, CaseTag.LAMBDA_FASTER, reflected=True)
        self.assertEqual(family.primary, geometry.ANTI_DIAGONAL)
        self.assertEqual(family.secondary, geometry.DIAGONAL)
        self.assertEqual(family.sign, 1.0)
