import numpy as np

from backstep import geometry
from backstep import kernels as kernel_solver
from backstep.exceptions import CaseMismatchError, NoConvergenceError
from backstep.geometry import CaseTag
from backstep.kernels import KernelGrid, SolverDiagnostics

from . import utils

NODES = utils.SMALL_KERNEL_NODES


class TestKernelGrid(utils.TestCase):

    def test_sample_reproduces_bilinear_fields(self):

        def field(z, w):
            return z + 2.0 * w + 0.5

        grid = KernelGrid.from_fields({'L12': field}, nw=9, ns=9)
        z = np.array([0.0, 0.3, -0.1, 0.55, -0.2, 0.05])
        w = np.array([0.0, 0.4, 0.25, 0.9, -0.6, -0.1])
        np.testing.assert_allclose(grid.sample('L12', z, w), field(z, w), atol=1e-12)
        np.testing.assert_array_equal(grid.sample('L11', z, w), np.zeros(6))

    def test_sample_scalar(self):
        grid = KernelGrid.from_fields({'L22': lambda z, w: 1.0 + 0.0 * z}, nw=5, ns=5)
        self.assertAlmostEqual(float(grid.sample('L22', 0.1, -0.5)), 1.0)

    def test_rows(self):
        grid = KernelGrid.from_fields({'L21': lambda z, w: w}, nw=3, ns=3)
        rows = list(grid.rows())
        self.assertEqual(len(rows), 4 * 2 * 3 * 3)
        self.assertEqual(rows[0][:2], ('Equal', 'L11'))
        self.assertEqual(rows[0][-1], 'NotApplicable')

        l21 = [row for row in rows if row[1] == 'L21']
        for _, _, w, _, value, _ in l21:
            self.assertAlmostEqual(value, w)

    def test_fields_are_read_only(self):
        grid = KernelGrid.from_fields({}, nw=3, ns=3)
        with self.assertRaises(ValueError):
            grid.upper('L11')[0, 0] = 1.0

    def test_shape_checks(self):
        fields = {key: np.zeros((3, 3)) for key in ('L11', 'L12', 'L21', 'L22', 'K11', 'K12', 'K21', 'K22')}
        fields['K22'] = np.zeros((3, 5))
        with self.assertRaises(ValueError):
            KernelGrid(fields, CaseTag.EQUAL)

        fields['K22'] = np.zeros((3, 3))
        KernelGrid(fields, CaseTag.EQUAL)

        even = {key: np.zeros((3, 4)) for key in fields}
        with self.assertRaises(ValueError):
            KernelGrid(even, CaseTag.EQUAL)


class TestSolverDiagnostics(utils.TestCase):

    def test_envelope(self):
        diagnostics = SolverDiagnostics(a_const=0.5, b_const=4.0, h_bar=0.25)
        self.assertAlmostEqual(diagnostics.envelope(0), 0.25)
        self.assertAlmostEqual(diagnostics.envelope(1), 0.5)
        self.assertAlmostEqual(diagnostics.envelope(3), 0.25 * 8.0 / 6.0)

    def test_from_profile(self):
        diagnostics = SolverDiagnostics.from_profile(utils.constant_profile(2.0, 4.0, 1.0, -3.0))
        self.assertAlmostEqual(diagnostics.a_const, 0.5)
        self.assertAlmostEqual(diagnostics.b_const, 4.0)
        self.assertAlmostEqual(diagnostics.h_bar, 0.5)

    def test_no_coupling_no_envelope(self):
        diagnostics = SolverDiagnostics.from_profile(utils.constant_profile())
        self.assertEqual(diagnostics.envelope(0), 0.0)


class TestSolveKernels(utils.TestCase):

    def test_zero_coupling(self):
        kernels, diagnostics = kernel_solver.solve_kernels(utils.constant_profile(), nw=NODES, ns=NODES)

        self.assertEqual(kernels.sup_norm(), 0.0)
        self.assertEqual(diagnostics.iterations, 1)
        self.assertEqual(diagnostics.warnings, ())
        self.assertIs(kernels.case.tag, CaseTag.EQUAL)
        self.assertIsNone(kernels.split_kernel)

    def test_boundary_conditions_are_exact(self):
        profile = utils.reference_profile()
        kernels, _ = kernel_solver.solve_kernels(profile, nw=NODES, ns=NODES)
        w = kernels.w_nodes

        # L12(w, w) = h1(w) and L21(w, w) = h2(w) on both triangles
        np.testing.assert_allclose(kernels.upper('L12')[:, -1], profile.h1(w), rtol=0.0, atol=1e-14)
        np.testing.assert_allclose(kernels.upper('L21')[:, -1], profile.h2(w), rtol=0.0, atol=1e-14)
        np.testing.assert_allclose(kernels.lower('L12')[:, 0], profile.h1(-w), rtol=0.0, atol=1e-14)
        np.testing.assert_allclose(kernels.lower('L21')[:, 0], profile.h2(-w), rtol=0.0, atol=1e-14)

    def test_lambda_faster_splits_l12(self):
        profile = utils.reference_profile()
        kernels, diagnostics = kernel_solver.solve_kernels(profile, nw=NODES, ns=NODES)

        self.assertIs(kernels.case.tag, CaseTag.LAMBDA_FASTER)
        self.assertEqual(kernels.split_kernel, 'L12')
        upper, lower = kernels.discontinuity_mask
        self.assertTrue(np.any(upper) and np.any(~upper))
        self.assertEqual(lower.shape, upper.shape)
        # h1(0) = 3/5 is nonzero
        self.assertEqual(len(diagnostics.warnings), 1)
        self.assertIn('h1(0)', diagnostics.warnings[0])

        regions = {row[-1] for row in kernels.rows() if row[1] == 'L12'}
        self.assertEqual(regions, {'T1', 'T2'})

    def test_mu_faster_splits_l21(self):
        kernels, diagnostics = kernel_solver.solve_kernels(utils.mu_faster_profile(), nw=NODES, ns=NODES)
        self.assertIs(kernels.case.tag, CaseTag.MU_FASTER)
        self.assertEqual(kernels.split_kernel, 'L21')
        self.assertIn('h2(0)', diagnostics.warnings[0])

    def test_sign_symmetry_in_the_couplings(self):
        profile = utils.reference_profile(nodes=257)
        negated = profile.with_couplings(-profile.b_nodes, -profile.c_nodes)

        kernels, _ = kernel_solver.solve_kernels(profile, nw=NODES, ns=NODES)
        flipped, _ = kernel_solver.solve_kernels(negated, nw=NODES, ns=NODES)

        for name, factor in (('L11', 1.0), ('L12', -1.0), ('L21', -1.0), ('L22', 1.0)):
            np.testing.assert_allclose(flipped.upper(name), factor * kernels.upper(name), atol=1e-10)
            np.testing.assert_allclose(flipped.lower(name), factor * kernels.lower(name), atol=1e-10)

    def test_deterministic(self):
        profile = utils.equal_profile()
        first, _ = kernel_solver.solve_kernels(profile, nw=NODES, ns=NODES)
        second, _ = kernel_solver.solve_kernels(profile, nw=NODES, ns=NODES)
        self.assertEqual(list(first.rows()), list(second.rows()))

    def test_initial_iterates_agree(self):
        profile = utils.equal_profile()
        from_phi, _ = kernel_solver.solve_kernels(profile, nw=NODES, ns=NODES)
        from_zero, _ = kernel_solver.solve_kernels(profile, nw=NODES, ns=NODES, initial='zero')
        for name in kernel_solver.KERNEL_NAMES:
            np.testing.assert_allclose(from_zero.upper(name), from_phi.upper(name), atol=1e-10)

    def test_case_mismatch(self):
        with self.assertRaises(CaseMismatchError):
            kernel_solver.solve_kernels(utils.reference_profile(), case=1, nw=NODES, ns=NODES)

        kernels, _ = kernel_solver.solve_kernels(utils.reference_profile(), case=2, nw=NODES, ns=NODES)
        self.assertIs(kernels.case.tag, CaseTag.LAMBDA_FASTER)

    def test_no_convergence(self):
        with self.assertRaises(NoConvergenceError) as context:
            kernel_solver.solve_kernels(utils.reference_profile(), nw=NODES, ns=NODES, max_iterations=1)
        self.assertEqual(context.exception.iterations, 1)
        self.assertEqual(len(context.exception.increments), 1)
        self.assertEqual(context.exception.provenance, 'kernel_solver')

    def test_resolution_checks(self):
        with self.assertRaises(ValueError):
            kernel_solver.solve_kernels(utils.constant_profile(), nw=17, ns=17)
        with self.assertRaises(ValueError):
            kernel_solver.solve_kernels(utils.constant_profile(), nw=33, ns=34)


class TestChecks(utils.TestCase):

    def test_residual_of_zero_kernels(self):
        profile = utils.constant_profile()
        kernels, _ = kernel_solver.solve_kernels(profile, nw=NODES, ns=NODES)
        report = kernel_solver.kernel_residual(kernels, profile)
        self.assertEqual(report.worst, 0.0)
        self.assertGreater(report.checked['L11'], 0)

    def test_residual_decreases_under_refinement(self):
        profile = utils.equal_profile()
        phi = geometry.build_phi_maps(profile)
        coarse, _ = kernel_solver.solve_kernels(profile, phi, nw=33, ns=33)
        fine, _ = kernel_solver.solve_kernels(profile, phi, nw=65, ns=65)

        coarse_report = kernel_solver.kernel_residual(coarse, profile, phi)
        fine_report = kernel_solver.kernel_residual(fine, profile, phi)
        self.assertLess(fine_report.worst, coarse_report.worst)

    def test_residual_skips_a_fixed_neighbourhood_of_the_apex(self):
        profile = utils.equal_profile()
        kernels, _ = kernel_solver.solve_kernels(profile, nw=NODES, ns=NODES)
        fields = {name: kernels.upper(name) for name in kernel_solver.KERNEL_NAMES}
        fields.update({kernel_solver.REFLECTED_NAMES[name]: kernels.lower(name) for name in kernel_solver.KERNEL_NAMES})
        report = kernel_solver.kernel_residual(KernelGrid(fields, kernels.case), profile)
        w_nodes = kernels.w_nodes
        # Rows whose neighbours also lie inside the band never enter a checked difference
        hidden = np.flatnonzero(w_nodes[1:] < kernel_solver.APEX_BAND)
        z = kernels.z_grid()

        corrupted = np.array(fields['L11'])
        corrupted[hidden, :] += np.sin(40.0 * z[hidden, :])
        report_hidden = kernel_solver.kernel_residual(KernelGrid(dict(fields, L11=corrupted), kernels.case), profile)
        self.assertEqual(report_hidden.sup['L11'], report.sup['L11'])
        self.assertEqual(report_hidden.checked, report.checked)

        corrupted = np.array(fields['L11'])
        middle = NODES // 2
        corrupted[middle, :] += np.sin(40.0 * z[middle, :])
        report_visible = kernel_solver.kernel_residual(KernelGrid(dict(fields, L11=corrupted), kernels.case), profile)
        self.assertGreater(report_visible.sup['L11'], report.sup['L11'] + 1.0)

    def test_checked_nodes_cover_the_same_region_on_every_grid(self):
        profile = utils.equal_profile()
        phi = geometry.build_phi_maps(profile)
        counts = []
        for nodes in (33, 65):
            kernels = KernelGrid.from_fields({}, nw=nodes, ns=nodes)
            report = kernel_solver.kernel_residual(kernels, profile, phi)
            counts.append(report.checked['L11'] / float(nodes * nodes))
        # Fixed bands: the checked fraction only changes through the two-cell edges
        self.assertAlmostEqual(counts[0], counts[1], delta=0.1)

    def test_bound_check(self):
        profile = utils.equal_profile()
        kernels, diagnostics = kernel_solver.solve_kernels(profile, nw=NODES, ns=NODES)
        report = kernel_solver.kernel_bound_check(kernels, diagnostics)
        self.assertTrue(report.passed)
        self.assertLessEqual(report.worst_ratio, 1.0 + 1e-12)
        self.assertEqual(set(report.per_kernel), {'L11', 'L12', 'L21', 'L22', 'K11', 'K12', 'K21', 'K22'})

    def test_bound_check_flags_large_kernels(self):
        kernels = KernelGrid.from_fields({'L11': lambda z, w: 10.0 + 0.0 * z}, nw=5, ns=5)
        report = kernel_solver.kernel_bound_check(kernels, SolverDiagnostics(1.0, 1.0, 0.5))
        self.assertFalse(report.passed)
        self.assertLess(report.per_kernel['L11'], 0.0)
        self.assertGreater(report.worst_ratio, 1.0)
