"""Utilities for tests"""
import os
import shutil
import tempfile
import unittest

import numpy as np

from backstep import geometry
from backstep.profiles import CoefficientProfile

# Resolutions small enough for the default suite
SMALL_KERNEL_NODES = 33
PROFILE_NODES = 513

SLOW = bool(os.environ.get('BACKSTEP_SLOW'))
slow = unittest.skipUnless(SLOW, 'set BACKSTEP_SLOW=1 to run the slow end-to-end checks')


class TestCase(unittest.TestCase):
    pass


class TestCaseWithDirectory(TestCase):
    """Test case with a scratch directory that is removed afterwards"""

    def setUp(self):
        super(TestCaseWithDirectory, self).setUp()
        self.directory = tempfile.mkdtemp(prefix='backstep-')

    def tearDown(self):
        shutil.rmtree(self.directory, ignore_errors=True)
        super(TestCaseWithDirectory, self).tearDown()

    def path(self, name):
        return os.path.join(self.directory, name)


def constant_profile(lam=1.0, mu=1.0, b=0.0, c=0.0, nodes=PROFILE_NODES):
    return CoefficientProfile.constant(lam, mu, b, c, nodes=nodes)


def reference_profile(nodes=PROFILE_NODES):
    """The varying-speed reference plant, a LambdaFaster profile"""
    return CoefficientProfile.paper_eq60(nodes=nodes)


def equal_profile(nodes=PROFILE_NODES):
    """Symmetric speeds with lambda(w) == mu(-w) and nonzero couplings"""
    return CoefficientProfile.from_functions(lambda w: 1.5 + 0.25 * w,
                                             lambda w: 1.5 - 0.25 * w,
                                             lambda w: 0.5 * np.cos(w),
                                             lambda w: 0.4 + 0.1 * w,
                                             lam_prime=0.25,
                                             mu_prime=-0.25,
                                             nodes=nodes,
                                             name='equal')


def mu_faster_profile(nodes=PROFILE_NODES):
    return CoefficientProfile.from_functions(lambda w: 1.0 + 0.1 * w**2,
                                             lambda w: 2.0 + 0.1 * w,
                                             0.6,
                                             lambda w: 0.3 * (1.0 + w),
                                             lam_prime=lambda w: 0.2 * w,
                                             mu_prime=0.1,
                                             nodes=nodes,
                                             name='mu-faster')


def phi_of(profile):
    return geometry.build_phi_maps(profile)


def write_profile_csv(path, rows, header=('w', 'lambda', 'mu', 'b', 'c')):
    with open(path, 'w') as handle:
        handle.write(','.join(header) + '\n')
        for row in rows:
            handle.write(','.join(repr(float(value)) for value in row) + '\n')
    return path
