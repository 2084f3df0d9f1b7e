# -*- coding: utf-8 -*-
"""Plant coefficient profiles on [-1, 1]"""
import csv
import logging
import os

import numpy as np

from .exceptions import ConfigurationError, NonPositiveSpeedError, NonzeroDiagonalCouplingError

__all__ = ['CoefficientProfile', 'DEFAULT_PROFILE_NODES']

_LOGGER = logging.getLogger(__name__)

DEFAULT_PROFILE_NODES = 2049
CSV_COLUMNS = ('w', 'lambda', 'mu', 'b', 'c')


class CoefficientProfile(object):
    """
    The plant data: transport speeds lambda, mu with their derivatives and the couplings b, c.

    Values are held as samples on a uniform grid of [-1, 1]; evaluation between the nodes is piecewise linear.
    Instances are immutable.
    """

    def __init__(self, nodes, lam, mu, b, c, lam_prime=None, mu_prime=None, a=None, d=None, name='custom'):
        """
        :param nodes: uniform grid on [-1, 1]
        :param lam: samples of lambda(w)
        :param mu: samples of mu(w)
        :param b: samples of the coupling b(w) acting on u
        :param c: samples of the coupling c(w) acting on v
        :param lam_prime: samples of lambda'(w), centered differences of ``lam`` when omitted
        :param mu_prime: samples of mu'(w), centered differences of ``mu`` when omitted
        :param a: diagonal coupling of u, must be absent or zero
        :param d: diagonal coupling of v, must be absent or zero
        :param name: a label used in logs and reports
        :raises NonPositiveSpeedError: if a speed sample is not strictly positive
        """
        nodes = np.array(nodes, dtype=float)
        if nodes.ndim != 1 or nodes.size < 3:
            raise ValueError('a profile needs at least three nodes')
        if abs(nodes[0] + 1.0) > 1e-12 or abs(nodes[-1] - 1.0) > 1e-12:
            raise ValueError('profile nodes must span [-1, 1]')

        for label, diagonal in (('a', a), ('d', d)):
            if diagonal is not None and np.any(np.asarray(diagonal, dtype=float) != 0.0):
                raise NonzeroDiagonalCouplingError(
                    'diagonal coupling {} must vanish; remove it with a change of variables first'.format(label))

        self._nodes = nodes
        self._lam = self._as_samples(lam, 'lambda')
        self._mu = self._as_samples(mu, 'mu')
        self._b = self._as_samples(b, 'b')
        self._c = self._as_samples(c, 'c')
        self._lam_prime = self._as_samples(lam_prime, 'lambda_prime') if lam_prime is not None else \
            np.gradient(self._lam, nodes, edge_order=2)
        self._mu_prime = self._as_samples(mu_prime, 'mu_prime') if mu_prime is not None else \
            np.gradient(self._mu, nodes, edge_order=2)
        self._name = name

        for array in (self._nodes, self._lam, self._mu, self._b, self._c, self._lam_prime, self._mu_prime):
            array.flags.writeable = False
        self.validate()

    def _as_samples(self, values, label):
        if callable(values):
            values = values(self._nodes)
        values = np.array(np.broadcast_to(np.asarray(values, dtype=float), self._nodes.shape))
        if not np.all(np.isfinite(values)):
            raise ValueError('{} samples must be finite'.format(label))
        return values

    @classmethod
    def from_functions(cls, lam, mu, b, c, lam_prime=None, mu_prime=None, nodes=DEFAULT_PROFILE_NODES, name='custom'):
        """
        Sample vectorised callables (or constants) on a uniform grid

        :param nodes: the number of grid nodes n_w + 1
        """
        grid = np.linspace(-1.0, 1.0, nodes)
        return cls(grid, lam, mu, b, c, lam_prime=lam_prime, mu_prime=mu_prime, name=name)

    @classmethod
    def constant(cls, lam=1.0, mu=1.0, b=0.0, c=0.0, nodes=DEFAULT_PROFILE_NODES):
        return cls.from_functions(lam, mu, b, c, lam_prime=0.0, mu_prime=0.0, nodes=nodes, name='constant')

    @classmethod
    def paper_eq60(cls, nodes=DEFAULT_PROFILE_NODES):
        """
        The reference plant: lambda = 3 + w^2, mu = 2 + w^4, b = 3 exp(3w), c = 1 + w.
        """
        return cls.from_functions(lambda w: 3.0 + w**2,
                                  lambda w: 2.0 + w**4,
                                  lambda w: 3.0 * np.exp(3.0 * w),
                                  lambda w: 1.0 + w,
                                  lam_prime=lambda w: 2.0 * w,
                                  mu_prime=lambda w: 4.0 * w**3,
                                  nodes=nodes,
                                  name='paper-eq60')

    @classmethod
    def from_csv(cls, path, nodes=None):
        """
        Read sampled columns ``w, lambda, mu, b, c`` from a CSV file with a header row.

        The samples must cover [-1, 1] with strictly increasing ``w``. They are resampled linearly onto a uniform
        grid with ``nodes`` points (the number of rows when omitted); derivatives are centered differences.

        :raises ConfigurationError: if the file is missing or malformed
        :raises NonPositiveSpeedError: if a speed column is not strictly positive
        """
        if not os.path.isfile(path):
            raise ConfigurationError("coefficient file '{}' does not exist".format(path), field='coefficients.path')

        with open(path, newline='') as handle:
            reader = csv.DictReader(handle)
            missing = [column for column in CSV_COLUMNS if column not in (reader.fieldnames or ())]
            if missing:
                raise ConfigurationError("coefficient file '{}' lacks columns {}".format(path, missing),
                                         field='coefficients.path')
            try:
                rows = [[float(row[column]) for column in CSV_COLUMNS] for row in reader]
            except (TypeError, ValueError) as exception:
                raise ConfigurationError("coefficient file '{}': {}".format(path, exception),
                                         field='coefficients.path')

        table = np.array(rows, dtype=float)
        if table.shape[0] < 3:
            raise ConfigurationError("coefficient file '{}' needs at least three rows".format(path),
                                     field='coefficients.path')
        samples_w = table[:, 0]
        if np.any(np.diff(samples_w) <= 0.0):
            raise ConfigurationError("column 'w' of '{}' must be strictly increasing".format(path),
                                     field='coefficients.path')
        if abs(samples_w[0] + 1.0) > 1e-9 or abs(samples_w[-1] - 1.0) > 1e-9:
            raise ConfigurationError("column 'w' of '{}' must span [-1, 1]".format(path), field='coefficients.path')
        if np.any(table[:, 1] <= 0.0) or np.any(table[:, 2] <= 0.0):
            raise NonPositiveSpeedError("speed columns of '{}' must be strictly positive".format(path))

        lam_prime = np.gradient(table[:, 1], samples_w, edge_order=2)
        mu_prime = np.gradient(table[:, 2], samples_w, edge_order=2)

        grid = np.linspace(-1.0, 1.0, nodes or table.shape[0])
        resampled = [np.interp(grid, samples_w, column) for column in (table[:, 1], table[:, 2], table[:, 3],
                                                                         table[:, 4], lam_prime, mu_prime)]
        _LOGGER.debug("read %d coefficient samples from '%s'", table.shape[0], path)
        return cls(grid, resampled[0], resampled[1], resampled[2], resampled[3], lam_prime=resampled[4],
                   mu_prime=resampled[5], name=os.path.basename(path))

    @property
    def name(self):
        return self._name

    @property
    def nodes(self):
        return self._nodes

    @property
    def lam_nodes(self):
        return self._lam

    @property
    def mu_nodes(self):
        return self._mu

    @property
    def b_nodes(self):
        return self._b

    @property
    def c_nodes(self):
        return self._c

    @property
    def lam_prime_nodes(self):
        return self._lam_prime

    @property
    def mu_prime_nodes(self):
        return self._mu_prime

    def _evaluate(self, samples, w):
        return np.interp(w, self._nodes, samples)

    def lam(self, w):
        return self._evaluate(self._lam, w)

    def mu(self, w):
        return self._evaluate(self._mu, w)

    def lam_prime(self, w):
        return self._evaluate(self._lam_prime, w)

    def mu_prime(self, w):
        return self._evaluate(self._mu_prime, w)

    def b(self, w):
        return self._evaluate(self._b, w)

    def c(self, w):
        return self._evaluate(self._c, w)

    def h1(self, w):
        """The L12 diagonal trace b/(lambda + mu)"""
        return self.b(w) / (self.lam(w) + self.mu(w))

    def h2(self, w):
        """The L21 diagonal trace -c/(lambda + mu)"""
        return -self.c(w) / (self.lam(w) + self.mu(w))

    def max_speed(self):
        return float(max(self._lam.max(), self._mu.max()))

    def validate(self):
        """
        :raises NonPositiveSpeedError: if any speed sample is not strictly positive
        """
        for label, samples in (('lambda', self._lam), ('mu', self._mu)):
            if np.any(samples <= 0.0):
                index = int(np.argmin(samples))
                raise NonPositiveSpeedError('{} must be strictly positive, got {} at w={}'.format(
                    label, samples[index], self._nodes[index]))

    def with_couplings(self, b, c):
        """Return a copy with the couplings replaced, speeds untouched."""
        return CoefficientProfile(self._nodes, self._lam, self._mu, b, c, lam_prime=self._lam_prime,
                                  mu_prime=self._mu_prime, name=self._name)

    def __repr__(self):
        return "{}(name={!r}, nodes={})".format(type(self).__name__, self._name, self._nodes.size)
