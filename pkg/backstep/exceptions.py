# -*- coding: utf-8 -*-
__all__ = [
    'BackstepError', 'NonPositiveSpeedError', 'MixedSignSpeedsError', 'OutOfDomainError', 'NoConvergenceError',
    'CaseMismatchError', 'WrongCaseError', 'CflViolationError', 'NonzeroDiagonalCouplingError',
    'MissingFeedforwardError', 'GridMismatchError', 'ConfigurationError'
]


class BackstepError(Exception):
    """Base class of every error raised by this package"""

    provenance = None

    def __init__(self, *args, **kwargs):
        provenance = kwargs.pop('provenance', None)
        super(BackstepError, self).__init__(*args, **kwargs)
        if provenance is not None:
            self.provenance = provenance


class NonPositiveSpeedError(BackstepError):
    """A transport speed sample is zero or negative."""

    provenance = 'transport_geometry'


class MixedSignSpeedsError(BackstepError):
    """
    The difference lambda(w) - mu(-w) changes sign over the domain, so none of the three
    speed cases applies and no controller can be built.
    """

    provenance = 'transport_geometry'


class OutOfDomainError(BackstepError):
    """A point lies outside of the triangle it was queried on."""

    provenance = 'transport_geometry'


class NoConvergenceError(BackstepError):
    """An iterative solve failed to converge"""

    provenance = 'kernel_solver'

    def __init__(self, message, iterations=0, increments=(), provenance=None):
        super(NoConvergenceError, self).__init__(message, provenance=provenance)
        self.iterations = iterations
        self.increments = tuple(increments)


class CaseMismatchError(BackstepError):
    """The requested speed case disagrees with the classification of the profile."""

    provenance = 'kernel_solver'


class WrongCaseError(BackstepError):
    """An operation was requested for kernels solved under a different speed case."""

    provenance = 'feedforward_volterra'


class CflViolationError(BackstepError):
    """The time step exceeds the CFL bound of the upwind scheme."""

    provenance = 'plant_simulator'


class NonzeroDiagonalCouplingError(BackstepError):
    """Diagonal couplings a(w), d(w) were supplied but must vanish."""

    provenance = 'plant_simulator'


class MissingFeedforwardError(BackstepError):
    """A Case 2/3 target simulation was requested without the feedforward kernels."""

    provenance = 'plant_simulator'


class GridMismatchError(BackstepError):
    """A state is sampled on a different grid than the gains or kernels expect."""

    provenance = 'controller'


class ConfigurationError(BackstepError):
    """
    An experiment configuration could not be parsed or failed validation
    """

    provenance = 'control_cli'

    def __init__(self, message, field=None, line=None):
        super(ConfigurationError, self).__init__(message)
        self.field = field
        self.line = line
