# -*- coding: utf-8 -*-
"""
Experiment configurations and the pipeline that runs them: kernel solve, gain extraction, open and closed loop
simulation, target-system checks and the artifacts written along the way.
"""
import collections.abc
import copy
import logging
import os

import numpy as np
import yaml

from . import control
from . import export
from . import feedforward
from . import geometry
from . import kernels as kernel_solver
from . import simulation
from .exceptions import BackstepError, ConfigurationError
from .ports import REAL, PortValidationError, in_range, odd_at_least, one_of
from .profiles import CoefficientProfile, DEFAULT_PROFILE_NODES
from .workflow import Pipeline, if_, return_

__all__ = ['Experiment', 'validate_config', 'run_experiment', 'apply_overrides', 'build_profile', 'MODES']

_LOGGER = logging.getLogger(__name__)

MODES = ('open-loop', 'closed-loop', 'both', 'kernels-only', 'target-check')
COEFFICIENT_SOURCES = ('paper-eq60', 'constant', 'custom-samples')


def _valid_grids(value, port):
    if len(value) < 2:
        return '{} needs at least two grids'.format(port.name)
    for nx in value:
        if isinstance(nx, bool) or not isinstance(nx, int) or nx < simulation.MIN_PLANT_NODES or nx % 2 == 0:
            return '{} entries must be odd integers of at least {}, got {!r}'.format(
                port.name, simulation.MIN_PLANT_NODES, nx)
    if any(second <= first for first, second in zip(value, value[1:])):
        return '{} must be increasing'.format(port.name)
    return None


def _valid_coefficients(values, port):
    if values.get('name') != 'custom-samples':
        return None
    path = values.get('path')
    if path is None:
        return "coefficients.path is required when coefficients.name is 'custom-samples'"
    if not os.path.isfile(path):
        return "coefficient file '{}' does not exist".format(path)
    return None


class Experiment(Pipeline):
    """Solve the kernels of a plant, build the feedback laws and simulate the plant or its target system."""

    @classmethod
    def define(cls, spec):
        super(Experiment, cls).define(spec)
        spec.input('mode', valid_type=str, default='both', validator=one_of(*MODES), help='What to run')

        spec.input_namespace('coefficients', validator=_valid_coefficients, help='The plant coefficients')
        spec.input('coefficients.name', valid_type=str, validator=one_of(*COEFFICIENT_SOURCES))
        spec.input('coefficients.lambda', valid_type=REAL, default=1.0, validator=in_range(0.0, lower_inclusive=False))
        spec.input('coefficients.mu', valid_type=REAL, default=1.0, validator=in_range(0.0, lower_inclusive=False))
        spec.input('coefficients.b', valid_type=REAL, default=0.0)
        spec.input('coefficients.c', valid_type=REAL, default=0.0)
        spec.input('coefficients.path', valid_type=str, required=False, help='CSV with columns w, lambda, mu, b, c')
        spec.input('coefficients.nodes', valid_type=int, default=DEFAULT_PROFILE_NODES, validator=in_range(3))

        spec.input('initial.name', valid_type=str, default='paper', validator=one_of(*simulation.INITIAL_CONDITIONS))

        spec.input('kernel.nw', valid_type=int, default=129, validator=odd_at_least(kernel_solver.MIN_KERNEL_NODES))
        spec.input('kernel.ns', valid_type=int, default=129, validator=odd_at_least(kernel_solver.MIN_KERNEL_NODES))
        spec.input('kernel.case', valid_type=(str, int), default='auto', validator=one_of('auto', 1, 2, 3))
        spec.input('kernel.max_iterations', valid_type=int, default=200, validator=in_range(1))

        spec.input('plant.nx', valid_type=int, default=401, validator=odd_at_least(simulation.MIN_PLANT_NODES))
        spec.input('plant.cfl', valid_type=REAL, default=0.8, validator=in_range(0.0, 1.0, lower_inclusive=False))
        spec.input('plant.t_final', valid_type=REAL, default=3.0, validator=in_range(0.0, lower_inclusive=False))
        spec.input('plant.record_every', valid_type=int, default=10, validator=in_range(1))

        positive = in_range(0.0, lower_inclusive=False)
        spec.input('tolerances.classification', valid_type=REAL, default=1e-10, validator=positive)
        spec.input('tolerances.picard', valid_type=REAL, default=1e-12, validator=positive)
        spec.input('tolerances.volterra', valid_type=REAL, default=1e-12, validator=positive)
        spec.input('tolerances.settling', valid_type=REAL, default=1e-2, validator=positive)

        spec.input('target_check.grids', valid_type=(list, tuple), default=[101, 201, 401], validator=_valid_grids)

        spec.input('output.directory', valid_type=str, default='backstep-output')

        spec.outline(
            cls.setup,
            if_(cls.is_target_check)(
                if_(cls.is_equal_case)(cls.run_grid_study).else_(
                    cls.solve_kernels,
                    cls.solve_feedforward,
                    cls.run_target_simulation,
                ),
                cls.summarize,
                return_,
            ),
            cls.solve_kernels,
            cls.check_kernels,
            if_(cls.is_kernels_only)(cls.summarize, return_),
            cls.build_gains,
            if_(cls.wants_open_loop)(cls.run_open_loop),
            if_(cls.wants_closed_loop)(cls.run_closed_loop),
            cls.summarize,
        )

    def _output(self, name):
        return os.path.join(self.inputs.output.directory, name)

    def setup(self):
        """Build the profile and the travel-time maps and classify the speeds"""
        self.ctx.profile = build_profile(self.inputs.coefficients)
        self.ctx.phi = geometry.build_phi_maps(self.ctx.profile)
        self.ctx.case = geometry.classify_speed_case(self.ctx.profile, self.inputs.tolerances.classification)
        self.ctx.summary = {
            'mode': self.inputs.mode,
            'profile': self.ctx.profile.name,
            'case': self.ctx.case.tag.label,
            'classification_margin': self.ctx.case.margin,
            'tf': self.ctx.phi.settling_time(self.ctx.case),
            'phi_spans': list(self.ctx.phi.spans),
            'warnings': [],
        }
        os.makedirs(self.inputs.output.directory, exist_ok=True)
        self.log_with_label(logging.INFO, 'profile %s classified as %s (margin %.6g)', self.ctx.profile.name,
                            self.ctx.case.tag.label, self.ctx.case.margin)

    def is_target_check(self):
        return self.inputs.mode == 'target-check'

    def is_equal_case(self):
        return self.ctx.case.tag is geometry.CaseTag.EQUAL

    def is_kernels_only(self):
        return self.inputs.mode == 'kernels-only'

    def wants_open_loop(self):
        return self.inputs.mode in ('open-loop', 'both')

    def wants_closed_loop(self):
        return self.inputs.mode in ('closed-loop', 'both')

    def _sim_config(self):
        plant = self.inputs.plant
        return simulation.SimConfig(nx=plant.nx, cfl=plant.cfl, t_final=plant.t_final, record_every=plant.record_every)

    def solve_kernels(self):
        settings = self.inputs.kernel
        self.ctx.kernels, self.ctx.diagnostics = kernel_solver.solve_kernels(
            self.ctx.profile,
            self.ctx.phi,
            case=settings.case,
            nw=settings.nw,
            ns=settings.ns,
            tol=self.inputs.tolerances.picard,
            max_iterations=settings.max_iterations,
            classification_tol=self.inputs.tolerances.classification)
        self.ctx.summary['picard_iterations'] = self.ctx.diagnostics.iterations
        self.ctx.summary['warnings'].extend(self.ctx.diagnostics.warnings)
        export.write_kernels(self._output('kernels.csv'), self.ctx.kernels)
        self.log_with_label(logging.INFO, 'kernels converged after %d sweeps', self.ctx.diagnostics.iterations)

    def check_kernels(self):
        """Finite-difference residual and exponential bound of the solved kernels"""
        residual = kernel_solver.kernel_residual(self.ctx.kernels, self.ctx.profile, self.ctx.phi)
        bound = kernel_solver.kernel_bound_check(self.ctx.kernels, self.ctx.diagnostics)
        self.ctx.summary.update({
            'kernel_residual': residual.worst,
            'kernel_residual_per_kernel': residual.sup,
            'bound_passed': bound.passed,
            'bound_margin': bound.worst_margin,
            'bound_ratio': bound.worst_ratio,
        })
        if not bound.passed:
            self.log_with_label(logging.WARNING, 'kernels exceed the exponential bound by %.3g', -bound.worst_margin)

    def build_gains(self):
        self.ctx.nodes = simulation.uniform_grid(self.inputs.plant.nx)
        self.ctx.gains = control.gains_from_kernels(self.ctx.kernels, self.ctx.phi, self.ctx.nodes)
        export.write_gains(self._output('gains.csv'), self.ctx.gains)

    def run_open_loop(self):
        result = simulation.simulate(self.ctx.profile, self._sim_config(), None, self.inputs.initial.name)
        export.write_norm_trace(self._output('norm_trace_open.csv'), result.trace)
        export.write_snapshots(self._output('snapshots_open.csv'), result.snapshots)
        norms = result.norms()
        growth = norms[-1] / norms[0] if norms[0] > 0.0 else float('nan')
        self.ctx.summary['open_loop_growth'] = growth
        self.log_with_label(logging.INFO, 'open loop: final/initial L2 norm %.6g', growth)

    def run_closed_loop(self):
        transform = control.TransformOperator(self.ctx.kernels, self.ctx.nodes)
        recorder = simulation.NormTraceRecorder(transform)
        result = simulation.simulate(self.ctx.profile,
                                     self._sim_config(),
                                     control.FeedbackController(self.ctx.gains),
                                     self.inputs.initial.name,
                                     listeners=[recorder])
        export.write_norm_trace(self._output('norm_trace_closed.csv'), recorder.rows)
        export.write_snapshots(self._output('snapshots_closed.csv'), result.snapshots, transform)

        times = np.array([row[0] for row in recorder.rows])
        norms = np.array([row[1] for row in recorder.rows])
        relative = norms / norms[0] if norms[0] > 0.0 else np.zeros_like(norms)
        # The initial data is not compatible with the feedback, so only injected states count
        boundary = max([max(abs(alpha), abs(beta)) for t, alpha, beta in recorder.boundary_residuals if t > 0.0]
                       or [0.0])
        self.ctx.summary.update({
            'closed_loop_final_relative_l2': float(relative[-1]),
            'closed_loop_settling_time': simulation.settling_time(times, norms, self.inputs.tolerances.settling),
            'boundary_residual': boundary,
        })
        self.log_with_label(logging.INFO, 'closed loop: final relative L2 norm %.3e', relative[-1])

    def run_grid_study(self):
        """Compare the simulated Equal-case target with its closed form on every configured grid"""
        study = simulation.target_grid_study(self.ctx.profile,
                                             self.ctx.phi,
                                             self.inputs.target_check.grids,
                                             cfl=self.inputs.plant.cfl)
        export.write_target_check(self._output('target_check.csv'), study)
        self.ctx.summary['target_check'] = study

    def solve_feedforward(self):
        self.ctx.feedforward = feedforward.solve_feedforward(self.ctx.kernels,
                                                             None,
                                                             tol=self.inputs.tolerances.volterra,
                                                             profile=self.ctx.profile)
        export.write_feedforward(self._output('feedforward.csv'), self.ctx.feedforward)
        self.ctx.summary['feedforward_sup'] = self.ctx.feedforward.sup_norm()

    def run_target_simulation(self):
        result = simulation.simulate_target(self.ctx.case, self.ctx.feedforward, self._sim_config(), self.ctx.profile,
                                            'smooth')
        export.write_norm_trace(self._output('norm_trace_target.csv'), result.trace)
        norms = result.norms()
        self.ctx.summary['target_final_relative_l2'] = float(norms[-1] / norms[0]) if norms[0] > 0.0 else 0.0
        self.ctx.summary['target_settling_time'] = simulation.settling_time(result.times(), norms,
                                                                            self.inputs.tolerances.settling)

    def summarize(self):
        export.write_summary(self._output('summary.yaml'), self.ctx.summary)
        self.log_with_label(logging.INFO, "summary written to '%s'", self._output('summary.yaml'))
        return self.ctx.summary


def build_profile(coefficients):
    """The :class:`backstep.profiles.CoefficientProfile` named by a validated ``coefficients`` namespace"""
    if coefficients.name == 'paper-eq60':
        return CoefficientProfile.paper_eq60(nodes=coefficients.nodes)
    if coefficients.name == 'constant':
        return CoefficientProfile.constant(coefficients['lambda'], coefficients.mu, coefficients.b, coefficients.c,
                                           nodes=coefficients.nodes)
    return CoefficientProfile.from_csv(coefficients.path, nodes=coefficients.nodes)


def _set_dotted(target, dotted, value):
    keys = dotted.split('.')
    for key in keys[:-1]:
        child = target.get(key)
        if not isinstance(child, collections.abc.MutableMapping):
            child = {}
            target[key] = child
        target = child
    target[keys[-1]] = value


def apply_overrides(raw, overrides):
    """
    Merge dotted-key overrides such as ``{'plant.cfl': 0.5}`` into a raw configuration mapping.
    ``None`` values are skipped.
    """
    merged = copy.deepcopy(dict(raw or {}))
    for dotted, value in overrides.items():
        if value is not None:
            _set_dotted(merged, dotted, value)
    return merged


def validate_config(raw):
    """
    Parse and validate an experiment configuration.

    :param raw: YAML text, an already parsed mapping, or None
    :return: the configuration with every default filled in
    :rtype: :class:`backstep.utils.AttributesFrozendict`
    :raises ConfigurationError: on YAML syntax errors (with the line), on schema violations (with the dotted
        field) and for an empty configuration (listing the required keys)
    """
    if isinstance(raw, str):
        try:
            raw = yaml.safe_load(raw)
        except yaml.YAMLError as exception:
            mark = getattr(exception, 'problem_mark', None)
            line = mark.line + 1 if mark is not None else None
            raise ConfigurationError('invalid YAML{}: {}'.format(' at line {}'.format(line) if line else '',
                                                                 exception),
                                     line=line)

    inputs = Experiment.spec().inputs
    if not raw:
        raise ConfigurationError('configuration is empty; required keys: {}'.format(', '.join(
            inputs.required_names())))
    if not isinstance(raw, collections.abc.Mapping):
        raise ConfigurationError('configuration must be a mapping, got {}'.format(type(raw).__name__))

    error = inputs.validate(raw)
    if error is not None:
        raise ConfigurationError(error.message, field=error.port)

    config = inputs.pre_process(raw)
    if config.coefficients.name == 'custom-samples':
        try:
            CoefficientProfile.from_csv(config.coefficients.path, nodes=config.coefficients.nodes)
        except BackstepError as exception:
            raise ConfigurationError(str(exception), field='coefficients.path')
    return config


def run_experiment(config, logger=None, label=None):
    """
    Run the pipeline of a validated configuration and write its artifacts.

    :param config: the output of :func:`validate_config`
    :return: the run summary, also written to ``summary.yaml`` in the output directory
    :rtype: dict
    """
    try:
        experiment = Experiment(config.to_dict() if hasattr(config, 'to_dict') else config, logger=logger,
                                label=label)
    except PortValidationError as exception:
        raise ConfigurationError(exception.message, field=exception.port)
    experiment.run()
    return experiment.ctx.summary
