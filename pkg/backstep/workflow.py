# -*- coding: utf-8 -*-
"""
Synchronous outline-driven pipelines.

A :class:`Pipeline` declares its inputs and its sequence of steps in a ``define`` class method::

    class Demo(Pipeline):

        @classmethod
        def define(cls, spec):
            super(Demo, cls).define(spec)
            spec.input('n', valid_type=int, default=3)
            spec.outline(cls.setup, if_(cls.converged)(return_(0)), cls.finish)

Steps are plain methods taking ``self``; state is carried between steps on ``self.ctx``.
"""
import abc
import inspect
import logging
import re

from . import ports
from .utils import AttributesDict

__all__ = ['PipelineSpec', 'Pipeline', 'if_', 'return_']

_LOGGER = logging.getLogger(__name__)


class PipelineSpec(object):
    """The input schema and the outline of a :class:`Pipeline`. It is sealed once ``define`` has run."""

    def __init__(self):
        self._inputs = ports.PortNamespace()
        self._outline = None
        self._sealed = False

    @property
    def inputs(self):
        return self._inputs

    @property
    def sealed(self):
        return self._sealed

    def seal(self):
        self._sealed = True

    def get_description(self):
        description = {'inputs': self._inputs.get_description()}
        if self._outline is not None:
            description['outline'] = self._outline.get_description()
        return description

    def _add(self, port_type, name, kwargs):
        if self._sealed:
            raise RuntimeError("cannot add '{}' to a sealed spec".format(name))

        parent, _, leaf = name.rpartition(ports.SEPARATOR)
        namespace = self._inputs.create_port_namespace(parent) if parent else self._inputs
        namespace[leaf] = port_type(leaf, **kwargs)

    def input(self, name, **kwargs):
        """
        Declare an input, creating the enclosing namespaces of a dotted name such as ``plant.cfl``

        :param kwargs: passed to :class:`backstep.ports.InputPort`
        """
        self._add(ports.InputPort, name, kwargs)

    def input_namespace(self, name, **kwargs):
        """Declare a namespace of inputs, e.g. to attach a validator that sees all of its keys"""
        self._add(ports.PortNamespace, name, kwargs)

    def outline(self, *instructions):
        """Set the steps of the pipeline: methods, ``if_`` and ``return_`` instructions"""
        self._outline = _Block(instructions)

    def get_outline(self):
        return self._outline


class Pipeline(object):
    """
    A series of steps run on validated, immutable inputs with a shared mutable context.

    The inputs are validated against ``spec().inputs`` on construction; a :class:`backstep.ports.PortValidationError`
    is raised for the first invalid value.
    """
    _spec_type = PipelineSpec

    @classmethod
    def spec(cls):
        # Every subclass gets its own spec
        if '_spec' not in vars(cls):
            spec = cls._spec_type()
            cls.define(spec)
            spec.seal()
            cls._spec = spec
        return vars(cls)['_spec']

    @classmethod
    def define(cls, spec):
        pass

    @classmethod
    def get_description(cls):
        description = {'spec': cls.spec().get_description()}
        if cls.__doc__:
            description['description'] = cls.__doc__.strip()
        return description

    def __init__(self, inputs=None, logger=None, label=None):
        schema = self.spec().inputs
        error = schema.validate(inputs)
        if error is not None:
            raise error

        self._inputs = schema.pre_process(inputs)
        self._logger = logger or _LOGGER
        self._label = label or type(self).__name__
        self._context = AttributesDict()
        self._finished = False
        self._result = None

    @property
    def inputs(self):
        return self._inputs

    @property
    def ctx(self):
        return self._context

    @property
    def logger(self):
        return self._logger

    @property
    def label(self):
        return self._label

    @property
    def finished(self):
        return self._finished

    @property
    def result(self):
        return self._result

    def log_with_label(self, level, msg, *args):
        self._logger.log(level, '%s: ' + msg, self._label, *args)

    def run(self):
        """
        Execute the outline from the top. Running a finished pipeline again only returns its result.

        :return: the value given to ``return_`` if one is reached, otherwise the value of the last step executed
        """
        if not self._finished:
            outline = self.spec().get_outline()
            if outline is None:
                raise RuntimeError('{} defines no outline'.format(type(self).__name__))
            try:
                self._result = outline.execute(self)
            except _Exit as exit_:
                self._result = exit_.value
            self._finished = True

        return self._result


class _Instruction(metaclass=abc.ABCMeta):
    """A node of an outline"""

    @abc.abstractmethod
    def execute(self, pipeline):
        """Run the instruction on ``pipeline`` and return the value of the last step it executed"""

    @abc.abstractmethod
    def get_description(self):
        """
        :rtype: str or list or dict
        """

    def __str__(self):
        return str(self.get_description())


class _Step(_Instruction):

    def __init__(self, method):
        try:
            parameters = inspect.getfullargspec(method).args
        except TypeError:
            raise TypeError('outline entries must be methods or instructions, got {}'.format(type(method).__name__))
        if len(parameters) != 1:
            raise TypeError("step '{}' must take 'self' as its only argument".format(method.__name__))
        self._method = method

    def execute(self, pipeline):
        pipeline.logger.debug('%s: running step %s', pipeline.label, self._method.__name__)
        return self._method(pipeline)

    def get_description(self):
        if not self._method.__doc__:
            return self._method.__name__
        return '{}({})'.format(self._method.__name__, re.sub(r'\s+', ' ', self._method.__doc__).strip())


class _Block(_Instruction):

    def __init__(self, instructions):
        self._instructions = [_as_instruction(instruction) for instruction in instructions]

    def execute(self, pipeline):
        value = None
        for instruction in self._instructions:
            value = instruction.execute(pipeline)
        return value

    def get_description(self):
        return [instruction.get_description() for instruction in self._instructions]


class _Branch(object):
    """A predicate and the block run when it holds"""

    def __init__(self, keyword, predicate):
        self.keyword = keyword
        self.predicate = predicate
        self.body = None

    def holds(self, pipeline):
        return bool(self.predicate(pipeline))

    def label(self):
        return '{}({})'.format(self.keyword, self.predicate.__name__)


class _If(_Instruction):

    def __init__(self, predicate):
        self._branches = [_Branch('if', predicate)]
        self._closed = False

    def __call__(self, *instructions):
        branch = self._branches[-1]
        if branch.body is not None:
            raise RuntimeError('{} already has a body'.format(branch.label()))
        branch.body = _Block(instructions)
        return self

    def elif_(self, predicate):
        if self._closed:
            raise RuntimeError('elif_ after else_')
        self._branches.append(_Branch('elif', predicate))
        return self

    def else_(self, *instructions):
        if self._closed:
            raise RuntimeError('else_ given twice')

        def otherwise(_):
            return True

        self._branches.append(_Branch('else', otherwise))
        self._closed = True
        return self(*instructions)

    def execute(self, pipeline):
        for branch in self._branches:
            if branch.holds(pipeline):
                return branch.body.execute(pipeline)
        return None

    def get_description(self):
        return {
            ('else' if branch.keyword == 'else' else branch.label()): branch.body.get_description()
            for branch in self._branches
        }


class _Exit(BaseException):
    """Unwinds the outline when a ``return_`` is reached"""

    def __init__(self, value):
        super(_Exit, self).__init__()
        self.value = value


class _Return(_Instruction):

    def __init__(self, value=None):
        self._value = value

    def __call__(self, value):
        return _Return(value)

    def execute(self, pipeline):
        raise _Exit(self._value)

    def get_description(self):
        return 'return' if self._value is None else 'return({!r})'.format(self._value)


def if_(predicate):
    """
    Conditional instruction of an outline, chained as ``if_(cls.a)(...).elif_(cls.b)(...).else_(...)``

    :param predicate: pipeline method returning a truth value
    """
    return _If(predicate)


return_ = _Return()
"""Stop the outline with None as the result; ``return_(value)`` stops it with ``value``"""


def _as_instruction(entry):
    return entry if isinstance(entry, _Instruction) else _Step(entry)
