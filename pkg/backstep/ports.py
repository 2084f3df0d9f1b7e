# -*- coding: utf-8 -*-
"""
The schema vocabulary of experiment configurations.

A configuration is a nested mapping. Each leaf is declared as an :class:`InputPort` (type, default, validator) and
each level of nesting as a :class:`PortNamespace`. Validation stops at the first offending value and reports it
as a :class:`PortValidationError` carrying the dotted path of the value, e.g. ``plant.cfl``.
"""
import collections.abc
import json
import logging
import numbers

from backstep.utils import AttributesFrozendict

_LOGGER = logging.getLogger(__name__)

UNSPECIFIED = ()
REAL = numbers.Real
SEPARATOR = '.'

__all__ = [
    'UNSPECIFIED', 'REAL', 'PortValidationError', 'Port', 'InputPort', 'PortNamespace', 'breadcrumbs_to_port',
    'in_range', 'one_of', 'odd_at_least'
]


class PortValidationError(Exception):
    """A configuration value was rejected"""

    def __init__(self, message, port):
        """
        :param message: what is wrong with the value
        :type message: str
        :param port: dotted path of the offending value
        :type port: str
        """
        super(PortValidationError, self).__init__("invalid value for '{}': {}".format(port, message))
        self._message = message
        self._port = port

    @property
    def message(self):
        return self._message

    @property
    def port(self):
        return self._port


class Port(object):
    """A single named configuration value with an optional type and validator."""

    def __init__(self, name, valid_type=None, help=None, required=True, validator=None):  # pylint: disable=redefined-builtin
        self._name = name
        self._valid_type = valid_type
        self._help = help
        self._required = required
        self._validator = validator

    def __str__(self):
        return json.dumps(self.get_description())

    @property
    def name(self):
        return self._name

    @property
    def valid_type(self):
        return self._valid_type

    @property
    def help(self):
        return self._help

    @property
    def required(self):
        return self._required

    @property
    def validator(self):
        """
        :rtype: typing.Callable[[typing.Any, Port], typing.Optional[str]]
        """
        return self._validator

    @staticmethod
    def has_default():
        return False

    def get_description(self):
        description = {'name': str(self.name), 'required': self.required}
        if self.valid_type is not None:
            description['valid_type'] = _type_name(self.valid_type)
        if self.help:
            description['help'] = self.help.strip()
        return description

    def check(self, value):
        """
        Check a single value against this port.

        :return: the reason the value is rejected, or None if it is acceptable
        :rtype: typing.Optional[str]
        """
        if value is UNSPECIFIED:
            return "required value was not provided for '{}'".format(self.name) if self.required else None

        if self.valid_type is not None and not _is_instance(value, self.valid_type):
            return "'{}' must be of type {}, got {}".format(self.name, _type_name(self.valid_type),
                                                           type(value).__name__)

        if self.validator is None:
            return None

        reason = self.validator(value, self)
        assert reason is None or isinstance(reason, str), 'validators return a string or None'
        return reason

    def validate(self, value, breadcrumbs=()):
        """
        :param breadcrumbs: names of the enclosing namespaces
        :rtype: typing.Optional[PortValidationError]
        """
        reason = self.check(value)
        if reason is None:
            return None
        return PortValidationError(reason, breadcrumbs_to_port(breadcrumbs + (self.name,)))


class InputPort(Port):
    """
    A configuration value that may carry a default.

    A port with a default is never required. A callable default is only evaluated when the configuration is
    pre-processed, and it is not checked against the port.
    """

    def __init__(self, name, valid_type=None, help=None, default=UNSPECIFIED, required=True, validator=None):  # pylint: disable=redefined-builtin
        if default is not UNSPECIFIED:
            required = False
        super(InputPort, self).__init__(name, valid_type=valid_type, help=help, required=required,
                                        validator=validator)
        self._default = default

        if default is not UNSPECIFIED and not callable(default):
            reason = self.check(default)
            if reason is not None:
                raise ValueError("invalid default for '{}': {}".format(name, reason))

    def has_default(self):
        return self._default is not UNSPECIFIED

    @property
    def default(self):
        if not self.has_default():
            raise RuntimeError("'{}' has no default".format(self.name))
        return self._default

    def default_value(self):
        return self._default() if callable(self._default) else self._default

    def get_description(self):
        description = super(InputPort, self).get_description()
        if self.has_default() and not callable(self._default):
            description['default'] = str(self._default)
        return description


class PortNamespace(collections.abc.MutableMapping, Port):
    """
    A level of a nested configuration: a mapping from keys to ports or further namespaces.

    Keys without a port are rejected. An optional validator sees the whole mapping after every port has accepted
    its value, for checks that span several keys.
    """

    def __init__(self, name=None, help=None, required=True, validator=None):  # pylint: disable=redefined-builtin
        super(PortNamespace, self).__init__(name, help=help, required=required, validator=validator)
        self._ports = {}

    def __str__(self):
        return json.dumps(self.get_description(), sort_keys=True, indent=4)

    def __getitem__(self, key):
        return self._ports[key]

    def __setitem__(self, key, port):
        if not isinstance(port, Port):
            raise TypeError('only ports can be added to a namespace, got {}'.format(type(port).__name__))
        self._ports[key] = port

    def __delitem__(self, key):
        del self._ports[key]

    def __iter__(self):
        return iter(self._ports)

    def __len__(self):
        return len(self._ports)

    def get_description(self):
        description = {'_attrs': {'required': self.required, 'help': self.help}}
        description.update((key, port.get_description()) for key, port in self._ports.items())
        return description

    def required_names(self):
        """Dotted names of the leaves that must be given, because they have neither a default nor a fallback"""
        names = []
        for key in sorted(self._ports):
            port = self._ports[key]
            if isinstance(port, PortNamespace):
                names.extend(SEPARATOR.join((key, name)) for name in port.required_names())
            elif port.required:
                names.append(key)
        return names

    def create_port_namespace(self, name, **kwargs):
        """
        Return the namespace at the dotted ``name``, creating any missing level on the way.

        :param kwargs: passed on to the innermost namespace if it has to be created
        :raises ValueError: if a level of the path is taken by a plain port
        """
        if not isinstance(name, str) or not name:
            raise ValueError('namespace names are non-empty strings, got {!r}'.format(name))

        head, _, rest = name.partition(SEPARATOR)
        if head not in self:
            self[head] = type(self)(head, **kwargs) if not rest else type(self)(head)
        elif not isinstance(self[head], PortNamespace):
            raise ValueError("'{}' in '{}' is a port, not a namespace".format(head, self.name))

        if rest:
            return self[head].create_port_namespace(rest, **kwargs)
        return self[head]

    def validate(self, port_values=None, breadcrumbs=()):
        """
        Validate a nested mapping against this namespace.

        :param port_values: the mapping to check; None counts as empty
        :param breadcrumbs: names of the enclosing namespaces
        :rtype: typing.Optional[PortValidationError]
        """
        if self.name:
            breadcrumbs = breadcrumbs + (self.name,)

        if port_values is UNSPECIFIED or port_values is None:
            port_values = {}
        if not isinstance(port_values, collections.abc.Mapping):
            return PortValidationError('expected a mapping, got {}'.format(type(port_values).__name__),
                                       breadcrumbs_to_port(breadcrumbs))

        if not port_values and not self.required:
            return None

        for key, port in self._ports.items():
            error = port.validate(port_values.get(key, UNSPECIFIED), breadcrumbs)
            if error is not None:
                return error

        unknown = sorted(str(key) for key in port_values if key not in self._ports)
        if unknown:
            return PortValidationError('unexpected keys {}'.format(', '.join(unknown)),
                                       breadcrumbs_to_port(breadcrumbs))

        reason = None if self.validator is None else self.validator(dict(port_values), self)
        if reason is not None:
            return PortValidationError(reason, breadcrumbs_to_port(breadcrumbs))
        return None

    def pre_process(self, port_values):
        """
        Fill in the defaults of a validated mapping.

        Nested namespaces are always present in the result, lists become tuples and the result is immutable.

        :rtype: :class:`backstep.utils.AttributesFrozendict`
        """
        result = dict(port_values or {})

        for key, port in self._ports.items():
            if isinstance(port, PortNamespace):
                result[key] = port.pre_process(result.get(key))
            elif key in result:
                if isinstance(result[key], list):
                    result[key] = tuple(result[key])
            elif port.has_default():
                default = port.default_value()
                result[key] = tuple(default) if isinstance(default, list) else default

        return AttributesFrozendict(result)


def breadcrumbs_to_port(breadcrumbs):
    """Join the names of a path through nested namespaces, e.g. ``('plant', 'cfl')`` gives ``plant.cfl``"""
    return SEPARATOR.join(breadcrumbs)


def in_range(lower=None, upper=None, lower_inclusive=True, upper_inclusive=True, name=None):
    """
    Validator for numbers in an interval, with messages such as ``cfl must lie in (0,1]`` or ``nx must be >= 3``.

    :param name: the label used in the message, the port name by default
    """

    def validator(value, port):
        above = lower is None or value > lower or (lower_inclusive and value == lower)
        below = upper is None or value < upper or (upper_inclusive and value == upper)
        if above and below:
            return None

        label = name or port.name
        if upper is None:
            return '{} must be {} {:g}'.format(label, '>=' if lower_inclusive else '>', lower)
        if lower is None:
            return '{} must be {} {:g}'.format(label, '<=' if upper_inclusive else '<', upper)
        opening, closing = '[' if lower_inclusive else '(', ']' if upper_inclusive else ')'
        return '{} must lie in {}{:g},{:g}{}'.format(label, opening, lower, upper, closing)

    return validator


def one_of(*choices):
    """Validator for a closed set of values"""

    def validator(value, port):
        if value in choices:
            return None
        return '{} must be one of {}, got {!r}'.format(port.name, ', '.join(str(choice) for choice in choices), value)

    return validator


def odd_at_least(minimum):
    """Validator for node counts: odd, so that a node sits at zero, and not below ``minimum``"""

    def validator(value, port):
        if value < minimum:
            return '{} must be at least {}, got {}'.format(port.name, minimum, value)
        if value % 2 == 0:
            return '{} must be odd, got {}'.format(port.name, value)
        return None

    return validator


def _is_instance(value, valid_type):
    types = valid_type if isinstance(valid_type, tuple) else (valid_type,)
    # bool subclasses int but is never accepted as a number
    if isinstance(value, bool) and bool not in types:
        return False
    return isinstance(value, types)


def _type_name(valid_type):
    types = valid_type if isinstance(valid_type, tuple) else (valid_type,)
    return ' or '.join(getattr(each, '__name__', str(each)) for each in types)
