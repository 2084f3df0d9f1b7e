# -*- coding: utf-8 -*-
import logging

from .exceptions import *
from .utils import *
from .ports import *
from .workflow import *
from .listeners import *
from .profiles import *
from .geometry import *
from .kernels import *
from .feedforward import *
from .simulation import *
from .control import *
from .export import *
from .experiments import *
from .version import *

__all__ = (exceptions.__all__ + utils.__all__ + ports.__all__ + workflow.__all__ + listeners.__all__ +
           profiles.__all__ + geometry.__all__ + kernels.__all__ + feedforward.__all__ + simulation.__all__ +
           control.__all__ + export.__all__ + experiments.__all__ + version.__all__)

# A library only attaches a NullHandler; applications configure the handlers
logging.getLogger(__name__).addHandler(logging.NullHandler())
