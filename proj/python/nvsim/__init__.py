"""NV-centre spin and photon simulations."""

from ._core import *  # noqa: F401,F403
from ._core import InvalidArgument, NumericalError, ParseError  # noqa: F401

__version__ = "0.1.0"
