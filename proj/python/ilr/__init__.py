"""Infrared laser reflection attack simulator."""

try:
    from ._ilr import *  # noqa: F401,F403
    from ._ilr import Error, OracleError  # noqa: F401
except ImportError:
    from _ilr import *  # noqa: F401,F403
    from _ilr import Error, OracleError  # noqa: F401

from .ilrc import read_ilrc, write_ilrc  # noqa: E402,F401
