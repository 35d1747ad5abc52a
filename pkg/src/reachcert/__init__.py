"""Certified lower bounds for the reach of implicitly defined manifolds."""

from .expr import FunctionSystem, parse
from .interval import BoxDomain, Interval
from .subdivide import SubdivisionConfig, run

__all__ = ["BoxDomain", "FunctionSystem", "Interval", "SubdivisionConfig", "parse", "run"]
