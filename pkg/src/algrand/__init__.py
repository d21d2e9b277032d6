"""Exact-arithmetic workbench for equidistribution, computable measures, left-c.e. metrics and weight games."""

from .exact import CauchyReal, DyadicInterval, Rational

__all__ = ["CauchyReal", "DyadicInterval", "Rational"]
__version__ = "0.1.0"
