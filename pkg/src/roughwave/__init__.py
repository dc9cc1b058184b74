"""Optical functions, dyadic parametrices and dispersive kernel checks on
perturbed Minkowski backgrounds."""

from ._backend import NAME as BACKEND
from .errors import RoughwaveError
from .metric import MetricSpec, SpacetimeMetric, make_metric

__version__ = "0.1.0"

__all__ = ["BACKEND", "MetricSpec", "SpacetimeMetric", "RoughwaveError", "make_metric", "__version__"]
