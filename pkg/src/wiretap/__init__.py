"""Classical and quantum wiretap channel toolkit.

Modules: ``probkit`` (finite distributions, Shannon measures), ``quantkit``
(density matrices, von Neumann measures, bridge functions), ``netkit``
(Bayesian nets), ``identities`` (chain-rule checks), ``region`` (rate
regions and capacities), ``simulate`` (random-coding experiments) and ``cli``.
"""
from .errors import CapExceededError, NumericFailure, SchemaError, ValidationError, WiretapError
from .probkit import Alphabet, Channel, Dist
from .quantkit import DensityMatrix, Isometry
from .region import AuxiliaryModel, RatePoint, RegionConstraints

__version__ = "0.1.0"

__all__ = [
    "Alphabet", "AuxiliaryModel", "CapExceededError", "Channel", "DensityMatrix", "Dist",
    "Isometry", "NumericFailure", "RatePoint", "RegionConstraints", "SchemaError",
    "ValidationError", "WiretapError",
]
