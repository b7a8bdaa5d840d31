"""Steady periodic hydroelastic waves with vorticity beneath an elastic plate.

Pipeline: a vorticity profile plus physical parameters determine a laminar
flow (module :mod:`icewave.laminar`); shooting on the reduced Sturm-Liouville
systems locates the bifurcation point (:mod:`icewave.sturm`, checked against
:mod:`icewave.oracles`); the nonlocal surface operators live in
:mod:`icewave.surface_ops`; Newton continuation of the wave branch in
:mod:`icewave.continuation`; physical fields and residual verification in
:mod:`icewave.reconstruct`.
"""

from .errors import ConditionFailedError, DomainError, IceWaveError, NumericalError
from .laminar import LaminarFlow, PhysicalParams, build_laminar
from .sturm import BifurcationPoint, bifurcation_point
from .vorticity import VorticityProfile

__all__ = [
    "BifurcationPoint",
    "ConditionFailedError",
    "DomainError",
    "IceWaveError",
    "LaminarFlow",
    "NumericalError",
    "PhysicalParams",
    "VorticityProfile",
    "bifurcation_point",
    "build_laminar",
]

__version__ = "0.1.0"
